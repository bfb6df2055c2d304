#include "windmpc/boost_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace windmpc {

void BoostParams::validate() const {
    if (trees < 1) throw ConfigError("trees must be >= 1");
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (bins < 2) throw ConfigError("bins must be >= 2");
    if (lambda < 0) throw ConfigError("lambda must be >= 0");
    if (gamma < 0) throw ConfigError("gamma must be >= 0");
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must be in (0, 1]");
}

GradPair gradients(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat,
                   Loss loss) {
    if (y.size() != yhat.size())
        throw LengthError("labels and predictions differ in length");
    GradPair gp;
    if (loss == Loss::squared) {
        gp.g = yhat - y;
        gp.h = Eigen::VectorXd::Ones(y.size());
    } else {
        Eigen::ArrayXd e = (-yhat.array()).exp();
        Eigen::ArrayXd sig = 1.0 / (1.0 + e);
        gp.g = (-y.array() + sig).matrix();
        gp.h = (e * sig.square()).matrix();
    }
    return gp;
}

GradPair quantize(const GradPair& gp, const FixedCodec& codec) {
    GradPair q;
    q.g = gp.g.unaryExpr([&](double v) { return codec.quantize(v); });
    q.h = gp.h.unaryExpr([&](double v) { return codec.quantize(v); });
    return q;
}

int bin_of(double v, const std::vector<double>& boundaries) {
    // Number of boundaries strictly below v; equality falls in the lower bin.
    return static_cast<int>(
        std::lower_bound(boundaries.begin(), boundaries.end(), v) -
        boundaries.begin());
}

BinFrame local_binning(const Eigen::MatrixXd& X, const std::vector<int>& I,
                       int B) {
    if (I.empty()) throw EmptySampleSpaceError("binning over empty sample space");
    const Eigen::Index M = X.rows(), nf = X.cols();
    BinFrame bf;
    bf.bins = Eigen::MatrixXi::Constant(M, nf, -1);
    bf.boundaries.resize(nf);

    std::vector<double> vals(I.size());
    for (Eigen::Index j = 0; j < nf; ++j) {
        for (size_t t = 0; t < I.size(); ++t) vals[t] = X(I[t], j);
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        const size_t n = sorted.size();
        const double vmax = sorted.back();

        std::vector<double>& bounds = bf.boundaries[j];
        for (int b = 1; b < B; ++b) {
            // Linear-interpolation empirical quantile at b/B.
            double pos = (static_cast<double>(b) / B) * (n - 1);
            size_t lo = static_cast<size_t>(pos);
            double frac = pos - static_cast<double>(lo);
            double v = sorted[lo];
            if (frac > 0.0 && lo + 1 < n) v += frac * (sorted[lo + 1] - v);
            // Keep strictly increasing boundaries; a boundary at or above the
            // column maximum separates nothing and is dropped.
            if ((bounds.empty() || v > bounds.back()) && v < vmax)
                bounds.push_back(v);
        }
        for (size_t t = 0; t < I.size(); ++t)
            bf.bins(I[t], j) = bin_of(vals[t], bounds);
    }
    return bf;
}

Eigen::MatrixXd one_hot(const BinFrame& bf, int B) {
    const Eigen::Index M = bf.bins.rows(), nf = bf.bins.cols();
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(M, nf * B);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < nf; ++j) {
            int b = bf.bins(i, j);
            if (b >= 0) E(i, j * B + b) = 1.0;
        }
    return E;
}

GHMatrices aggregate_plain(const BinFrame& bf, int B, const GradPair& gq,
                           const std::vector<int>& I) {
    const Eigen::Index nf = bf.bins.cols();
    GHMatrices out;
    out.G = Eigen::MatrixXd::Zero(nf, B);
    out.H = Eigen::MatrixXd::Zero(nf, B);
    for (int i : I)
        for (Eigen::Index j = 0; j < nf; ++j) {
            int b = bf.bins(i, j);
            if (b < 0) throw ShapeError("sample space row not binned");
            out.G(j, b) += gq.g(i);
            out.H(j, b) += gq.h(i);
        }
    return out;
}

double split_gain(double GL, double HL, double GR, double HR, double lambda,
                  double gamma) {
    const double G = GL + GR, H = HL + HR;
    return 0.5 * (GL * GL / (HL + lambda) + GR * GR / (HR + lambda) -
                  G * G / (H + lambda)) -
           gamma;
}

std::optional<SplitChoice> scan_best_split(const std::vector<GHMatrices>& gh,
                                           const BoostParams& params) {
    SplitChoice best;
    best.gain = 0.0;  // only strictly positive gains split
    bool found = false;
    for (size_t k = 0; k < gh.size(); ++k) {
        const Eigen::MatrixXd& G = gh[k].G;
        const Eigen::MatrixXd& H = gh[k].H;
        if (G.rows() != H.rows() || G.cols() != H.cols())
            throw ShapeError("G/H matrices disagree");
        const int B = static_cast<int>(G.cols());
        for (Eigen::Index j = 0; j < G.rows(); ++j) {
            const double Gt = G.row(j).sum();
            const double Ht = H.row(j).sum();
            double GL = 0.0, HL = 0.0;
            for (int s = 1; s < B; ++s) {
                GL += G(j, s - 1);
                HL += H(j, s - 1);
                const double GR = Gt - GL, HR = Ht - HL;
                // Empty children are never split candidates.
                if (HL == 0.0 || HR == 0.0) continue;
                const double v =
                    split_gain(GL, HL, GR, HR, params.lambda, params.gamma);
                if (v > best.gain) {
                    best.party = static_cast<int>(k);
                    best.feature = static_cast<int>(j);
                    best.position = s;
                    best.gain = v;
                    found = true;
                }
            }
        }
    }
    if (!found) return std::nullopt;
    return best;
}

double leaf_weight(double G_sum, double H_sum, double lambda) {
    const double denom = H_sum + lambda;
    if (denom == 0.0) return 0.0;
    return -G_sum / denom;
}

std::vector<int> sample_split(const std::vector<int>& I,
                              const Eigen::VectorXd& column, double boundary) {
    std::vector<int> IL;
    for (int i : I)
        if (column(i) <= boundary) IL.push_back(i);
    return IL;
}

std::vector<int> complement_in_order(const std::vector<int>& I,
                                     const std::vector<int>& IL) {
    std::vector<int> IR;
    size_t p = 0;
    for (int i : I) {
        if (p < IL.size() && IL[p] == i)
            ++p;
        else
            IR.push_back(i);
    }
    return IR;
}

// ---- tree growth skeleton --------------------------------------------------------

namespace {

struct NodeWork {
    int node_id;
    std::vector<int> samples;
};

}  // namespace

TreeGrowth grow_tree(const NodeBackend& backend, const GradPair& gq,
                     const BoostParams& params, int tree_index,
                     std::ostream* depth_log) {
    TreeGrowth out;
    Tree& tree = out.tree;
    const int M = static_cast<int>(gq.g.size());
    std::vector<int> all(M);
    for (int i = 0; i < M; ++i) all[i] = i;

    tree.nodes.push_back(TreeNode{0, 0, true, -1, -1, -1, 0.0, -1, -1, 0.0});
    std::vector<NodeWork> frontier{{0, std::move(all)}};
    int level = 0;

    while (!frontier.empty()) {
        const auto level_start = std::chrono::steady_clock::now();
        const size_t level_nodes = frontier.size();
        std::vector<NodeWork> next;
        for (NodeWork& w : frontier) {
            // Depth counts node levels: a depth-D tree has D levels, so only
            // nodes above the last level may split (D=1 is a single leaf).
            const bool may_split =
                tree.nodes[w.node_id].depth + 1 < params.depth;
            std::optional<SplitChoice> choice;
            if (may_split)
                choice = scan_best_split(
                    backend.aggregate(w.samples, tree_index, w.node_id), params);
            if (choice) {
                std::vector<int> IL = backend.partition_left(
                    *choice, w.samples, tree_index, w.node_id);
                std::vector<int> IR = complement_in_order(w.samples, IL);
                if (IL.empty() || IR.empty())
                    throw InconsistencyError("scan chose an empty split");

                const int left_id = static_cast<int>(tree.nodes.size());
                const int right_id = left_id + 1;
                TreeNode& node = tree.nodes[w.node_id];
                node.is_leaf = false;
                node.owner = choice->party;
                node.feature = choice->feature;
                node.position = choice->position;
                node.gain = choice->gain;
                node.left = left_id;
                node.right = right_id;
                const int d = node.depth + 1;
                tree.nodes.push_back(
                    TreeNode{left_id, d, true, -1, -1, -1, 0.0, -1, -1, 0.0});
                tree.nodes.push_back(
                    TreeNode{right_id, d, true, -1, -1, -1, 0.0, -1, -1, 0.0});
                next.push_back({left_id, std::move(IL)});
                next.push_back({right_id, std::move(IR)});
            } else {
                double G = 0.0, H = 0.0;
                for (int i : w.samples) {
                    G += gq.g(i);
                    H += gq.h(i);
                }
                TreeNode& node = tree.nodes[w.node_id];
                node.weight = leaf_weight(G, H, params.lambda);
                out.leaf_samples.push_back(std::move(w.samples));
                out.leaf_weights.push_back(node.weight);
            }
        }
        if (depth_log) {
            const double ms =
                std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - level_start)
                    .count();
            (*depth_log) << "tree " << tree_index << " depth " << level << ": "
                         << ms << " ms (" << level_nodes << " nodes)\n";
        }
        ++level;
        frontier = std::move(next);
    }
    return out;
}

// ---- centralized reference ------------------------------------------------------

BoostModel oracle_train(const std::vector<Eigen::MatrixXd>& party_features,
                        const std::vector<int>& party_ids,
                        const Eigen::VectorXd& y, const BoostParams& params) {
    params.validate();
    if (party_features.empty()) throw ShapeError("no party features");
    if (party_features.size() != party_ids.size())
        throw ShapeError("party id list does not match feature frames");
    const Eigen::Index M = y.size();
    if (M == 0) throw LengthError("empty training set");
    for (const auto& X : party_features)
        if (X.rows() != M) throw ShapeError("feature/label row mismatch");

    FixedCodec codec(params.frac_bits);
    BoostModel model;
    model.params = params;
    model.party_ids = party_ids;
    model.base_score = y.mean();

    // Bin frames computed in aggregate are reused by the partition step.
    std::map<std::pair<int, int>, std::vector<BinFrame>> node_frames;
    const GradPair* backend_grad = nullptr;  // the tree being grown
    NodeBackend backend;
    backend.aggregate = [&](const std::vector<int>& I, int tree,
                            int node) -> std::vector<GHMatrices> {
        std::vector<BinFrame> frames;
        std::vector<GHMatrices> gh;
        const GradPair& g = *backend_grad;
        for (const auto& X : party_features) {
            frames.push_back(local_binning(X, I, params.bins));
            gh.push_back(aggregate_plain(frames.back(), params.bins, g, I));
        }
        node_frames[{tree, node}] = std::move(frames);
        return gh;
    };
    backend.partition_left = [&](const SplitChoice& c, const std::vector<int>& I,
                                 int tree, int node) -> std::vector<int> {
        auto it = node_frames.find({tree, node});
        if (it == node_frames.end())
            throw InconsistencyError("partition before aggregation");
        const auto& bounds = it->second[c.party].boundaries[c.feature];
        if (c.position < 1 || c.position > static_cast<int>(bounds.size()))
            throw MissingBoundaryError("split position has no boundary (tree " +
                                       std::to_string(tree) + ")");
        const double b = bounds[c.position - 1];
        model.boundaries[party_ids[c.party]][{tree, node}] = b;
        return sample_split(I, party_features[c.party].col(c.feature), b);
    };

    Eigen::VectorXd yhat = Eigen::VectorXd::Constant(M, model.base_score);
    for (int t = 0; t < params.trees; ++t) {
        GradPair gq = quantize(gradients(y, yhat, params.loss), codec);
        backend_grad = &gq;
        node_frames.clear();
        TreeGrowth growth = grow_tree(backend, gq, params, t);
        model.trees.push_back(std::move(growth.tree));
        for (size_t l = 0; l < growth.leaf_samples.size(); ++l)
            for (int i : growth.leaf_samples[l])
                yhat(i) += params.eta * growth.leaf_weights[l];
    }
    return model;
}

Eigen::VectorXd oracle_predict(
    const BoostModel& m, const std::vector<Eigen::MatrixXd>& party_features) {
    if (party_features.size() != m.party_ids.size())
        throw ShapeError("feature frames do not match trained parties");
    const Eigen::Index rows = party_features.empty()
                                  ? 0
                                  : party_features.front().rows();
    Eigen::VectorXd out = Eigen::VectorXd::Constant(rows, m.base_score);
    for (size_t t = 0; t < m.trees.size(); ++t) {
        const Tree& tree = m.trees[t];
        for (Eigen::Index r = 0; r < rows; ++r) {
            int cur = 0;
            while (!tree.nodes[cur].is_leaf) {
                const TreeNode& nd = tree.nodes[cur];
                auto store = m.boundaries.find(m.party_ids[nd.owner]);
                if (store == m.boundaries.end())
                    throw MissingBoundaryError("no boundary store for owner");
                auto it = store->second.find({static_cast<int>(t), nd.id});
                if (it == store->second.end())
                    throw MissingBoundaryError("split boundary not stored");
                const double x = party_features[nd.owner](r, nd.feature);
                cur = (x <= it->second) ? nd.left : nd.right;
            }
            out(r) += m.params.eta * tree.nodes[cur].weight;
        }
    }
    return out;
}

std::vector<SplitRecord> split_records(const BoostModel& m) {
    std::vector<SplitRecord> recs;
    for (size_t t = 0; t < m.trees.size(); ++t)
        for (const TreeNode& nd : m.trees[t].nodes)
            if (!nd.is_leaf)
                recs.push_back({static_cast<int>(t), nd.id, nd.owner, nd.feature,
                                nd.position, nd.gain});
    return recs;
}

// ---- serialization ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'W', 'M', 'P', 'C', 'M', 'D', 'L', '1'};

void put_u64f(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
void put_f64f(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
void put_i32f(std::ostream& os, int32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
uint64_t get_u64f(std::istream& is) {
    uint64_t v;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
double get_f64f(std::istream& is) {
    double v;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
int32_t get_i32f(std::istream& is) {
    int32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace

void save_model(const BoostModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open model file for writing: " + path);
    os.write(kMagic, 8);
    put_i32f(os, m.params.trees);
    put_i32f(os, m.params.depth);
    put_i32f(os, m.params.bins);
    put_f64f(os, m.params.gamma);
    put_f64f(os, m.params.lambda);
    put_f64f(os, m.params.eta);
    put_i32f(os, m.params.loss == Loss::squared ? 0 : 1);
    put_i32f(os, m.params.frac_bits);
    put_f64f(os, m.base_score);
    put_i32f(os, static_cast<int32_t>(m.party_ids.size()));
    for (int id : m.party_ids) put_i32f(os, id);
    put_i32f(os, static_cast<int32_t>(m.trees.size()));
    for (const Tree& t : m.trees) {
        put_i32f(os, static_cast<int32_t>(t.nodes.size()));
        for (const TreeNode& nd : t.nodes) {
            put_i32f(os, nd.id);
            put_i32f(os, nd.depth);
            put_i32f(os, nd.is_leaf ? 1 : 0);
            put_i32f(os, nd.owner);
            put_i32f(os, nd.feature);
            put_i32f(os, nd.position);
            put_f64f(os, nd.gain);
            put_i32f(os, nd.left);
            put_i32f(os, nd.right);
            put_f64f(os, nd.weight);
        }
    }
    put_i32f(os, static_cast<int32_t>(m.boundaries.size()));
    for (const auto& [party, store] : m.boundaries) {
        put_i32f(os, party);
        put_u64f(os, store.size());
        for (const auto& [key, val] : store) {
            put_i32f(os, key.first);
            put_i32f(os, key.second);
            put_f64f(os, val);
        }
    }
    if (!os) throw FormatError("model write failed: " + path);
}

BoostModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open model file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("bad model file magic: " + path);
    BoostModel m;
    m.params.trees = get_i32f(is);
    m.params.depth = get_i32f(is);
    m.params.bins = get_i32f(is);
    m.params.gamma = get_f64f(is);
    m.params.lambda = get_f64f(is);
    m.params.eta = get_f64f(is);
    m.params.loss = get_i32f(is) == 0 ? Loss::squared : Loss::logistic;
    m.params.frac_bits = get_i32f(is);
    m.base_score = get_f64f(is);
    int np = get_i32f(is);
    m.party_ids.resize(np);
    for (int i = 0; i < np; ++i) m.party_ids[i] = get_i32f(is);
    int nt = get_i32f(is);
    m.trees.resize(nt);
    for (int t = 0; t < nt; ++t) {
        int nn = get_i32f(is);
        m.trees[t].nodes.resize(nn);
        for (int n = 0; n < nn; ++n) {
            TreeNode& nd = m.trees[t].nodes[n];
            nd.id = get_i32f(is);
            nd.depth = get_i32f(is);
            nd.is_leaf = get_i32f(is) != 0;
            nd.owner = get_i32f(is);
            nd.feature = get_i32f(is);
            nd.position = get_i32f(is);
            nd.gain = get_f64f(is);
            nd.left = get_i32f(is);
            nd.right = get_i32f(is);
            nd.weight = get_f64f(is);
        }
    }
    int nb = get_i32f(is);
    for (int b = 0; b < nb; ++b) {
        int party = get_i32f(is);
        uint64_t cnt = get_u64f(is);
        BoundaryStore store;
        for (uint64_t c = 0; c < cnt; ++c) {
            int tr = get_i32f(is);
            int node = get_i32f(is);
            double val = get_f64f(is);
            store[{tr, node}] = val;
        }
        m.boundaries[party] = std::move(store);
    }
    if (!is) throw FormatError("model file truncated: " + path);
    return m;
}

std::string model_to_json(const BoostModel& m) {
    nlohmann::json j;
    j["format"] = "WMPCMDL1";
    j["params"] = {{"trees", m.params.trees},     {"depth", m.params.depth},
                   {"bins", m.params.bins},       {"gamma", m.params.gamma},
                   {"lambda", m.params.lambda},   {"eta", m.params.eta},
                   {"loss", m.params.loss == Loss::squared ? "squared"
                                                           : "logistic"},
                   {"frac_bits", m.params.frac_bits}};
    j["base_score"] = m.base_score;
    j["party_ids"] = m.party_ids;
    j["trees"] = nlohmann::json::array();
    for (const Tree& t : m.trees) {
        nlohmann::json jt = nlohmann::json::array();
        for (const TreeNode& nd : t.nodes) {
            nlohmann::json jn{{"id", nd.id},         {"depth", nd.depth},
                              {"leaf", nd.is_leaf},  {"weight", nd.weight}};
            if (!nd.is_leaf) {
                jn["owner"] = nd.owner;
                jn["feature"] = nd.feature;
                jn["position"] = nd.position;
                jn["gain"] = nd.gain;
                jn["left"] = nd.left;
                jn["right"] = nd.right;
            }
            jt.push_back(jn);
        }
        j["trees"].push_back(jt);
    }
    nlohmann::json jb = nlohmann::json::object();
    for (const auto& [party, store] : m.boundaries) {
        nlohmann::json js = nlohmann::json::array();
        for (const auto& [key, val] : store)
            js.push_back({{"tree", key.first}, {"node", key.second},
                          {"boundary", val}});
        jb[std::to_string(party)] = js;
    }
    j["boundaries"] = jb;
    return j.dump(2);
}

}  // namespace windmpc
