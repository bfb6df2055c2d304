#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"

#include "windmpc/boost_core.hpp"
#include "windmpc/boost_train.hpp"
#include "windmpc/dataset.hpp"
#include "windmpc/errors.hpp"
#include "windmpc/metrics.hpp"

using namespace windmpc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

std::vector<int> iota_n(int n) {
    std::vector<int> I(static_cast<size_t>(n));
    std::iota(I.begin(), I.end(), 0);
    return I;
}

// A small vertical regression problem: two parties, y depends on both.
struct SmallProblem {
    std::vector<Eigen::MatrixXd> train;
    std::vector<int> party_ids{1, 2};
    Eigen::VectorXd y;
};

SmallProblem small_problem(int rows, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SmallProblem p;
    Eigen::MatrixXd a(rows, 3), b(rows, 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    p.train = {a, b};
    p.y.resize(rows);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int i = 0; i < rows; ++i)
        p.y(i) = 0.8 * a(i, 0) - 0.5 * std::abs(b(i, 1)) + 0.3 * a(i, 2) +
                 noise(rng);
    return p;
}

// Replays a trained model's per-node pipeline (gradients, re-binning,
// aggregation, prefix sums) and returns the largest absolute gap between
// each recorded split gain and its direct recomputation.
double max_gain_gap(const BoostModel& m,
                    const std::vector<Eigen::MatrixXd>& party_features,
                    const Eigen::VectorXd& y) {
    const FixedCodec codec(m.params.frac_bits);
    Eigen::VectorXd yhat = Eigen::VectorXd::Constant(y.size(), m.base_score);
    double worst = 0.0;
    for (size_t t = 0; t < m.trees.size(); ++t) {
        const GradPair gq = quantize(gradients(y, yhat, m.params.loss), codec);
        const Tree& tree = m.trees[t];
        std::vector<std::vector<int>> spaces(tree.nodes.size());
        spaces[0] = iota_n(static_cast<int>(y.size()));
        for (size_t nid = 0; nid < tree.nodes.size(); ++nid) {
            const TreeNode& node = tree.nodes[nid];
            const auto& I = spaces[nid];
            if (node.is_leaf) {
                for (int i : I) yhat(i) += m.params.eta * node.weight;
                continue;
            }
            const Eigen::MatrixXd& X =
                party_features[static_cast<size_t>(node.owner)];
            const BinFrame bf = local_binning(X, I, m.params.bins);
            const GHMatrices gh = aggregate_plain(bf, m.params.bins, gq, I);
            double G = 0.0, H = 0.0, GL = 0.0, HL = 0.0;
            for (int b = 0; b < m.params.bins; ++b) {
                G += gh.G(node.feature, b);
                H += gh.H(node.feature, b);
            }
            for (int b = 0; b < node.position; ++b) {
                GL += gh.G(node.feature, b);
                HL += gh.H(node.feature, b);
            }
            const double v = split_gain(GL, HL, G - GL, H - HL,
                                        m.params.lambda, m.params.gamma);
            worst = std::max(worst, std::abs(v - node.gain));

            const double boundary =
                m.boundaries.at(m.party_ids[static_cast<size_t>(node.owner)])
                    .at({static_cast<int>(t), static_cast<int>(nid)});
            const auto IL = sample_split(I, X.col(node.feature), boundary);
            spaces[static_cast<size_t>(node.left)] = IL;
            spaces[static_cast<size_t>(node.right)] = complement_in_order(I, IL);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("gradients: squared and logistic losses") {
    const auto same = gradients(vec({0.2, 0.7}), vec({0.2, 0.7}), Loss::squared);
    CHECK(same.g == vec({0.0, 0.0}));
    CHECK(same.h == vec({1.0, 1.0}));

    const auto sq =
        gradients(vec({1.0, 0.0}), vec({0.5, 0.5}), Loss::squared);
    CHECK(sq.g == vec({-0.5, 0.5}));
    CHECK(sq.h == vec({1.0, 1.0}));

    const auto lg = gradients(vec({0.0}), vec({0.0}), Loss::logistic);
    CHECK(lg.g(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(lg.h(0) == doctest::Approx(0.25).epsilon(1e-15));

    CHECK_THROWS_AS((void)gradients(vec({1.0}), vec({1.0, 2.0}), Loss::squared),
                    LengthError);
}

TEST_CASE("quantize rounds gradients onto the fixed-point grid") {
    const FixedCodec codec(20);
    GradPair gp;
    gp.g = vec({0.1, -0.3});
    gp.h = vec({1.0, 1.0});
    const auto q = quantize(gp, codec);
    CHECK(q.g(0) == codec.quantize(0.1));
    CHECK(q.g(0) != 0.1);  // 0.1 is not dyadic: rounding is visible
    CHECK(q.h(0) == 1.0);  // integers are exact on the grid
    CHECK(std::abs(q.g(1) - (-0.3)) <= std::ldexp(1.0, -21));
}

TEST_CASE("local binning: interpolated quantiles and assignment rule") {
    Eigen::MatrixXd X(8, 1);
    X << 1, 2, 3, 4, 5, 6, 7, 8;
    const auto bf = local_binning(X, iota_n(8), 4);
    REQUIRE(bf.boundaries.size() == 1);
    const auto& b = bf.boundaries[0];
    REQUIRE(b.size() == 3);
    CHECK(b[0] == doctest::Approx(2.75).epsilon(1e-15));
    CHECK(b[1] == doctest::Approx(4.5).epsilon(1e-15));
    CHECK(b[2] == doctest::Approx(6.25).epsilon(1e-15));
    const std::vector<int> want{0, 0, 1, 1, 2, 2, 3, 3};
    for (int i = 0; i < 8; ++i) CHECK(bf.bins(i, 0) == want[static_cast<size_t>(i)]);

    // values equal to a boundary fall in the lower bin
    CHECK(bin_of(2.75, b) == 0);
    CHECK(bin_of(2.7500001, b) == 1);
    CHECK(bin_of(0.0, b) == 0);
    CHECK(bin_of(100.0, b) == 3);
}

TEST_CASE("local binning: constant column, masking, empty sample space") {
    Eigen::MatrixXd X(5, 2);
    X.col(0).setConstant(3.0);
    X.col(1) << 1, 2, 3, 4, 5;

    const auto all = local_binning(X, iota_n(5), 4);
    CHECK(all.boundaries[0].empty());  // duplicates collapse to nothing
    for (int i = 0; i < 5; ++i) CHECK(all.bins(i, 0) == 0);

    const auto masked = local_binning(X, {1, 2}, 4);
    CHECK(masked.bins(0, 0) == -1);
    CHECK(masked.bins(0, 1) == -1);
    CHECK(masked.bins(3, 1) == -1);
    CHECK(masked.bins(4, 1) == -1);
    CHECK(masked.bins(1, 1) >= 0);
    CHECK(masked.bins(2, 1) >= 0);

    CHECK_THROWS_AS((void)local_binning(X, {}, 4), EmptySampleSpaceError);
}

TEST_CASE("one-hot expansion marks exactly one flag per in-space row") {
    Eigen::MatrixXd X(4, 2);
    X << 1, 10, 2, 20, 3, 30, 4, 40;
    const int B = 4;
    const auto bf = local_binning(X, {0, 1, 3}, B);
    const auto oh = one_hot(bf, B);
    REQUIRE(oh.rows() == 4);
    REQUIRE(oh.cols() == 2 * B);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double row_sum = oh.row(i).segment(j * B, B).sum();
            CHECK(row_sum == (i == 2 ? 0.0 : 1.0));
        }
    }
    // flag position encodes the bin index
    CHECK(oh(0, bf.bins(0, 0)) == 1.0);
    CHECK(oh(3, B + bf.bins(3, 1)) == 1.0);
}

TEST_CASE("plaintext aggregation sums gradients by bin") {
    BinFrame bf;
    bf.bins.resize(4, 1);
    bf.bins << 0, 0, 1, 1;
    bf.boundaries = {{2.5}};
    GradPair g;
    g.g = vec({1, 2, 3, 4});
    g.h = vec({0.5, 0.5, 0.5, 0.5});
    const auto gh = aggregate_plain(bf, 2, g, iota_n(4));
    CHECK(gh.G(0, 0) == 3.0);
    CHECK(gh.G(0, 1) == 7.0);
    CHECK(gh.H(0, 0) == 1.0);
    CHECK(gh.H(0, 1) == 1.0);

    // all-zero gradients aggregate to the zero matrix
    GradPair z;
    z.g = Eigen::VectorXd::Zero(4);
    z.h = Eigen::VectorXd::Zero(4);
    const auto zero = aggregate_plain(bf, 2, z, iota_n(4));
    CHECK(zero.G == Eigen::MatrixXd::Zero(1, 2));
    CHECK(zero.H == Eigen::MatrixXd::Zero(1, 2));
}

TEST_CASE("aggregation partition identity over random bins") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const int M = 60, B = 8;
    Eigen::MatrixXd X(M, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    std::vector<int> I;
    for (int i = 0; i < M; i += 2) I.push_back(i);  // a strict subset
    const auto bf = local_binning(X, I, B);
    GradPair g;
    g.g.resize(M);
    g.h.resize(M);
    for (int i = 0; i < M; ++i) {
        g.g(i) = u(rng);
        g.h(i) = 1.0;
    }
    const auto gh = aggregate_plain(bf, B, g, I);
    double gI = 0.0;
    for (int i : I) gI += g.g(i);
    for (int j = 0; j < 3; ++j) {
        CHECK(gh.G.row(j).sum() == doctest::Approx(gI).epsilon(1e-12));
        CHECK(gh.H.row(j).sum() ==
              doctest::Approx(static_cast<double>(I.size())).epsilon(1e-12));
    }
}

TEST_CASE("split scan: worked gains, negative gain, gamma dominance") {
    BoostParams p;
    p.bins = 2;

    // G=[1,1], H=[1,1], lambda=1: v = 1/2 (1/2 + 1/2 - 4/3) = -1/6 < 0
    GHMatrices even;
    even.G.resize(1, 2);
    even.G << 1, 1;
    even.H.resize(1, 2);
    even.H << 1, 1;
    p.lambda = 1.0;
    p.gamma = 0.0;
    CHECK(!scan_best_split({even}, p).has_value());
    CHECK(split_gain(1, 1, 1, 1, 1.0, 0.0) ==
          doctest::Approx(-1.0 / 6.0).epsilon(1e-15));

    // G=[2,-2], H=[1,1], lambda=0: v = 1/2 (4 + 4 - 0) = 4
    GHMatrices split;
    split.G.resize(1, 2);
    split.G << 2, -2;
    split.H.resize(1, 2);
    split.H << 1, 1;
    p.lambda = 0.0;
    const auto choice = scan_best_split({split}, p);
    REQUIRE(choice.has_value());
    CHECK(choice->party == 0);
    CHECK(choice->feature == 0);
    CHECK(choice->position == 1);
    CHECK(choice->gain == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(split_gain(2, 1, -2, 1, 0.0, 0.0) == doctest::Approx(4.0));

    p.gamma = 5.0;  // larger than any attainable gain
    CHECK(!scan_best_split({split}, p).has_value());
}

TEST_CASE("split scan: lexicographic ties and empty-side guard") {
    BoostParams p;
    p.bins = 2;
    p.lambda = 0.0;
    p.gamma = 0.0;
    GHMatrices a;
    a.G.resize(1, 2);
    a.G << 2, -2;
    a.H.resize(1, 2);
    a.H << 1, 1;
    // identical gain on both parties: the first party wins the tie
    const auto tie = scan_best_split({a, a}, p);
    REQUIRE(tie.has_value());
    CHECK(tie->party == 0);

    // an empty side (H mass 0) is never chosen even with positive gain
    GHMatrices lop;
    lop.G.resize(1, 2);
    lop.G << 3, 0;
    lop.H.resize(1, 2);
    lop.H << 2, 0;
    CHECK(!scan_best_split({lop}, p).has_value());
}

TEST_CASE("leaf weight formula and limits") {
    CHECK(leaf_weight(2.0, 2.0, 1.0) == doctest::Approx(-2.0 / 3.0));
    CHECK(leaf_weight(0.0, 5.0, 1.0) == 0.0);
    CHECK(leaf_weight(0.0, 0.0, 0.0) == 0.0);  // empty-leaf guard
    double prev = std::abs(leaf_weight(3.0, 1.0, 0.0));
    for (double lam : {1.0, 10.0, 100.0, 1e6}) {
        const double cur = std::abs(leaf_weight(3.0, 1.0, lam));
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(prev < 1e-5);
}

TEST_CASE("owner-side sample split and ordered complement") {
    Eigen::VectorXd x = vec({1, 2, 3, 4});
    const auto IL = sample_split({0, 1, 2, 3}, x, 2.0);
    CHECK(IL == std::vector<int>{0, 1});  // x <= boundary goes left
    CHECK(complement_in_order({0, 1, 2, 3}, IL) == std::vector<int>{2, 3});

    CHECK(sample_split({0, 1, 2, 3}, x, 0.5).empty());
    const auto all = sample_split({0, 1, 2, 3}, x, 9.0);
    CHECK(all == std::vector<int>{0, 1, 2, 3});
    CHECK(complement_in_order({0, 1, 2, 3}, all).empty());

    // partition: union preserves I, intersection empty
    const auto left = sample_split({3, 1, 0}, x, 2.0);
    const auto right = complement_in_order({3, 1, 0}, left);
    CHECK(left == std::vector<int>{1, 0});
    CHECK(right == std::vector<int>{3});
}

TEST_CASE("single-leaf model: T=1, D=1") {
    const auto p = small_problem(30, 17);
    BoostParams params;
    params.trees = 1;
    params.depth = 1;
    params.bins = 4;
    const auto m = oracle_train(p.train, p.party_ids, p.y, params);
    REQUIRE(m.trees.size() == 1);
    REQUIRE(m.trees[0].nodes.size() == 1);
    CHECK(m.trees[0].nodes[0].is_leaf);

    const FixedCodec codec(params.frac_bits);
    const auto gq = quantize(
        gradients(p.y, Eigen::VectorXd::Constant(p.y.size(), m.base_score),
                  Loss::squared),
        codec);
    CHECK(m.trees[0].nodes[0].weight ==
          doctest::Approx(leaf_weight(gq.g.sum(), gq.h.sum(), params.lambda))
              .epsilon(1e-15));
    CHECK(m.base_score == p.y.mean());

    // constant prediction everywhere
    const auto pred = oracle_predict(m, p.train);
    for (Eigen::Index i = 1; i < pred.size(); ++i) CHECK(pred(i) == pred(0));
}

TEST_CASE("training RMSE is non-increasing in tree count") {
    const auto p = small_problem(120, 23);
    double prev = std::numeric_limits<double>::infinity();
    for (int T : {1, 2, 4, 8}) {
        BoostParams params;
        params.trees = T;
        params.depth = 3;
        params.bins = 8;
        const auto m = oracle_train(p.train, p.party_ids, p.y, params);
        const auto pred = oracle_predict(m, p.train);
        const double r = rmse(p.y, pred);
        CHECK(r <= prev + 1e-9);
        prev = r;
    }
    CHECK(prev < 100.0);
}

TEST_CASE("recorded split gains match direct recomputation") {
    const auto p = small_problem(150, 31);
    BoostParams params;
    params.trees = 6;
    params.depth = 3;
    params.bins = 8;
    const auto m = oracle_train(p.train, p.party_ids, p.y, params);
    REQUIRE(!split_records(m).empty());
    CHECK(max_gain_gap(m, p.train, p.y) <= 1e-12);
}

TEST_CASE("model save/load round-trips bit-exactly") {
    const auto p = small_problem(80, 41);
    BoostParams params;
    params.trees = 3;
    params.depth = 3;
    params.bins = 8;
    params.gamma = 0.01;
    const auto m = oracle_train(p.train, p.party_ids, p.y, params);

    const std::string path = "model_roundtrip.bin";
    save_model(m, path);
    const auto r = load_model(path);
    std::remove(path.c_str());

    CHECK(r.base_score == m.base_score);
    CHECK(r.params.trees == m.params.trees);
    CHECK(r.params.gamma == m.params.gamma);
    CHECK(r.party_ids == m.party_ids);
    REQUIRE(r.trees.size() == m.trees.size());
    for (size_t t = 0; t < m.trees.size(); ++t) {
        REQUIRE(r.trees[t].nodes.size() == m.trees[t].nodes.size());
        for (size_t n = 0; n < m.trees[t].nodes.size(); ++n) {
            const auto& a = m.trees[t].nodes[n];
            const auto& b = r.trees[t].nodes[n];
            CHECK(a.is_leaf == b.is_leaf);
            CHECK(a.owner == b.owner);
            CHECK(a.feature == b.feature);
            CHECK(a.position == b.position);
            CHECK(a.left == b.left);
            CHECK(a.right == b.right);
            CHECK(a.gain == b.gain);
            CHECK(a.weight == b.weight);
        }
    }
    CHECK(r.boundaries == m.boundaries);

    const auto pred_a = oracle_predict(m, p.train);
    const auto pred_b = oracle_predict(r, p.train);
    CHECK(pred_a == pred_b);

    CHECK(model_to_json(m).find("\"trees\"") != std::string::npos);
    CHECK_THROWS_AS((void)load_model("does_not_exist.bin"), FormatError);
}

TEST_CASE("deterministic retrain produces an identical model") {
    const auto p = small_problem(100, 53);
    BoostParams params;
    params.trees = 4;
    params.depth = 3;
    params.bins = 8;
    const auto a = oracle_train(p.train, p.party_ids, p.y, params);
    const auto b = oracle_train(p.train, p.party_ids, p.y, params);
    const auto ra = split_records(a);
    const auto rb = split_records(b);
    REQUIRE(ra.size() == rb.size());
    for (size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].node == rb[i].node);
        CHECK(ra[i].party == rb[i].party);
        CHECK(ra[i].feature == rb[i].feature);
        CHECK(ra[i].position == rb[i].position);
        CHECK(ra[i].gain == rb[i].gain);
    }
    CHECK(oracle_predict(a, p.train) == oracle_predict(b, p.train));
}

TEST_CASE("secure eq_flags aggregation equals the one-hot path") {
    const auto p = small_problem(36, 61);
    BoostParams params;
    params.trees = 2;
    params.depth = 2;
    params.bins = 4;

    PartyTopology topo;
    topo.active = 1;
    topo.passives = {2};
    topo.servers = {101, 102, 103};

    const auto oh = secure_train_run(topo, p.train, p.train, p.y, params, 99,
                                     AggMode::one_hot);
    const auto eq = secure_train_run(topo, p.train, p.train, p.y, params, 99,
                                     AggMode::eq_flags);

    const auto ra = split_records(oh.model);
    const auto rb = split_records(eq.model);
    REQUIRE(!ra.empty());
    REQUIRE(ra.size() == rb.size());
    for (size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].tree == rb[i].tree);
        CHECK(ra[i].node == rb[i].node);
        CHECK(ra[i].party == rb[i].party);
        CHECK(ra[i].feature == rb[i].feature);
        CHECK(ra[i].position == rb[i].position);
        CHECK(ra[i].gain == rb[i].gain);
    }
    CHECK(oh.train_predictions == eq.train_predictions);
}
