#include "windmpc/boost_train.hpp"

#include <chrono>
#include <cstring>
#include <mutex>
#include <ostream>
#include <thread>

namespace windmpc {

namespace {

enum : uint8_t {
    kOpShutdown = 0,
    kOpTreeBegin = 1,
    kOpNodeAggregate = 2,
    kOpSplitRequest = 3,
    kOpPredictBits = 5,
};

constexpr uint32_t kGradTensor = 0;
constexpr uint32_t kFlagTensorBase = 16;    // + provider ordinal
constexpr uint32_t kResultTensorBase = 64;  // + provider ordinal

// Serve loops sit idle while the active party computes; keep their command
// timeout well above any single local step.
constexpr std::chrono::milliseconds kCommandTimeout{120000};

uint64_t tree_session(int tree) {
    return static_cast<uint64_t>(tree) * kSessionsPerTree;
}
uint64_t node_session(int tree, int node) {
    return static_cast<uint64_t>(tree) * kSessionsPerTree + 1 +
           static_cast<uint64_t>(node);
}

RecvMatch match_kind(FrameKind k) {
    RecvMatch m;
    m.kind = static_cast<uint8_t>(k);
    return m;
}

Frame make_frame(FrameKind kind, uint64_t session,
                 std::vector<uint8_t> payload) {
    Frame f;
    f.session_id = session;
    f.kind = static_cast<uint8_t>(kind);
    f.payload = std::move(payload);
    return f;
}

void put_index_list(ByteWriter& w, const std::vector<int>& I) {
    w.put_u32(static_cast<uint32_t>(I.size()));
    for (int i : I) w.put_u32(static_cast<uint32_t>(i));
}

std::vector<int> get_index_list(ByteReader& r) {
    uint32_t n = r.get_u32();
    std::vector<int> I(n);
    for (uint32_t i = 0; i < n; ++i) I[i] = static_cast<int>(r.get_u32());
    return I;
}

std::vector<uint8_t> double_bytes(const Eigen::VectorXd& v) {
    std::vector<uint8_t> out(static_cast<size_t>(v.size()) * 8);
    std::memcpy(out.data(), v.data(), out.size());
    return out;
}

std::vector<int> others(const PartyTopology& topo, int me) {
    std::vector<int> out;
    for (int p : topo.all_parties())
        if (p != me) out.push_back(p);
    return out;
}

}  // namespace

void register_feature_audit(AuditSink& audit, const PartyTopology& topo,
                            int party_id, const Eigen::MatrixXd& X) {
    const std::vector<int> forbidden = others(topo, party_id);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        Eigen::VectorXd col = X.col(j);
        audit.register_sensitive(
            "features:" + std::to_string(party_id) + ":" + std::to_string(j),
            double_bytes(col), forbidden);
    }
}

// ---- active party ----------------------------------------------------------------

BoostModel train_active(Endpoint& ep, const PartyTopology& topo,
                        const Eigen::MatrixXd& X_active,
                        const Eigen::VectorXd& y, const BoostParams& params,
                        uint64_t master_seed, AggMode mode, AuditSink* audit,
                        std::ostream* depth_log) {
    params.validate();
    topo.validate();
    (void)mode;  // the active side is mode-agnostic: servers do the deriving
    const Eigen::Index M = y.size();
    if (M == 0) throw LengthError("empty training set");
    if (X_active.rows() != M)
        throw ShapeError("active feature/label row mismatch");

    const FixedCodec codec(params.frac_bits);
    std::vector<int> party_ids{topo.active};
    for (int p : topo.passives) party_ids.push_back(p);

    if (audit)
        audit->register_sensitive("labels", double_bytes(y),
                                  others(topo, topo.active));

    BoostModel model;
    model.params = params;
    model.party_ids = party_ids;
    model.base_score = y.mean();

    std::map<std::pair<int, int>, BinFrame> own_frames;
    const GradPair* cur_gq = nullptr;

    NodeBackend backend;
    backend.aggregate = [&](const std::vector<int>& I, int tree,
                            int node) -> std::vector<GHMatrices> {
        const uint64_t session = node_session(tree, node);
        ByteWriter w;
        w.put_u8(kOpNodeAggregate);
        w.put_u32(static_cast<uint32_t>(tree));
        w.put_u32(static_cast<uint32_t>(node));
        put_index_list(w, I);
        for (int p : topo.passives)
            ep.send(p, make_frame(FrameKind::command, session, w.bytes));
        for (int s : topo.servers)
            ep.send(s, make_frame(FrameKind::command, session, w.bytes));

        // The active party's own block runs in plaintext: it already holds
        // both its features and the gradients.
        BinFrame bf = local_binning(X_active, I, params.bins);
        std::vector<GHMatrices> gh;
        gh.push_back(aggregate_plain(bf, params.bins, *cur_gq, I));
        own_frames[{tree, node}] = std::move(bf);

        const int B = params.bins;
        for (size_t k = 1; k < party_ids.size(); ++k) {
            RingMatrix R = collect_reveal(
                ep, topo, session, kResultTensorBase + static_cast<uint32_t>(k));
            if (R.cols() != 2 || R.rows() % B != 0)
                throw ShapeError("aggregated share has unexpected shape");
            Eigen::MatrixXd D = codec.decode(R);
            const Eigen::Index nf = R.rows() / B;
            GHMatrices m2;
            m2.G.resize(nf, B);
            m2.H.resize(nf, B);
            for (Eigen::Index j = 0; j < nf; ++j)
                for (int b = 0; b < B; ++b) {
                    m2.G(j, b) = D(j * B + b, 0);
                    m2.H(j, b) = D(j * B + b, 1);
                }
            gh.push_back(std::move(m2));
        }
        return gh;
    };
    backend.partition_left = [&](const SplitChoice& c, const std::vector<int>& I,
                                 int tree, int node) -> std::vector<int> {
        if (c.party == 0) {
            auto it = own_frames.find({tree, node});
            if (it == own_frames.end())
                throw InconsistencyError("partition before aggregation");
            const auto& bounds = it->second.boundaries[c.feature];
            if (c.position < 1 || c.position > static_cast<int>(bounds.size()))
                throw MissingBoundaryError("split position has no boundary");
            const double b = bounds[c.position - 1];
            model.boundaries[party_ids[0]][{tree, node}] = b;
            return sample_split(I, X_active.col(c.feature), b);
        }
        const int owner = party_ids[c.party];
        ByteWriter w;
        w.put_u8(kOpSplitRequest);
        w.put_u32(static_cast<uint32_t>(tree));
        w.put_u32(static_cast<uint32_t>(node));
        w.put_u32(static_cast<uint32_t>(c.feature));
        w.put_u32(static_cast<uint32_t>(c.position));
        put_index_list(w, I);
        ep.send(owner, make_frame(FrameKind::command, node_session(tree, node),
                                  std::move(w.bytes)));
        Frame reply = ep.recv(owner, match_kind(FrameKind::bits));
        ByteReader r(reply.payload);
        std::vector<int> IL = get_index_list(r);
        if (!r.done()) throw FormatError("trailing bytes in split reply");
        return IL;
    };

    Eigen::VectorXd yhat = Eigen::VectorXd::Constant(M, model.base_score);
    for (int t = 0; t < params.trees; ++t) {
        GradPair gq = quantize(gradients(y, yhat, params.loss), codec);
        cur_gq = &gq;
        if (audit) {
            const std::vector<int> forbidden = others(topo, topo.active);
            audit->register_sensitive("grad-g:" + std::to_string(t),
                                      double_bytes(gq.g), forbidden);
            audit->register_sensitive("grad-h:" + std::to_string(t),
                                      double_bytes(gq.h), forbidden);
        }

        ByteWriter w;
        w.put_u8(kOpTreeBegin);
        w.put_u32(static_cast<uint32_t>(t));
        for (int s : topo.servers)
            ep.send(s, make_frame(FrameKind::command, tree_session(t), w.bytes));

        Eigen::MatrixXd ghm(M, 2);
        ghm.col(0) = gq.g;
        ghm.col(1) = gq.h;
        std::mt19937_64 rng(
            derive_seed(master_seed, "grad-deal-" + std::to_string(t)));
        deal_to_servers(ep, topo, tree_session(t), 0, kGradTensor,
                        codec.encode(ghm), rng);

        own_frames.clear();
        TreeGrowth growth = grow_tree(backend, gq, params, t, depth_log);
        model.trees.push_back(std::move(growth.tree));
        for (size_t l = 0; l < growth.leaf_samples.size(); ++l)
            for (int i : growth.leaf_samples[l])
                yhat(i) += params.eta * growth.leaf_weights[l];
    }
    return model;
}

Eigen::VectorXd predict_active(Endpoint& ep, const PartyTopology& topo,
                               const BoostModel& m,
                               const Eigen::MatrixXd& X_active_test) {
    const Eigen::Index rows = X_active_test.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Constant(rows, m.base_score);
    for (size_t t = 0; t < m.trees.size(); ++t) {
        const Tree& tree = m.trees[t];
        std::vector<int> cur(static_cast<size_t>(rows), 0);
        for (;;) {
            // Batch rows by the internal node they sit at, one owner
            // round-trip per node instead of per row.
            std::map<int, std::vector<int>> groups;
            for (Eigen::Index r = 0; r < rows; ++r)
                if (!tree.nodes[cur[r]].is_leaf)
                    groups[cur[r]].push_back(static_cast<int>(r));
            if (groups.empty()) break;
            for (const auto& [node_id, at_node] : groups) {
                const TreeNode& nd = tree.nodes[node_id];
                const int owner = m.party_ids[nd.owner];
                std::vector<uint8_t> bits(at_node.size());
                if (owner == topo.active) {
                    auto store = m.boundaries.find(owner);
                    if (store == m.boundaries.end())
                        throw MissingBoundaryError("no boundary store for owner");
                    auto it = store->second.find({static_cast<int>(t), node_id});
                    if (it == store->second.end())
                        throw MissingBoundaryError("split boundary not stored");
                    for (size_t i = 0; i < at_node.size(); ++i)
                        bits[i] = X_active_test(at_node[i], nd.feature) <=
                                          it->second
                                      ? 1
                                      : 0;
                } else {
                    ByteWriter w;
                    w.put_u8(kOpPredictBits);
                    w.put_u32(static_cast<uint32_t>(t));
                    w.put_u32(static_cast<uint32_t>(node_id));
                    w.put_u32(static_cast<uint32_t>(nd.feature));
                    put_index_list(w, at_node);
                    ep.send(owner,
                            make_frame(FrameKind::command,
                                       node_session(static_cast<int>(t), node_id),
                                       std::move(w.bytes)));
                    Frame reply = ep.recv(owner, match_kind(FrameKind::bits));
                    ByteReader r(reply.payload);
                    uint32_t n = r.get_u32();
                    if (n != at_node.size())
                        throw ProtocolError("direction-bit count mismatch");
                    for (uint32_t i = 0; i < n; ++i) bits[i] = r.get_u8();
                }
                for (size_t i = 0; i < at_node.size(); ++i)
                    cur[at_node[i]] = bits[i] ? nd.left : nd.right;
            }
        }
        for (Eigen::Index r = 0; r < rows; ++r)
            out(r) += m.params.eta * tree.nodes[cur[r]].weight;
    }
    return out;
}

void end_mesh_session(Endpoint& ep, const PartyTopology& topo) {
    ByteWriter w;
    w.put_u8(kOpShutdown);
    for (int p : topo.passives)
        ep.send(p, make_frame(FrameKind::command, 0, w.bytes));
    for (int s : topo.servers)
        ep.send(s, make_frame(FrameKind::command, 0, w.bytes));
}

// ---- passive party ----------------------------------------------------------------

BoundaryStore serve_passive(Endpoint& ep, const PartyTopology& topo,
                            const Eigen::MatrixXd& X_train,
                            const Eigen::MatrixXd& X_test,
                            const BoostParams& params, uint64_t master_seed,
                            AggMode mode) {
    params.validate();
    topo.validate();
    int ord = -1;
    for (size_t i = 0; i < topo.passives.size(); ++i)
        if (topo.passives[i] == ep.id()) ord = static_cast<int>(i) + 1;
    if (ord < 0) throw ConfigError("party is not a passive provider");

    std::map<std::pair<int, int>, std::vector<std::vector<double>>>
        bounds_cache;
    BoundaryStore store;

    for (;;) {
        Frame f = ep.recv(topo.active, match_kind(FrameKind::command),
                          kCommandTimeout);
        ByteReader r(f.payload);
        const uint8_t op = r.get_u8();
        switch (op) {
            case kOpShutdown:
                return store;
            case kOpNodeAggregate: {
                const int tree = static_cast<int>(r.get_u32());
                const int node = static_cast<int>(r.get_u32());
                std::vector<int> I = get_index_list(r);
                BinFrame bf = local_binning(X_train, I, params.bins);
                bounds_cache[{tree, node}] = bf.boundaries;
                RingMatrix flags;
                if (mode == AggMode::one_hot) {
                    // 0/1 ring words, unscaled: flag-gradient products then
                    // carry the gradients' scale with no truncation.
                    flags = one_hot(bf, params.bins).cast<uint64_t>();
                } else {
                    // Raw bin indices; -1 (outside I) becomes a word no bin
                    // index in [0, B) ever equals.
                    flags = bf.bins.array().cast<int64_t>().cast<uint64_t>();
                }
                std::mt19937_64 rng(derive_seed(
                    master_seed, "flag-deal-" + std::to_string(ep.id()) + "-" +
                                     std::to_string(tree) + "-" +
                                     std::to_string(node)));
                deal_to_servers(ep, topo, node_session(tree, node), 0,
                                kFlagTensorBase + static_cast<uint32_t>(ord),
                                flags, rng);
                break;
            }
            case kOpSplitRequest: {
                const int tree = static_cast<int>(r.get_u32());
                const int node = static_cast<int>(r.get_u32());
                const int feature = static_cast<int>(r.get_u32());
                const int position = static_cast<int>(r.get_u32());
                std::vector<int> I = get_index_list(r);
                auto it = bounds_cache.find({tree, node});
                if (it == bounds_cache.end())
                    throw MissingBoundaryError("split request before binning");
                if (feature < 0 ||
                    feature >= static_cast<int>(it->second.size()))
                    throw ShapeError("split feature out of range");
                const auto& bounds = it->second[feature];
                if (position < 1 || position > static_cast<int>(bounds.size()))
                    throw MissingBoundaryError("split position has no boundary");
                const double b = bounds[position - 1];
                store[{tree, node}] = b;
                std::vector<int> IL = sample_split(I, X_train.col(feature), b);
                ByteWriter w;
                put_index_list(w, IL);
                ep.send(topo.active, make_frame(FrameKind::bits, f.session_id,
                                                std::move(w.bytes)));
                break;
            }
            case kOpPredictBits: {
                const int tree = static_cast<int>(r.get_u32());
                const int node = static_cast<int>(r.get_u32());
                const int feature = static_cast<int>(r.get_u32());
                std::vector<int> at_rows = get_index_list(r);
                auto it = store.find({tree, node});
                if (it == store.end())
                    throw MissingBoundaryError("prediction for unknown split");
                ByteWriter w;
                w.put_u32(static_cast<uint32_t>(at_rows.size()));
                for (int row : at_rows) {
                    if (row < 0 || row >= X_test.rows())
                        throw ShapeError("prediction row out of range");
                    w.put_u8(X_test(row, feature) <= it->second ? 1 : 0);
                }
                ep.send(topo.active, make_frame(FrameKind::bits, f.session_id,
                                                std::move(w.bytes)));
                break;
            }
            default:
                throw ProtocolError("unexpected opcode on passive party");
        }
    }
}

// ---- compute server ----------------------------------------------------------------

void serve_server(Endpoint& ep, const PartyTopology& topo, int server_index,
                  const BoostParams& params, uint64_t master_seed,
                  AggMode mode) {
    params.validate();
    topo.validate();
    ShareTensor gh;  // current tree's gradient share
    const int B = params.bins;

    for (;;) {
        Frame f = ep.recv(topo.active, match_kind(FrameKind::command),
                          kCommandTimeout);
        ByteReader r(f.payload);
        const uint8_t op = r.get_u8();
        switch (op) {
            case kOpShutdown:
                return;
            case kOpTreeBegin: {
                const int tree = static_cast<int>(r.get_u32());
                gh = recv_dealt_share(ep, topo.active, tree_session(tree),
                                      kGradTensor);
                break;
            }
            case kOpNodeAggregate: {
                const int tree = static_cast<int>(r.get_u32());
                const int node = static_cast<int>(r.get_u32());
                (void)get_index_list(r);  // sample space is the parties' concern
                if (gh.rows() == 0)
                    throw ProtocolError("node aggregation before gradient deal");
                SecureContext ctx(ep, topo, server_index, master_seed,
                                  node_session(tree, node), params.frac_bits);
                for (size_t k = 0; k < topo.passives.size(); ++k) {
                    ShareTensor dealt = ctx.input_from(
                        topo.passives[k],
                        kFlagTensorBase + static_cast<uint32_t>(k) + 1);
                    ShareTensor E;
                    if (mode == AggMode::one_hot) {
                        E = std::move(dealt);
                    } else {
                        // Derive the one-hot flags from shared bin indices
                        // with equality circuits (the generic path).
                        const Eigen::Index M = dealt.rows();
                        const Eigen::Index nf = dealt.cols();
                        E = ShareTensor(M, nf * B);
                        for (Eigen::Index j = 0; j < nf; ++j) {
                            ShareTensor col(M, 1);
                            col.own.col(0) = dealt.own.col(j);
                            col.next.col(0) = dealt.next.col(j);
                            for (int b = 0; b < B; ++b) {
                                ShareTensor flag = ctx.sec_eq_const(
                                    col, static_cast<uint64_t>(b));
                                E.own.col(j * B + b) = flag.own.col(0);
                                E.next.col(j * B + b) = flag.next.col(0);
                            }
                        }
                    }
                    ShareTensor Et(E.cols(), E.rows());
                    Et.own = E.own.transpose();
                    Et.next = E.next.transpose();
                    ShareTensor z = ctx.sec_matmul_untruncated(Et, gh);
                    ctx.reveal_to(topo.active, z,
                                  kResultTensorBase + static_cast<uint32_t>(k) +
                                      1);
                }
                break;
            }
            default:
                throw ProtocolError("unexpected opcode on compute server");
        }
    }
}

// ---- in-process harness --------------------------------------------------------------

SecureRun secure_train_run(const PartyTopology& topo,
                           const std::vector<Eigen::MatrixXd>& party_train,
                           const std::vector<Eigen::MatrixXd>& party_test,
                           const Eigen::VectorXd& y, const BoostParams& params,
                           uint64_t master_seed, AggMode mode, AuditSink* audit,
                           std::ostream* depth_log) {
    topo.validate();
    const size_t m = static_cast<size_t>(topo.m());
    if (party_train.size() != m || party_test.size() != m)
        throw ShapeError("need one train+test frame per provider party");
    for (int p : {topo.servers[0], topo.servers[1], topo.servers[2]})
        if (topo.is_provider(p))
            throw ConfigError(
                "in-process harness requires standalone compute servers");

    std::vector<int> party_ids{topo.active};
    for (int p : topo.passives) party_ids.push_back(p);
    if (audit)
        for (size_t k = 0; k < m; ++k) {
            register_feature_audit(*audit, topo, party_ids[k], party_train[k]);
            register_feature_audit(*audit, topo, party_ids[k], party_test[k]);
        }

    LocalMesh mesh(topo, audit);
    SecureRun run;
    std::mutex store_mu;
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto capture = [&](std::exception_ptr e) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = e;
    };

    std::vector<std::thread> threads;
    threads.emplace_back([&] {
        Endpoint& ep = mesh.endpoint(topo.active);
        try {
            mesh.phase_begin("train");
            run.model = train_active(ep, topo, party_train[0], y, params,
                                     master_seed, mode, audit, depth_log);
            mesh.phase_end("train");
            mesh.phase_begin("predict");
            run.train_predictions =
                predict_active(ep, topo, run.model, party_test[0]);
            mesh.phase_end("predict");
        } catch (...) {
            capture(std::current_exception());
        }
        // Always release the serve loops, even after a failure.
        try {
            end_mesh_session(ep, topo);
        } catch (...) {
        }
    });
    for (size_t k = 0; k < topo.passives.size(); ++k) {
        threads.emplace_back([&, k] {
            const int id = topo.passives[k];
            try {
                BoundaryStore store =
                    serve_passive(mesh.endpoint(id), topo, party_train[k + 1],
                                  party_test[k + 1], params, master_seed, mode);
                std::lock_guard lock(store_mu);
                run.passive_stores[id] = std::move(store);
            } catch (...) {
                capture(std::current_exception());
            }
        });
    }
    for (int i = 0; i < 3; ++i) {
        threads.emplace_back([&, i] {
            try {
                serve_server(mesh.endpoint(topo.servers[i]), topo, i, params,
                             master_seed, mode);
            } catch (...) {
                capture(std::current_exception());
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);

    // Single-process convenience: fold the passive stores into the returned
    // model so it is self-contained for oracle comparisons. In a real
    // deployment each store stays on its owner.
    for (const auto& [id, store] : run.passive_stores)
        run.model.boundaries[id] = store;
    run.metrics = mesh.snapshot();
    return run;
}

SecureRun secure_train_run_tcp(const PartyTopology& topo,
                               const std::vector<Eigen::MatrixXd>& party_train,
                               const std::vector<Eigen::MatrixXd>& party_test,
                               const Eigen::VectorXd& y,
                               const BoostParams& params, uint64_t master_seed,
                               AggMode mode, const std::string& host) {
    topo.validate();
    const size_t m = static_cast<size_t>(topo.m());
    if (party_train.size() != m || party_test.size() != m)
        throw ShapeError("need one train+test frame per provider party");
    for (int p : {topo.servers[0], topo.servers[1], topo.servers[2]})
        if (topo.is_provider(p))
            throw ConfigError(
                "in-process harness requires standalone compute servers");

    const std::vector<int> ids = topo.all_parties();
    const std::vector<uint16_t> ports = free_loopback_ports(ids.size());
    std::map<int, TcpAddress> addrs;
    for (size_t i = 0; i < ids.size(); ++i)
        addrs[ids[i]] = TcpAddress{host, ports[i]};

    SecureRun run;
    std::mutex merge_mu;  // guards passive_stores and metrics merging
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto capture = [&](std::exception_ptr e) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = e;
    };
    auto merge_metrics = [&](const MeshMetrics& snap, int self) {
        std::lock_guard lock(merge_mu);
        for (const auto& [link, st] : snap.links)
            if (link.first == self) run.metrics.links[link] = st;
        for (const auto& [sid, r] : snap.session_rounds) {
            auto& cur = run.metrics.session_rounds[sid];
            cur = std::max(cur, r);
        }
    };

    using Clock = std::chrono::steady_clock;
    std::vector<std::thread> threads;
    threads.emplace_back([&] {
        try {
            TcpEndpoint ep(topo, topo.active, addrs);
            try {
                const auto t0 = Clock::now();
                run.model = train_active(ep, topo, party_train[0], y, params,
                                         master_seed, mode);
                const auto t1 = Clock::now();
                run.train_predictions =
                    predict_active(ep, topo, run.model, party_test[0]);
                const auto t2 = Clock::now();
                run.metrics.phase_seconds["train"] =
                    std::chrono::duration<double>(t1 - t0).count();
                run.metrics.phase_seconds["predict"] =
                    std::chrono::duration<double>(t2 - t1).count();
            } catch (...) {
                capture(std::current_exception());
            }
            try {
                end_mesh_session(ep, topo);
            } catch (...) {
            }
            merge_metrics(ep.snapshot(), topo.active);
        } catch (...) {
            capture(std::current_exception());
        }
    });
    for (size_t k = 0; k < topo.passives.size(); ++k) {
        threads.emplace_back([&, k] {
            const int id = topo.passives[k];
            try {
                TcpEndpoint ep(topo, id, addrs);
                BoundaryStore store =
                    serve_passive(ep, topo, party_train[k + 1],
                                  party_test[k + 1], params, master_seed, mode);
                merge_metrics(ep.snapshot(), id);
                std::lock_guard lock(merge_mu);
                run.passive_stores[id] = std::move(store);
            } catch (...) {
                capture(std::current_exception());
            }
        });
    }
    for (int i = 0; i < 3; ++i) {
        threads.emplace_back([&, i] {
            try {
                TcpEndpoint ep(topo, topo.servers[i], addrs);
                serve_server(ep, topo, i, params, master_seed, mode);
                merge_metrics(ep.snapshot(), topo.servers[i]);
            } catch (...) {
                capture(std::current_exception());
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);

    for (const auto& [id, store] : run.passive_stores)
        run.model.boundaries[id] = store;
    return run;
}

}  // namespace windmpc
