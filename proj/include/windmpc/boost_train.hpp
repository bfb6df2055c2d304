#pragma once

#include <iosfwd>

#include "windmpc/boost_core.hpp"
#include "windmpc/net.hpp"
#include "windmpc/secure_ops.hpp"

namespace windmpc {

// How [flag] values reach the servers: parties deal one-hot expansions of
// their bin frames directly (value-identical, no equality circuits), or
// parties deal raw bin indices and servers derive the flags with
// sec_eq_const (the generic path, kept for protocol-level fidelity tests).
enum class AggMode { one_hot, eq_flags };

// Session-id layout: tree t uses session t*kSessionsPerTree for the gradient
// deal and t*kSessionsPerTree + 1 + node_id for each node's aggregation.
constexpr uint64_t kSessionsPerTree = 1024;

// ---- party programs --------------------------------------------------------------
//
// One mesh run hosts training and any number of prediction batches. The
// active party drives; passives and servers loop on command frames until the
// active party sends shutdown. Every party gets the same params, topology
// and master seed out-of-band (config), so only data-dependent content
// crosses the wire.

// Active party: computes gradients in plaintext, deals their shares, walks
// the shared tree-growth skeleton with mesh-backed aggregation/partition,
// and keeps the tree structure plus its own boundary store. If `audit` is
// given, label and per-tree gradient byte patterns are registered as
// sensitive with every other party forbidden. `depth_log`, when set,
// receives one wall-clock row per (tree, depth).
BoostModel train_active(Endpoint& ep, const PartyTopology& topo,
                        const Eigen::MatrixXd& X_active,
                        const Eigen::VectorXd& y, const BoostParams& params,
                        uint64_t master_seed, AggMode mode = AggMode::one_hot,
                        AuditSink* audit = nullptr,
                        std::ostream* depth_log = nullptr);

// Vertical inference: walks every tree level by level, asking each split's
// owner for batched direction bits (one plaintext comparison per row on the
// owner). Rows index into the aligned test frames all parties hold.
Eigen::VectorXd predict_active(Endpoint& ep, const PartyTopology& topo,
                               const BoostModel& m,
                               const Eigen::MatrixXd& X_active_test);

// Releases passives and servers from their serve loops.
void end_mesh_session(Endpoint& ep, const PartyTopology& topo);

// Passive party: serves binning/one-hot dealing, owner-side splits, and
// prediction direction bits until shutdown. Returns its boundary store.
BoundaryStore serve_passive(Endpoint& ep, const PartyTopology& topo,
                            const Eigen::MatrixXd& X_train,
                            const Eigen::MatrixXd& X_test,
                            const BoostParams& params, uint64_t master_seed,
                            AggMode mode = AggMode::one_hot);

// Compute server: receives gradient and flag shares, runs the shared
// aggregation inner product per node, reveals results to the active party.
void serve_server(Endpoint& ep, const PartyTopology& topo, int server_index,
                  const BoostParams& params, uint64_t master_seed,
                  AggMode mode = AggMode::one_hot);

// Registers one party's plaintext feature columns as audit-sensitive, with
// every other party id forbidden from ever receiving them.
void register_feature_audit(AuditSink& audit, const PartyTopology& topo,
                            int party_id, const Eigen::MatrixXd& X);

// ---- in-process convenience harness ----------------------------------------------

struct SecureRun {
    BoostModel model;                      // structure + active's boundaries
    std::map<int, BoundaryStore> passive_stores;
    Eigen::VectorXd train_predictions;     // on X_test frames passed in
    MeshMetrics metrics;
};

// Runs a full secure training (and prediction over the test frames) with
// all parties as threads over a LocalMesh. party_features/test frames are
// ordered [active, passives...] to match topo.
SecureRun secure_train_run(const PartyTopology& topo,
                           const std::vector<Eigen::MatrixXd>& party_train,
                           const std::vector<Eigen::MatrixXd>& party_test,
                           const Eigen::VectorXd& y, const BoostParams& params,
                           uint64_t master_seed,
                           AggMode mode = AggMode::one_hot,
                           AuditSink* audit = nullptr,
                           std::ostream* depth_log = nullptr);

// Same run with every party as a thread behind its own loopback TCP
// endpoint (real sockets, length-prefixed frames). Phase timings cover the
// active party's wall clock; link stats merge each sender's view.
SecureRun secure_train_run_tcp(const PartyTopology& topo,
                               const std::vector<Eigen::MatrixXd>& party_train,
                               const std::vector<Eigen::MatrixXd>& party_test,
                               const Eigen::VectorXd& y,
                               const BoostParams& params, uint64_t master_seed,
                               AggMode mode = AggMode::one_hot,
                               const std::string& host = "127.0.0.1");

}  // namespace windmpc
