#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "windmpc/errors.hpp"
#include "windmpc/ring.hpp"

namespace windmpc {

enum class Loss { squared, logistic };

struct BoostParams {
    int trees = 80;
    int depth = 3;
    int bins = 32;
    double gamma = 0.0;
    double lambda = 1.0;
    double eta = 0.3;
    Loss loss = Loss::squared;
    int frac_bits = 20;

    void validate() const;
};

// First/second-order gradient statistics (active party, plaintext).
struct GradPair {
    Eigen::VectorXd g;
    Eigen::VectorXd h;
};

GradPair gradients(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat,
                   Loss loss);

// Rounds both gradient vectors onto the fixed-point grid. Aggregation over
// ring shares then matches plaintext double sums bit-exactly, which is what
// makes the secure pipeline lossless against the oracle.
GradPair quantize(const GradPair& gp, const FixedCodec& codec);

// Per-node quantile binning of one party's feature block.
struct BinFrame {
    Eigen::MatrixXi bins;  // M x N_k; -1 for rows outside the sample space
    std::vector<std::vector<double>> boundaries;  // per feature, deduped
};

// Boundaries at empirical quantiles b/B (b = 1..B-1, linear interpolation)
// of each column restricted to I; bin(v) = number of boundaries strictly
// below v, so values equal to a boundary fall in the lower bin.
BinFrame local_binning(const Eigen::MatrixXd& X, const std::vector<int>& I,
                       int B);

int bin_of(double v, const std::vector<double>& boundaries);

// One-hot expansion of a bin frame: M x (N_k * B) with a 1 at
// (i, j*B + bin(i,j)) for i in the sample space. The flag layout behind the
// shared aggregation inner product.
Eigen::MatrixXd one_hot(const BinFrame& bf, int B);

// Aggregated statistics for one party: G, H are N_k x B.
struct GHMatrices {
    Eigen::MatrixXd G;
    Eigen::MatrixXd H;
};

// Plaintext aggregation oracle (the servers' shared matmul reveals exactly
// this when gradients ride the fixed-point grid).
GHMatrices aggregate_plain(const BinFrame& bf, int B, const GradPair& gq,
                           const std::vector<int>& I);

struct SplitChoice {
    int party = -1;     // k*
    int feature = -1;   // j*, local to the owner party
    int position = -1;  // s* in 1..B-1
    double gain = 0.0;  // v*
};

// Scan over all parties' aggregated matrices: prefix sums over split
// positions, gain v = 1/2 (G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)) - gamma,
// strict v > 0, ties to the lexicographically smallest (k, j, s). Splits
// with an empty side are never chosen.
std::optional<SplitChoice> scan_best_split(const std::vector<GHMatrices>& gh,
                                           const BoostParams& params);

// Direct gain recomputation for one candidate, used by the gain-identity
// check.
double split_gain(double GL, double HL, double GR, double HR, double lambda,
                  double gamma);

double leaf_weight(double G_sum, double H_sum, double lambda);

// Owner-side sample split: I_L = { i in I : x_i <= boundary }.
std::vector<int> sample_split(const std::vector<int>& I,
                              const Eigen::VectorXd& column, double boundary);

// I_R = I \ I_L, preserving I's order (I_L must be a subsequence of I).
std::vector<int> complement_in_order(const std::vector<int>& I,
                                     const std::vector<int>& IL);

// ---- model ------------------------------------------------------------------

struct TreeNode {
    int id = -1;
    int depth = 0;
    bool is_leaf = true;
    // split fields (valid when !is_leaf)
    int owner = -1;
    int feature = -1;
    int position = -1;
    double gain = 0.0;
    int left = -1;
    int right = -1;
    // leaf field
    double weight = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

// Boundary values keyed by (tree, node): held inline for the centralized
// oracle, split across owner parties in the secure pipeline.
using BoundaryStore = std::map<std::pair<int, int>, double>;

struct BoostModel {
    BoostParams params;
    double base_score = 0.0;
    std::vector<Tree> trees;
    std::vector<int> party_ids;  // feature owners, frame order
    // boundary stores keyed by owner party id; the oracle fills all of them
    // (it sees everything), the secure trainer leaves each on its owner.
    std::map<int, BoundaryStore> boundaries;
};

void save_model(const BoostModel& m, const std::string& path);
BoostModel load_model(const std::string& path);
std::string model_to_json(const BoostModel& m);

// ---- tree growth skeleton ------------------------------------------------------

// The depth-wise growth loop shared verbatim by the centralized oracle and
// the secure trainer; only the aggregation and partition steps differ. This
// is what makes the two pipelines' decisions structurally identical.
struct NodeBackend {
    // Aggregated (G, H) per party for the node's sample space.
    std::function<std::vector<GHMatrices>(const std::vector<int>& I, int tree,
                                          int node)>
        aggregate;
    // Owner-side partition: returns I_L and persists the chosen boundary
    // under (tree, node) on the owner.
    std::function<std::vector<int>(const SplitChoice&, const std::vector<int>& I,
                                   int tree, int node)>
        partition_left;
};

struct TreeGrowth {
    Tree tree;
    std::vector<std::vector<int>> leaf_samples;
    std::vector<double> leaf_weights;
};

// `depth_log`, when set, receives one wall-clock row per frontier level.
TreeGrowth grow_tree(const NodeBackend& backend, const GradPair& gq,
                     const BoostParams& params, int tree_index,
                     std::ostream* depth_log = nullptr);

// ---- centralized reference ----------------------------------------------------

// Centralized plaintext trainer: runs the exact per-node pipeline
// (re-binning, one-hot-equivalent aggregation, split scan, owner split)
// with every party's data in one place. The losslessness oracle.
BoostModel oracle_train(const std::vector<Eigen::MatrixXd>& party_features,
                        const std::vector<int>& party_ids,
                        const Eigen::VectorXd& y, const BoostParams& params);

Eigen::VectorXd oracle_predict(const BoostModel& m,
                               const std::vector<Eigen::MatrixXd>& party_features);

// Per-tree training trace (split tuples in node order), for equivalence
// checks between the secure trainer and the oracle.
struct SplitRecord {
    int tree = -1;
    int node = -1;
    int party = -1;
    int feature = -1;
    int position = -1;
    double gain = 0.0;
};

std::vector<SplitRecord> split_records(const BoostModel& m);

}  // namespace windmpc
