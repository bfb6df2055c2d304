#pragma once

#include <vector>

#include <Eigen/Core>

#include "windmpc/dataset.hpp"
#include "windmpc/errors.hpp"

namespace windmpc {

// Sliding windows of normalized power, one row per window.
struct SampleSet {
    Eigen::MatrixXd windows;  // n_windows x L

    Eigen::Index size() const { return windows.rows(); }
};

struct KernelSpec {
    double base_bandwidth = 1.0;
    std::vector<double> multipliers{0.25, 0.5, 1.0, 2.0, 4.0};
};

// Length-L windows with the given stride over the last `history` steps of
// the series (gap windows skipped), evenly subsampled down to `cap`.
SampleSet power_windows(const FarmSeries& s, int L = 16, int stride = 4,
                        int history = 96 * 14, int cap = 512);

// Median pairwise Euclidean distance over the pooled windows (subsampled to
// at most 2048 rows). DegenerateError if the median distance is 0.
double median_heuristic(const std::vector<SampleSet>& sets,
                        int max_rows = 2048);

KernelSpec kernel_from_data(const std::vector<SampleSet>& sets);

// Biased V-statistic estimate of the squared maximum mean discrepancy under
// the summed Gaussian kernel; clamped at 0.
double mmd2(const SampleSet& d1, const SampleSet& d2, const KernelSpec& k);

struct Adjacency {
    Eigen::MatrixXd A;   // symmetric, unit diagonal
    Eigen::MatrixXd m2;  // pairwise squared discrepancies
    double beta = 0.85;
    double sigma = 0.0;  // std of off-diagonal discrepancies
    double mean = 0.0;
};

// A_ij = exp(-MMD2_ij / sigma^2) when MMD2_ij <= beta * mean, else 0, with
// sigma and mean over the off-diagonal pairs; diagonal exactly 1.
Adjacency adjacency(const std::vector<SampleSet>& farms, double beta,
                    const KernelSpec& k);

// Participants for `target`: every j != target with A[target,j] != 0, by
// descending adjacency, ties by ascending id.
std::vector<int> select_participants(const Adjacency& adj, int target);
std::vector<int> select_participants(const Adjacency& adj,
                                     const std::vector<int>& ids,
                                     int target_id);

}  // namespace windmpc
