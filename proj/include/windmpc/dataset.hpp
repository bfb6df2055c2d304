#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "windmpc/errors.hpp"

namespace windmpc {

// One farm's series on a canonical 15-minute grid. Power is normalized to
// [0,1] by capacity; NaN entries mark gaps (dropped at feature time, never
// imputed).
struct FarmSeries {
    std::string farm_id;
    double capacity = 0.0;                // MW
    std::vector<int64_t> timestamps;      // epoch seconds, step 900, no holes
    Eigen::VectorXd power;                // normalized; NaN = gap
    Eigen::MatrixXd nwp;                  // T x k; NaN = gap
    double coord_x = 0.0;                 // site coordinates, km
    double coord_y = 0.0;

    Eigen::Index steps() const { return power.size(); }
    int nwp_vars() const { return static_cast<int>(nwp.cols()); }
};

// CSV schema: header "timestamp,power,nwp_1,..,nwp_k"; ISO-8601 timestamps
// ('T' or space separator), power in MW.
FarmSeries ingest_csv(const std::string& path, double capacity);
void write_csv(const FarmSeries& s, const std::string& path);

int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(int64_t epoch_seconds);

struct FeatureFrame {
    Eigen::MatrixXd X;                      // M_samples x (M + N*k)
    std::vector<std::string> feature_names;
    std::vector<int64_t> sample_index;      // anchor timestamps, increasing
};

struct LabelFrame {
    Eigen::MatrixXd y;                      // M_samples x n_horizons
    std::vector<int> horizon_steps;
    std::vector<int64_t> sample_index;
};

// Row anchored at time t carries [P_{t-M+1..t}, V_{t+1..t+N,1..k}]; the label
// for horizon h is P_{t+h}. Rows touching any gap are dropped.
struct FeatureBuild {
    FeatureFrame features;
    LabelFrame labels;
};

FeatureBuild build_features(const FarmSeries& s, int M, int N,
                            const std::vector<int>& horizons);

// Intersection of all sample indices, increasing order.
std::vector<int64_t> align_indices(
    const std::vector<const std::vector<int64_t>*>& indices);

FeatureFrame apply_selection(const FeatureFrame& f,
                             const std::vector<int64_t>& index);
LabelFrame apply_selection(const LabelFrame& l,
                           const std::vector<int64_t>& index);

// Restrict every frame to the shared sample index (identical row order
// everywhere). Idempotent.
std::vector<FeatureFrame> align(const std::vector<FeatureFrame>& frames);

// ---- synthetic cluster ---------------------------------------------------------

struct SynthSpec {
    int n_farms = 8;
    int steps = 96 * 40;        // 40 days
    double spatial_corr = 0.9;  // in [0,1)
    uint64_t seed = 1;
    int n_independent = 0;      // farms drawn from a different wind regime
    int nwp_vars = 3;
    double capacity = 100.0;    // MW
    int64_t start_epoch = 1767225600;  // 2026-01-01T00:00:00Z
};

// Latent regional wind (AR(1) + diurnal cycle) shared by the correlated
// farms with per-farm lags -- farm 0 lags its peers, so peer history is
// genuinely predictive of farm 0. Independent farms run their own regimes.
// NWP columns are noisy forecasts of each farm's true wind.
std::vector<FarmSeries> synth_cluster(const SynthSpec& spec);
std::vector<FarmSeries> synth_cluster(int n_farms, int steps,
                                      double spatial_corr, uint64_t seed);

}  // namespace windmpc
