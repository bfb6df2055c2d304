#pragma once

#include <string>
#include <vector>

#include "windmpc/boost_core.hpp"
#include "windmpc/config.hpp"
#include "windmpc/dataset.hpp"
#include "windmpc/metrics.hpp"
#include "windmpc/mmd.hpp"

namespace windmpc {

// Aligned vertical frames for one target horizon, time-ordered train/test
// split. Frames are ordered [target, peers...]; party ids are farm index + 1.
struct VerticalData {
    std::vector<Eigen::MatrixXd> train_X;
    std::vector<Eigen::MatrixXd> test_X;
    Eigen::VectorXd train_y;
    Eigen::VectorXd test_y;
    std::vector<int64_t> train_index;  // anchor timestamps
    std::vector<int64_t> test_index;
    std::vector<int> party_ids;
    std::vector<int> farm_indices;
};

VerticalData assemble_vertical(const std::vector<FarmSeries>& farms,
                               const std::vector<int>& participants,
                               int lags, int nwp_steps,
                               const std::vector<int>& horizons, int horizon,
                               double train_frac);

// Participant farm indices (target excluded) by thresholded-MMD adjacency.
std::vector<int> participants_by_mmd(const std::vector<FarmSeries>& farms,
                                     int target, const RunConfig& cfg,
                                     Adjacency* adj_out = nullptr);

// The naive geometric baseline: `count` nearest farms by site distance.
std::vector<int> participants_by_distance(const std::vector<FarmSeries>& farms,
                                          int target, int count);

// Train the centralized reference on the vertical frames and score the test
// tail (percent of capacity).
double oracle_rmse(const VerticalData& d, const BoostParams& params,
                   double* mae_out = nullptr);

// Persistence baseline: predict the last observed power for every horizon.
double persistence_rmse(const VerticalData& d, int lags,
                        double* mae_out = nullptr);

struct BaselineRow {
    std::string model;
    double rmse_pct = 0.0;
    double mae_pct = 0.0;
};

struct CompareReport {
    int horizon = 0;
    std::vector<int> mmd_selection;       // farm indices
    std::vector<int> distance_selection;  // farm indices
    std::vector<BaselineRow> rows;

    std::string to_json() const;
};

// The full accuracy roster: persistence, Lasso and local XGBoost with and
// without NWP features, and the vertical model under MMD vs distance
// participant selection.
CompareReport compare_baselines(const std::vector<FarmSeries>& farms,
                                int target, const RunConfig& cfg, int horizon);

}  // namespace windmpc
