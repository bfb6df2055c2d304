#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "windmpc/errors.hpp"

namespace windmpc {

// Error metrics over capacity-normalized series, reported as percent of
// rated capacity (inputs in [0,1] -> result x100).
double rmse(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted);
double mae(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted);

struct EvalReport {
    std::vector<int> horizon_steps;
    std::vector<double> rmse_pct;
    std::vector<double> mae_pct;
    std::map<std::string, double> phase_seconds;
    uint64_t wire_bytes = 0;
    int parties = 0;

    std::string to_json() const;
};

}  // namespace windmpc
