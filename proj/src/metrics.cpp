#include "windmpc/metrics.hpp"

#include <cmath>

#include "json.hpp"

namespace windmpc {

double rmse(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted) {
    if (actual.size() != predicted.size())
        throw LengthError("rmse over unequal lengths");
    if (actual.size() == 0) throw LengthError("rmse over empty series");
    return std::sqrt((actual - predicted).squaredNorm() / actual.size()) *
           100.0;
}

double mae(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted) {
    if (actual.size() != predicted.size())
        throw LengthError("mae over unequal lengths");
    if (actual.size() == 0) throw LengthError("mae over empty series");
    return (actual - predicted).cwiseAbs().mean() * 100.0;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["parties"] = parties;
    j["wire_bytes"] = wire_bytes;
    j["phase_seconds"] = phase_seconds;
    j["horizons"] = nlohmann::json::array();
    for (size_t i = 0; i < horizon_steps.size(); ++i)
        j["horizons"].push_back({{"steps", horizon_steps[i]},
                                 {"hours", horizon_steps[i] * 0.25},
                                 {"rmse_pct", rmse_pct[i]},
                                 {"mae_pct", mae_pct[i]}});
    return j.dump(2);
}

}  // namespace windmpc
