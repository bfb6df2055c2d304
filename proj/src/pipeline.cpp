#include "windmpc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "windmpc/lasso.hpp"

namespace windmpc {

VerticalData assemble_vertical(const std::vector<FarmSeries>& farms,
                               const std::vector<int>& participants,
                               int lags, int nwp_steps,
                               const std::vector<int>& horizons, int horizon,
                               double train_frac) {
    if (participants.empty()) throw EmptySetError("no participants");
    if (train_frac <= 0.0 || train_frac >= 1.0)
        throw ConfigError("train_frac must lie in (0,1)");
    auto h_it = std::find(horizons.begin(), horizons.end(), horizon);
    if (h_it == horizons.end())
        throw ConfigError("requested horizon is not in the horizon list");
    const int h_col = static_cast<int>(h_it - horizons.begin());

    std::vector<FeatureFrame> frames;
    LabelFrame labels;
    for (size_t p = 0; p < participants.size(); ++p) {
        const int f = participants[p];
        if (f < 0 || f >= static_cast<int>(farms.size()))
            throw ConfigError("participant index out of range");
        FeatureBuild fb = build_features(farms[f], lags, nwp_steps, horizons);
        if (p == 0) labels = std::move(fb.labels);
        frames.push_back(std::move(fb.features));
    }

    std::vector<const std::vector<int64_t>*> indices;
    for (const auto& f : frames) indices.push_back(&f.sample_index);
    indices.push_back(&labels.sample_index);
    const std::vector<int64_t> shared = align_indices(indices);

    for (auto& f : frames) f = apply_selection(f, shared);
    labels = apply_selection(labels, shared);

    const Eigen::Index n = static_cast<Eigen::Index>(shared.size());
    const Eigen::Index n_train =
        static_cast<Eigen::Index>(std::floor(train_frac * static_cast<double>(n)));
    if (n_train < 1 || n_train >= n)
        throw LengthError("train/test split leaves an empty side");

    VerticalData d;
    for (size_t p = 0; p < participants.size(); ++p) {
        d.train_X.push_back(frames[p].X.topRows(n_train));
        d.test_X.push_back(frames[p].X.bottomRows(n - n_train));
        d.party_ids.push_back(participants[p] + 1);
    }
    d.train_y = labels.y.col(h_col).head(n_train);
    d.test_y = labels.y.col(h_col).tail(n - n_train);
    d.train_index.assign(shared.begin(), shared.begin() + n_train);
    d.test_index.assign(shared.begin() + n_train, shared.end());
    d.farm_indices = participants;
    return d;
}

std::vector<int> participants_by_mmd(const std::vector<FarmSeries>& farms,
                                     int target, const RunConfig& cfg,
                                     Adjacency* adj_out) {
    if (target < 0 || target >= static_cast<int>(farms.size()))
        throw ConfigError("target farm index out of range");
    std::vector<SampleSet> sets;
    sets.reserve(farms.size());
    for (const auto& f : farms)
        sets.push_back(power_windows(f, cfg.window_len, cfg.window_stride,
                                     cfg.history_steps, cfg.max_windows));
    KernelSpec kernel = kernel_from_data(sets);
    kernel.multipliers = cfg.kernel_multipliers;
    Adjacency adj = adjacency(sets, cfg.beta, kernel);
    std::vector<int> picked = select_participants(adj, target);
    if (adj_out) *adj_out = std::move(adj);
    return picked;
}

std::vector<int> participants_by_distance(const std::vector<FarmSeries>& farms,
                                          int target, int count) {
    if (target < 0 || target >= static_cast<int>(farms.size()))
        throw ConfigError("target farm index out of range");
    std::vector<std::pair<double, int>> by_dist;
    for (int j = 0; j < static_cast<int>(farms.size()); ++j) {
        if (j == target) continue;
        const double dx = farms[j].coord_x - farms[target].coord_x;
        const double dy = farms[j].coord_y - farms[target].coord_y;
        by_dist.emplace_back(std::hypot(dx, dy), j);
    }
    std::sort(by_dist.begin(), by_dist.end());
    if (count > static_cast<int>(by_dist.size()))
        count = static_cast<int>(by_dist.size());
    std::vector<int> picked;
    for (int i = 0; i < count; ++i) picked.push_back(by_dist[i].second);
    return picked;
}

double oracle_rmse(const VerticalData& d, const BoostParams& params,
                   double* mae_out) {
    BoostModel m = oracle_train(d.train_X, d.party_ids, d.train_y, params);
    const Eigen::VectorXd pred = oracle_predict(m, d.test_X);
    if (mae_out) *mae_out = mae(d.test_y, pred);
    return rmse(d.test_y, pred);
}

double persistence_rmse(const VerticalData& d, int lags, double* mae_out) {
    // The newest lag column is P_t, the value persisted across the horizon.
    const Eigen::VectorXd pred = d.test_X.at(0).col(lags - 1);
    if (mae_out) *mae_out = mae(d.test_y, pred);
    return rmse(d.test_y, pred);
}

namespace {

Eigen::MatrixXd hcat(const std::vector<Eigen::MatrixXd>& parts) {
    Eigen::Index cols = 0;
    for (const auto& p : parts) cols += p.cols();
    Eigen::MatrixXd out(parts.at(0).rows(), cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p;
        at += p.cols();
    }
    return out;
}

BaselineRow lasso_row(const std::string& name, const VerticalData& d) {
    const Eigen::MatrixXd Xtr = hcat(d.train_X);
    const Eigen::MatrixXd Xte = hcat(d.test_X);
    const LassoModel m = lasso_fit(Xtr, d.train_y);
    const Eigen::VectorXd pred = lasso_predict(m, Xte);
    return {name, rmse(d.test_y, pred), mae(d.test_y, pred)};
}

BaselineRow boost_row(const std::string& name, const VerticalData& d,
                      const BoostParams& params) {
    BaselineRow row{name, 0.0, 0.0};
    row.rmse_pct = oracle_rmse(d, params, &row.mae_pct);
    return row;
}

}  // namespace

CompareReport compare_baselines(const std::vector<FarmSeries>& farms,
                                int target, const RunConfig& cfg, int horizon) {
    CompareReport rep;
    rep.horizon = horizon;

    rep.mmd_selection = participants_by_mmd(farms, target, cfg);
    rep.distance_selection = participants_by_distance(
        farms, target, static_cast<int>(rep.mmd_selection.size()));

    auto with_target = [&](const std::vector<int>& peers) {
        std::vector<int> all{target};
        all.insert(all.end(), peers.begin(), peers.end());
        return all;
    };

    const VerticalData local = assemble_vertical(
        farms, {target}, cfg.lags, cfg.nwp_steps, cfg.horizons, horizon,
        cfg.train_frac);
    const VerticalData local_no_nwp = assemble_vertical(
        farms, {target}, cfg.lags, 0, cfg.horizons, horizon, cfg.train_frac);
    const VerticalData vert_mmd = assemble_vertical(
        farms, with_target(rep.mmd_selection), cfg.lags, cfg.nwp_steps,
        cfg.horizons, horizon, cfg.train_frac);
    const VerticalData vert_dist = assemble_vertical(
        farms, with_target(rep.distance_selection), cfg.lags, cfg.nwp_steps,
        cfg.horizons, horizon, cfg.train_frac);

    BaselineRow persist{"persistence", 0.0, 0.0};
    persist.rmse_pct = persistence_rmse(local, cfg.lags, &persist.mae_pct);
    rep.rows.push_back(persist);
    rep.rows.push_back(lasso_row("lasso", local_no_nwp));
    rep.rows.push_back(lasso_row("lasso_nwp", local));
    rep.rows.push_back(boost_row("local_xgboost", local_no_nwp, cfg.boost));
    rep.rows.push_back(boost_row("local_xgboost_nwp", local, cfg.boost));
    rep.rows.push_back(boost_row("pwxgboost_distance", vert_dist, cfg.boost));
    rep.rows.push_back(boost_row("pwxgboost_mmd", vert_mmd, cfg.boost));
    return rep;
}

std::string CompareReport::to_json() const {
    nlohmann::json j;
    j["horizon_steps"] = horizon;
    j["horizon_hours"] = horizon * 0.25;
    j["mmd_selection"] = mmd_selection;
    j["distance_selection"] = distance_selection;
    nlohmann::json models = nlohmann::json::array();
    for (const auto& r : rows) {
        models.push_back({{"model", r.model},
                          {"rmse_pct", r.rmse_pct},
                          {"mae_pct", r.mae_pct}});
    }
    j["models"] = models;
    return j.dump(2);
}

}  // namespace windmpc
