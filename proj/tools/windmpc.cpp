// windmpc CLI: ingest / synth / select / train / predict / eval / bench /
// compare over the privacy-preserving vertical wind-power pipeline.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "windmpc/boost_train.hpp"
#include "windmpc/config.hpp"
#include "windmpc/dataset.hpp"
#include "windmpc/errors.hpp"
#include "windmpc/metrics.hpp"
#include "windmpc/pipeline.hpp"

namespace {

using namespace windmpc;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::data: return "data";
        case ErrorCategory::transport: return "transport";
        case ErrorCategory::internal: return "internal";
    }
    return "internal";
}

// ---- shared data loading ----------------------------------------------------

SynthSpec synth_spec(const RunConfig& cfg) {
    SynthSpec s = cfg.synth;
    s.seed = cfg.seed;
    s.capacity = cfg.capacity;
    s.nwp_vars = cfg.nwp_vars;
    return s;
}

// A data directory holds meta.json ({"farms":[{file,capacity,coord_x,
// coord_y},..]}) plus the referenced CSVs; without --data-dir the synthetic
// cluster from the config is used.
std::vector<FarmSeries> load_farms(const RunConfig& cfg,
                                   const std::string& data_dir) {
    if (data_dir.empty()) return synth_cluster(synth_spec(cfg));
    std::ifstream in(data_dir + "/meta.json");
    if (!in) throw ConfigError("cannot open " + data_dir + "/meta.json");
    json meta;
    try {
        in >> meta;
    } catch (const std::exception& e) {
        throw FormatError(std::string("meta.json: ") + e.what());
    }
    if (!meta.contains("farms") || !meta["farms"].is_array() ||
        meta["farms"].empty())
        throw ConfigError("meta.json lists no farms");
    std::vector<FarmSeries> farms;
    for (const auto& f : meta["farms"]) {
        const std::string file = f.at("file").get<std::string>();
        const double cap = f.value("capacity", cfg.capacity);
        FarmSeries s = ingest_csv(data_dir + "/" + file, cap);
        s.coord_x = f.value("coord_x", 0.0);
        s.coord_y = f.value("coord_y", 0.0);
        if (f.contains("id")) s.farm_id = f["id"].get<std::string>();
        farms.push_back(std::move(s));
    }
    return farms;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << text << '\n';
}

PartyTopology make_topology(size_t n_parties,
                            const std::vector<int>& party_ids) {
    PartyTopology topo;
    topo.active = party_ids.at(0);
    topo.passives.assign(party_ids.begin() + 1, party_ids.end());
    topo.servers = {101, 102, 103};
    topo.validate();
    (void)n_parties;
    return topo;
}

std::vector<int> participants_with_target(
    const std::vector<FarmSeries>& farms, int target, const RunConfig& cfg,
    const std::string& explicit_list) {
    std::vector<int> all{target};
    if (!explicit_list.empty()) {
        std::stringstream ss(explicit_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const int f = std::stoi(tok);
            if (f != target) all.push_back(f);
        }
    } else {
        for (int f : participants_by_mmd(farms, target, cfg)) all.push_back(f);
    }
    return all;
}

// ---- subcommand bodies --------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    const SynthSpec spec = synth_spec(cfg);
    const std::vector<FarmSeries> farms = synth_cluster(spec);
    json meta;
    meta["seed"] = spec.seed;
    meta["spatial_corr"] = spec.spatial_corr;
    meta["n_independent"] = spec.n_independent;
    json list = json::array();
    for (size_t i = 0; i < farms.size(); ++i) {
        const std::string file = "farm_" + std::to_string(i) + ".csv";
        write_csv(farms[i], out_dir + "/" + file);
        list.push_back({{"id", farms[i].farm_id},
                        {"file", file},
                        {"capacity", farms[i].capacity},
                        {"coord_x", farms[i].coord_x},
                        {"coord_y", farms[i].coord_y}});
    }
    meta["farms"] = list;
    write_text(out_dir + "/meta.json", meta.dump(2));
    std::cout << json{{"written", farms.size()},
                      {"steps", farms[0].steps()},
                      {"dir", out_dir}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_ingest(const RunConfig& cfg, const std::string& input, double capacity,
               const std::string& output) {
    const double cap = capacity > 0 ? capacity : cfg.capacity;
    const FarmSeries s = ingest_csv(input, cap);
    Eigen::Index gaps = 0;
    for (Eigen::Index t = 0; t < s.steps(); ++t)
        if (std::isnan(s.power[t])) ++gaps;
    if (!output.empty()) write_csv(s, output);
    std::cout << json{{"file", input},
                      {"steps", s.steps()},
                      {"gaps", gaps},
                      {"capacity", cap},
                      {"nwp_vars", s.nwp_vars()},
                      {"first", format_timestamp(s.timestamps.front())},
                      {"last", format_timestamp(s.timestamps.back())}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_select(const RunConfig& cfg, const std::string& data_dir, int target,
               const std::string& out) {
    const std::vector<FarmSeries> farms = load_farms(cfg, data_dir);
    Adjacency adj;
    const std::vector<int> picked = participants_by_mmd(farms, target, cfg, &adj);

    json rep;
    rep["target"] = target;
    rep["beta"] = adj.beta;
    rep["sigma"] = adj.sigma;
    rep["mean_mmd2"] = adj.mean;
    rep["participants"] = picked;
    json ids = json::array();
    for (const auto& f : farms) ids.push_back(f.farm_id);
    rep["farm_ids"] = ids;
    auto to_rows = [](const Eigen::MatrixXd& M) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    rep["mmd2"] = to_rows(adj.m2);
    rep["adjacency"] = to_rows(adj.A);
    const std::string text = rep.dump(2);
    if (!out.empty()) write_text(out, text);
    std::cout << text << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, int target,
              int horizon, const std::string& participants_arg,
              const std::string& model_path, const std::string& mode_arg,
              bool audit_on, const std::string& report_path) {
    const std::vector<FarmSeries> farms = load_farms(cfg, data_dir);
    const std::vector<int> participants =
        participants_with_target(farms, target, cfg, participants_arg);
    const VerticalData d =
        assemble_vertical(farms, participants, cfg.lags, cfg.nwp_steps,
                          cfg.horizons, horizon, cfg.train_frac);
    const PartyTopology topo = make_topology(d.party_ids.size(), d.party_ids);
    const AggMode mode =
        mode_arg == "eq_flags" ? AggMode::eq_flags : AggMode::one_hot;

    AuditSink audit;
    const Clock::time_point t0 = Clock::now();
    const SecureRun run =
        secure_train_run(topo, d.train_X, d.test_X, d.train_y, cfg.boost,
                         cfg.seed, mode, audit_on ? &audit : nullptr);
    const double wall = seconds_since(t0);
    save_model(run.model, model_path);

    json rep;
    rep["model"] = model_path;
    rep["participants"] = participants;
    rep["parties"] = static_cast<int>(d.party_ids.size());
    rep["horizon_steps"] = horizon;
    rep["train_samples"] = static_cast<int>(d.train_y.size());
    rep["test_samples"] = static_cast<int>(d.test_y.size());
    rep["train_rmse_pct"] = rmse(d.test_y, run.train_predictions);
    rep["wall_seconds"] = wall;
    rep["wire_bytes"] = run.metrics.total_bytes();
    rep["wire_frames"] = run.metrics.total_frames();
    for (const auto& [name, secs] : run.metrics.phase_seconds)
        rep["phase_seconds"][name] = secs;
    if (audit_on) {
        json viols = json::array();
        for (const auto& v : audit.violations())
            viols.push_back({{"name", v.name},
                             {"from", v.from},
                             {"to", v.to},
                             {"session", v.session_id}});
        rep["audit_violations"] = viols;
        json counters = json::array();
        for (int sv : topo.servers)
            counters.push_back({{"party", sv},
                                {"share_frames", audit.frames_to(
                                     sv, static_cast<uint8_t>(FrameKind::share))}});
        rep["server_share_frames"] = counters;
    }
    const std::string text = rep.dump(2);
    if (!report_path.empty()) write_text(report_path, text);
    std::cout << text << '\n';
    return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& data_dir,
                const std::string& model_path, int horizon,
                const std::string& out_csv) {
    const BoostModel m = load_model(model_path);
    const std::vector<FarmSeries> farms = load_farms(cfg, data_dir);
    std::vector<int> participants;
    for (int id : m.party_ids) {
        const int f = id - 1;
        if (f < 0 || f >= static_cast<int>(farms.size()))
            throw ConfigError("model party id " + std::to_string(id) +
                              " has no farm in this dataset");
        participants.push_back(f);
    }
    const VerticalData d =
        assemble_vertical(farms, participants, cfg.lags, cfg.nwp_steps,
                          cfg.horizons, horizon, cfg.train_frac);
    const Eigen::VectorXd pred = oracle_predict(m, d.test_X);
    const double cap = farms[participants[0]].capacity;

    std::ostringstream csv;
    csv << "timestamp,actual_mw,predicted_mw\n";
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const int64_t t = d.test_index[static_cast<size_t>(i)] + 900LL * horizon;
        csv << format_timestamp(t) << ',' << d.test_y[i] * cap << ','
            << pred[i] * cap << '\n';
    }
    if (!out_csv.empty())
        write_text(out_csv, csv.str());
    else
        std::cout << csv.str();
    std::cout << json{{"test_samples", pred.size()},
                      {"rmse_pct", rmse(d.test_y, pred)},
                      {"mae_pct", mae(d.test_y, pred)}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& data_dir, int target,
             const std::string& participants_arg, bool secure,
             const std::string& out) {
    const std::vector<FarmSeries> farms = load_farms(cfg, data_dir);
    const std::vector<int> participants =
        participants_with_target(farms, target, cfg, participants_arg);

    EvalReport rep;
    rep.parties = static_cast<int>(participants.size());
    for (int h : cfg.horizons) {
        const VerticalData d =
            assemble_vertical(farms, participants, cfg.lags, cfg.nwp_steps,
                              cfg.horizons, h, cfg.train_frac);
        double m = 0.0, r = 0.0;
        if (secure) {
            const PartyTopology topo =
                make_topology(d.party_ids.size(), d.party_ids);
            const SecureRun run = secure_train_run(
                topo, d.train_X, d.test_X, d.train_y, cfg.boost, cfg.seed);
            r = rmse(d.test_y, run.train_predictions);
            m = mae(d.test_y, run.train_predictions);
            rep.wire_bytes += run.metrics.total_bytes();
            for (const auto& [name, secs] : run.metrics.phase_seconds)
                rep.phase_seconds[name + "_h" + std::to_string(h)] = secs;
        } else {
            const Clock::time_point t0 = Clock::now();
            r = oracle_rmse(d, cfg.boost, &m);
            rep.phase_seconds["train_h" + std::to_string(h)] =
                seconds_since(t0);
        }
        rep.horizon_steps.push_back(h);
        rep.rmse_pct.push_back(r);
        rep.mae_pct.push_back(m);
    }
    const std::string text = rep.to_json();
    if (!out.empty()) write_text(out, text);
    std::cout << text << '\n';
    return 0;
}

int cmd_bench(const RunConfig& cfg, const std::string& parties_arg, int runs,
              bool tcp, int samples, const std::string& out) {
    std::vector<int> party_counts;
    {
        std::stringstream ss(parties_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const auto dots = tok.find("..");
            if (dots != std::string::npos) {
                const int lo = std::stoi(tok.substr(0, dots));
                const int hi = std::stoi(tok.substr(dots + 2));
                for (int v = lo; v <= hi; ++v) party_counts.push_back(v);
            } else {
                party_counts.push_back(std::stoi(tok));
            }
        }
    }
    if (party_counts.empty()) throw ConfigError("empty --parties list");
    const int max_m = *std::max_element(party_counts.begin(), party_counts.end());
    if (max_m < 2) throw ConfigError("bench needs at least 2 parties");

    // One synthetic cluster reused across all m (fixed data; correlated farms
    // only so every subset is a meaningful vertical cohort).
    SynthSpec spec = synth_spec(cfg);
    spec.n_farms = max_m;
    spec.n_independent = 0;
    const int need =
        static_cast<int>(std::lround(samples / cfg.train_frac)) + cfg.lags +
        std::max(cfg.nwp_steps, cfg.horizons.back()) + 96;
    spec.steps = std::max(96 * 4, (need / 96 + 1) * 96);
    const std::vector<FarmSeries> farms = synth_cluster(spec);
    const int horizon = cfg.horizons.back();

    json rows = json::array();
    std::cout << "  m   median_train_s   predict_ms_per_sample   wire_MB\n";
    for (int m : party_counts) {
        std::vector<int> participants(m);
        std::iota(participants.begin(), participants.end(), 0);
        VerticalData d =
            assemble_vertical(farms, participants, cfg.lags, cfg.nwp_steps,
                              cfg.horizons, horizon, cfg.train_frac);
        // Trim to the requested sample budget (time-ordered head).
        if (d.train_y.size() > samples) {
            for (auto& X : d.train_X) X = X.topRows(samples).eval();
            d.train_y = d.train_y.head(samples).eval();
        }
        const PartyTopology topo = make_topology(d.party_ids.size(), d.party_ids);

        std::vector<double> train_s;
        double predict_ms = 0.0;
        uint64_t bytes = 0;
        for (int r = 0; r < runs; ++r) {
            const Clock::time_point t0 = Clock::now();
            const SecureRun run =
                tcp ? secure_train_run_tcp(topo, d.train_X, d.test_X, d.train_y,
                                           cfg.boost, cfg.seed + r)
                    : secure_train_run(topo, d.train_X, d.test_X, d.train_y,
                                       cfg.boost, cfg.seed + r);
            const double total = seconds_since(t0);
            const auto it = run.metrics.phase_seconds.find("train");
            train_s.push_back(it != run.metrics.phase_seconds.end() ? it->second
                                                                    : total);
            const auto pit = run.metrics.phase_seconds.find("predict");
            if (pit != run.metrics.phase_seconds.end())
                predict_ms = 1000.0 * pit->second /
                             static_cast<double>(d.test_y.size());
            bytes = run.metrics.total_bytes();
        }
        std::sort(train_s.begin(), train_s.end());
        const double med = train_s[train_s.size() / 2];
        std::printf("  %d   %14.3f   %21.4f   %7.2f\n", m, med, predict_ms,
                    static_cast<double>(bytes) / (1024.0 * 1024.0));
        rows.push_back({{"parties", m},
                        {"median_train_s", med},
                        {"predict_ms_per_sample", predict_ms},
                        {"wire_bytes", bytes},
                        {"runs", runs}});
    }
    json rep;
    rep["tcp"] = tcp;
    rep["samples"] = samples;
    rep["trees"] = cfg.boost.trees;
    rep["depth"] = cfg.boost.depth;
    rep["rows"] = rows;
    if (!out.empty()) write_text(out, rep.dump(2));
    return 0;
}

int cmd_compare(const RunConfig& cfg, const std::string& data_dir, int target,
                int horizon, const std::string& out) {
    const std::vector<FarmSeries> farms = load_farms(cfg, data_dir);
    const CompareReport rep = compare_baselines(farms, target, cfg, horizon);
    std::cout << "model                 rmse_pct   mae_pct\n";
    for (const auto& r : rep.rows)
        std::printf("%-20s   %8.3f   %7.3f\n", r.model.c_str(), r.rmse_pct,
                    r.mae_pct);
    const std::string text = rep.to_json();
    if (!out.empty()) write_text(out, text);
    std::cout << text << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"windmpc: privacy-preserving vertical wind-power prediction"};
    app.require_subcommand(0, 1);

    std::string config_path;
    bool show = false;
    uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "INI config file");
    app.add_flag("--show-config", show, "print effective config and exit");
    app.add_option("--seed", seed_override, "override [run] seed")
        ->each([&](const std::string&) { seed_set = true; });

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic farm cluster");
    std::string out_dir = ".";
    synth->add_option("--out-dir", out_dir, "output directory")->required();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and normalize a farm CSV");
    std::string in_csv, out_csv;
    double capacity = 0.0;
    ingest->add_option("--input", in_csv, "farm CSV")->required();
    ingest->add_option("--capacity", capacity, "rated capacity, MW");
    ingest->add_option("--output", out_csv, "write canonical CSV here");

    // select
    auto* select = app.add_subcommand("select", "MMD participant selection");
    std::string data_dir, report_out;
    int target = 0;
    select->add_option("--data-dir", data_dir, "directory with meta.json");
    select->add_option("--target", target, "target farm index");
    select->add_option("--out", report_out, "adjacency report JSON");

    // train
    auto* train = app.add_subcommand("train", "secure vertical training");
    std::string model_path = "model.bin", participants_arg, mode_arg = "one_hot";
    int horizon = 16;
    bool audit_on = false;
    train->add_option("--data-dir", data_dir, "directory with meta.json");
    train->add_option("--target", target, "target farm index");
    train->add_option("--horizon", horizon, "label horizon (15-min steps)");
    train->add_option("--participants", participants_arg,
                      "comma-separated farm indices (skip MMD selection)");
    train->add_option("--model", model_path, "model output path");
    train->add_option("--mode", mode_arg, "one_hot | eq_flags")
        ->check(CLI::IsMember({"one_hot", "eq_flags"}));
    train->add_flag("--audit", audit_on, "run the information-flow audit");
    train->add_option("--report", report_out, "training report JSON");

    // predict
    auto* predict = app.add_subcommand("predict", "score the test tail");
    predict->add_option("--data-dir", data_dir, "directory with meta.json");
    predict->add_option("--model", model_path, "trained model")->required();
    predict->add_option("--horizon", horizon, "label horizon (15-min steps)");
    predict->add_option("--out", out_csv, "prediction CSV (stdout otherwise)");

    // eval
    auto* eval = app.add_subcommand("eval", "per-horizon RMSE/MAE report");
    bool secure_eval = false;
    eval->add_option("--data-dir", data_dir, "directory with meta.json");
    eval->add_option("--target", target, "target farm index");
    eval->add_option("--participants", participants_arg,
                     "comma-separated farm indices (skip MMD selection)");
    eval->add_flag("--secure", secure_eval,
                   "run the secure protocol (plaintext-equivalent oracle "
                   "otherwise; same models by construction)");
    eval->add_option("--out", report_out, "EvalReport JSON");

    // bench
    auto* bench = app.add_subcommand("bench", "scalability timing harness");
    std::string parties_arg = "2..6";
    int runs = 3, samples = 400;
    bool tcp = false;
    bench->add_option("--parties", parties_arg, "e.g. 2..6 or 2,4,6");
    bench->add_option("--runs", runs, "runs per point (median reported)");
    bench->add_option("--samples", samples, "training samples per run");
    bench->add_flag("--tcp", tcp, "parties as threads over loopback TCP");
    bench->add_option("--out", report_out, "timing report JSON");

    // compare
    auto* compare = app.add_subcommand("compare", "baseline accuracy roster");
    compare->add_option("--data-dir", data_dir, "directory with meta.json");
    compare->add_option("--target", target, "target farm index");
    compare->add_option("--horizon", horizon, "label horizon (15-min steps)");
    compare->add_option("--out", report_out, "comparison JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (seed_set) cfg.seed = seed_override;
        cfg.validate();
        if (show) {
            std::cout << show_config(cfg);
            return 0;
        }
        if (synth->parsed()) return cmd_synth(cfg, out_dir);
        if (ingest->parsed()) return cmd_ingest(cfg, in_csv, capacity, out_csv);
        if (select->parsed()) return cmd_select(cfg, data_dir, target, report_out);
        if (train->parsed())
            return cmd_train(cfg, data_dir, target, horizon, participants_arg,
                             model_path, mode_arg, audit_on, report_out);
        if (predict->parsed())
            return cmd_predict(cfg, data_dir, model_path, horizon, out_csv);
        if (eval->parsed())
            return cmd_eval(cfg, data_dir, target, participants_arg,
                            secure_eval, report_out);
        if (bench->parsed())
            return cmd_bench(cfg, parties_arg, runs, tcp, samples, report_out);
        if (compare->parsed())
            return cmd_compare(cfg, data_dir, target, horizon, report_out);
        std::cout << app.help();
        return 0;
    } catch (const Error& e) {
        std::cerr << json{{"error",
                           {{"category", category_name(e.category())},
                            {"exit_code", e.exit_code()},
                            {"message", e.what()}}}}
                         .dump()
                  << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << json{{"error",
                           {{"category", "internal"},
                            {"exit_code", 5},
                            {"message", e.what()}}}}
                         .dump()
                  << '\n';
        return 5;
    }
}
