#include "windmpc/config.hpp"

#include <fstream>
#include <sstream>

namespace windmpc {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        int64_t out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": " + v);
    }
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad real for " + key + ": " + v);
    }
}

template <class T, class F>
std::vector<T> parse_list(const std::string& v, const std::string& key, F f) {
    std::vector<T> out;
    std::string cur;
    std::istringstream is(v);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(f(cur, key));
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

}  // namespace

void RunConfig::validate() const {
    boost.validate();
    if (!(capacity > 0)) throw ConfigError("capacity must be > 0");
    if (lags < 1) throw ConfigError("lags must be >= 1");
    if (nwp_steps < 0) throw ConfigError("nwp_steps must be >= 0");
    if (nwp_vars < 1) throw ConfigError("nwp_vars must be >= 1");
    if (horizons.empty()) throw ConfigError("horizons must be non-empty");
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw ConfigError("train_frac must be in (0, 1)");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (window_len < 1 || window_stride < 1 || max_windows < 1)
        throw ConfigError("window parameters must be >= 1");
    if (mode != "local" && mode != "tcp")
        throw ConfigError("mode must be local or tcp");
}

void apply_config_line(RunConfig& cfg, const std::string& section,
                       const std::string& key, const std::string& value) {
    auto is = [&](const char* s, const char* k) {
        return section == s && key == k;
    };
    if (is("run", "seed"))
        cfg.seed = static_cast<uint64_t>(parse_int(value, key));
    else if (is("run", "train_frac"))
        cfg.train_frac = parse_real(value, key);
    else if (is("data", "capacity"))
        cfg.capacity = parse_real(value, key);
    else if (is("data", "lags"))
        cfg.lags = static_cast<int>(parse_int(value, key));
    else if (is("data", "nwp_steps"))
        cfg.nwp_steps = static_cast<int>(parse_int(value, key));
    else if (is("data", "nwp_vars"))
        cfg.nwp_vars = static_cast<int>(parse_int(value, key));
    else if (is("data", "horizons"))
        cfg.horizons = parse_list<int>(value, key, [](auto& v, auto& k) {
            return static_cast<int>(parse_int(v, k));
        });
    else if (is("boost", "trees"))
        cfg.boost.trees = static_cast<int>(parse_int(value, key));
    else if (is("boost", "depth"))
        cfg.boost.depth = static_cast<int>(parse_int(value, key));
    else if (is("boost", "bins"))
        cfg.boost.bins = static_cast<int>(parse_int(value, key));
    else if (is("boost", "gamma"))
        cfg.boost.gamma = parse_real(value, key);
    else if (is("boost", "lambda"))
        cfg.boost.lambda = parse_real(value, key);
    else if (is("boost", "eta"))
        cfg.boost.eta = parse_real(value, key);
    else if (is("boost", "frac_bits"))
        cfg.boost.frac_bits = static_cast<int>(parse_int(value, key));
    else if (is("boost", "loss")) {
        if (value == "squared")
            cfg.boost.loss = Loss::squared;
        else if (value == "logistic")
            cfg.boost.loss = Loss::logistic;
        else
            throw ConfigError("loss must be squared or logistic: " + value);
    } else if (is("select", "beta"))
        cfg.beta = parse_real(value, key);
    else if (is("select", "window_len"))
        cfg.window_len = static_cast<int>(parse_int(value, key));
    else if (is("select", "window_stride"))
        cfg.window_stride = static_cast<int>(parse_int(value, key));
    else if (is("select", "history_steps"))
        cfg.history_steps = static_cast<int>(parse_int(value, key));
    else if (is("select", "max_windows"))
        cfg.max_windows = static_cast<int>(parse_int(value, key));
    else if (is("select", "kernel_multipliers"))
        cfg.kernel_multipliers =
            parse_list<double>(value, key, [](auto& v, auto& k) {
                return parse_real(v, k);
            });
    else if (is("synth", "farms"))
        cfg.synth.n_farms = static_cast<int>(parse_int(value, key));
    else if (is("synth", "steps"))
        cfg.synth.steps = static_cast<int>(parse_int(value, key));
    else if (is("synth", "spatial_corr"))
        cfg.synth.spatial_corr = parse_real(value, key);
    else if (is("synth", "independent"))
        cfg.synth.n_independent = static_cast<int>(parse_int(value, key));
    else if (is("net", "mode"))
        cfg.mode = value;
    else if (is("net", "host"))
        cfg.host = value;
    else if (is("net", "base_port"))
        cfg.base_port = static_cast<int>(parse_int(value, key));
    else
        throw ConfigError("unknown config key [" + section + "] " + key);
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t cmt = line.find_first_of("#;");
        if (cmt != std::string::npos) line = line.substr(0, cmt);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("bad section header at line " +
                                  std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " +
                              std::to_string(lineno));
        apply_config_line(cfg, section, trim(line.substr(0, eq)),
                          trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

std::string show_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[run]\n"
       << "seed = " << cfg.seed << "\n"
       << "train_frac = " << cfg.train_frac << "\n"
       << "\n[data]\n"
       << "capacity = " << cfg.capacity << "\n"
       << "lags = " << cfg.lags << "\n"
       << "nwp_steps = " << cfg.nwp_steps << "\n"
       << "nwp_vars = " << cfg.nwp_vars << "\n"
       << "horizons = ";
    for (size_t i = 0; i < cfg.horizons.size(); ++i)
        os << (i ? "," : "") << cfg.horizons[i];
    os << "\n\n[boost]\n"
       << "trees = " << cfg.boost.trees << "\n"
       << "depth = " << cfg.boost.depth << "\n"
       << "bins = " << cfg.boost.bins << "\n"
       << "gamma = " << cfg.boost.gamma << "\n"
       << "lambda = " << cfg.boost.lambda << "\n"
       << "eta = " << cfg.boost.eta << "\n"
       << "frac_bits = " << cfg.boost.frac_bits << "\n"
       << "loss = "
       << (cfg.boost.loss == Loss::squared ? "squared" : "logistic") << "\n"
       << "\n[select]\n"
       << "beta = " << cfg.beta << "\n"
       << "window_len = " << cfg.window_len << "\n"
       << "window_stride = " << cfg.window_stride << "\n"
       << "history_steps = " << cfg.history_steps << "\n"
       << "max_windows = " << cfg.max_windows << "\n"
       << "kernel_multipliers = ";
    for (size_t i = 0; i < cfg.kernel_multipliers.size(); ++i)
        os << (i ? "," : "") << cfg.kernel_multipliers[i];
    os << "\n\n[synth]\n"
       << "farms = " << cfg.synth.n_farms << "\n"
       << "steps = " << cfg.synth.steps << "\n"
       << "spatial_corr = " << cfg.synth.spatial_corr << "\n"
       << "independent = " << cfg.synth.n_independent << "\n"
       << "\n[net]\n"
       << "mode = " << cfg.mode << "\n"
       << "host = " << cfg.host << "\n"
       << "base_port = " << cfg.base_port << "\n";
    return os.str();
}

}  // namespace windmpc
