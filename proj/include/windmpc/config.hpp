#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "windmpc/boost_core.hpp"
#include "windmpc/dataset.hpp"
#include "windmpc/errors.hpp"

namespace windmpc {

// Flat INI-style run configuration; every field has a default and is
// printable via show_config(). One seed fixes all randomness.
struct RunConfig {
    // [run]
    uint64_t seed = 1;
    double train_frac = 0.8;

    // [data]
    double capacity = 100.0;
    int lags = 16;          // M
    int nwp_steps = 16;     // N
    int nwp_vars = 3;       // k
    std::vector<int> horizons{4, 8, 12, 16};

    // [boost]
    BoostParams boost;

    // [select]
    double beta = 0.85;
    int window_len = 16;
    int window_stride = 4;
    int history_steps = 96 * 14;
    int max_windows = 512;
    std::vector<double> kernel_multipliers{0.25, 0.5, 1.0, 2.0, 4.0};

    // [synth]
    SynthSpec synth;

    // [net]
    std::string mode = "local";  // local | tcp
    std::string host = "127.0.0.1";
    int base_port = 0;  // 0 = pick free loopback ports

    void validate() const;
};

// Parses "key = value" lines under [section] headers; '#' and ';' start
// comments. Unknown section/key -> ConfigError.
RunConfig load_config(const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& section,
                       const std::string& key, const std::string& value);

// Every effective setting, ini-formatted (the --show-config output).
std::string show_config(const RunConfig& cfg);

}  // namespace windmpc
