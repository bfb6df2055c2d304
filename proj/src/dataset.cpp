#include "windmpc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "windmpc/prf.hpp"

namespace windmpc {

namespace {

constexpr int64_t kStep = 900;  // 15 minutes
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace

int64_t parse_timestamp(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
    char sep = 0;
    int got = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep,
                          &h, &mi, &se);
    if (got < 6 || (sep != 'T' && sep != ' '))
        throw FormatError("bad timestamp: " + text);
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = got >= 7 ? se : 0;
    time_t t = timegm(&tm);
    if (t == -1) throw FormatError("unrepresentable timestamp: " + text);
    return static_cast<int64_t>(t);
}

std::string format_timestamp(int64_t epoch_seconds) {
    time_t t = static_cast<time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec);
    return buf;
}

FarmSeries ingest_csv(const std::string& path, double capacity) {
    if (!(capacity > 0)) throw ConfigError("capacity must be > 0");
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open csv: " + path);

    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty csv: " + path);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& c : header) c = trim(c);
    if (header.size() < 2 || header[0] != "timestamp" || header[1] != "power")
        throw FormatError("bad csv header (want timestamp,power,nwp_1..): " +
                          path);
    const int k = static_cast<int>(header.size()) - 2;
    for (int j = 0; j < k; ++j)
        if (header[2 + j] != "nwp_" + std::to_string(j + 1))
            throw FormatError("bad nwp column name: " + header[2 + j]);

    std::vector<int64_t> ts;
    std::vector<double> pw;
    std::vector<std::vector<double>> nw;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != k + 2)
            throw FormatError("row " + std::to_string(lineno) + " has " +
                              std::to_string(cells.size()) + " cells, want " +
                              std::to_string(k + 2));
        int64_t t = parse_timestamp(trim(cells[0]));
        if (t % kStep != 0)
            throw GridError("off-grid timestamp at row " +
                            std::to_string(lineno) + ": " + trim(cells[0]));
        double p;
        try {
            p = std::stod(cells[1]);
        } catch (const std::exception&) {
            throw FormatError("bad power value at row " +
                              std::to_string(lineno));
        }
        // 1% tolerance band around [0, capacity]; inside it, clip; beyond
        // it, reject.
        if (std::isnan(p) || p < -0.01 * capacity || p > 1.01 * capacity)
            throw RangeError("power " + cells[1] + " outside [0, capacity] at row " +
                             std::to_string(lineno));
        p = std::min(std::max(p, 0.0), capacity);
        std::vector<double> row(k);
        for (int j = 0; j < k; ++j) {
            try {
                row[j] = std::stod(cells[2 + j]);
            } catch (const std::exception&) {
                throw FormatError("bad nwp value at row " +
                                  std::to_string(lineno));
            }
        }
        ts.push_back(t);
        pw.push_back(p / capacity);
        nw.push_back(std::move(row));
    }
    if (ts.empty()) throw FormatError("csv has no data rows: " + path);

    // Canonical grid from min to max timestamp; absent slots become gaps.
    int64_t lo = *std::min_element(ts.begin(), ts.end());
    int64_t hi = *std::max_element(ts.begin(), ts.end());
    const int64_t n = (hi - lo) / kStep + 1;
    FarmSeries s;
    s.farm_id = path;
    s.capacity = capacity;
    s.timestamps.resize(n);
    for (int64_t i = 0; i < n; ++i) s.timestamps[i] = lo + i * kStep;
    s.power = Eigen::VectorXd::Constant(n, kNaN);
    s.nwp = Eigen::MatrixXd::Constant(n, k, kNaN);
    for (size_t r = 0; r < ts.size(); ++r) {
        int64_t i = (ts[r] - lo) / kStep;
        if (!std::isnan(s.power(i)))
            throw GridError("duplicate timestamp " + format_timestamp(ts[r]));
        s.power(i) = pw[r];
        for (int j = 0; j < k; ++j) s.nwp(i, j) = nw[r][j];
    }
    return s;
}

void write_csv(const FarmSeries& s, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open csv for writing: " + path);
    os << "timestamp,power";
    for (int j = 0; j < s.nwp_vars(); ++j) os << ",nwp_" << (j + 1);
    os << "\n";
    os.precision(10);
    for (Eigen::Index i = 0; i < s.steps(); ++i) {
        if (std::isnan(s.power(i))) continue;  // gaps stay absent on disk
        os << format_timestamp(s.timestamps[i]) << ","
           << s.power(i) * s.capacity;
        for (int j = 0; j < s.nwp_vars(); ++j) os << "," << s.nwp(i, j);
        os << "\n";
    }
    if (!os) throw FormatError("csv write failed: " + path);
}

FeatureBuild build_features(const FarmSeries& s, int M, int N,
                            const std::vector<int>& horizons) {
    if (M < 1) throw ConfigError("M must be >= 1");
    if (N < 0) throw ConfigError("N must be >= 0");
    if (horizons.empty()) throw ConfigError("horizons must be non-empty");
    for (int h : horizons)
        if (h < 1) throw ConfigError("horizons must be >= 1");
    const int maxh = *std::max_element(horizons.begin(), horizons.end());
    const int k = s.nwp_vars();
    const Eigen::Index T = s.steps();
    const int look_ahead = std::max(N, maxh);
    if (T - M - look_ahead + 1 <= 0)
        throw LengthError("series too short: T=" + std::to_string(T) +
                          ", M=" + std::to_string(M) +
                          ", look-ahead=" + std::to_string(look_ahead));

    std::vector<int> anchors;
    for (Eigen::Index t = M - 1; t + look_ahead < T; ++t) {
        bool ok = true;
        for (int a = 0; a < M && ok; ++a)
            if (std::isnan(s.power(t - a))) ok = false;
        for (int u = 1; u <= N && ok; ++u)
            for (int j = 0; j < k && ok; ++j)
                if (std::isnan(s.nwp(t + u, j))) ok = false;
        for (int h : horizons)
            if (ok && std::isnan(s.power(t + h))) ok = false;
        if (ok) anchors.push_back(static_cast<int>(t));
    }
    if (anchors.empty()) throw LengthError("all candidate rows have gaps");

    FeatureBuild out;
    const Eigen::Index rows = static_cast<Eigen::Index>(anchors.size());
    out.features.X.resize(rows, M + N * k);
    out.labels.y.resize(rows, static_cast<Eigen::Index>(horizons.size()));
    out.labels.horizon_steps = horizons;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const int t = anchors[r];
        for (int a = 0; a < M; ++a)
            out.features.X(r, a) = s.power(t - (M - 1) + a);
        for (int u = 1; u <= N; ++u)
            for (int j = 0; j < k; ++j)
                out.features.X(r, M + (u - 1) * k + j) = s.nwp(t + u, j);
        for (size_t hi = 0; hi < horizons.size(); ++hi)
            out.labels.y(r, static_cast<Eigen::Index>(hi)) =
                s.power(t + horizons[hi]);
        out.features.sample_index.push_back(s.timestamps[t]);
    }
    out.labels.sample_index = out.features.sample_index;

    for (int a = M - 1; a >= 0; --a)
        out.features.feature_names.push_back("P[t-" + std::to_string(a) + "]");
    for (int u = 1; u <= N; ++u)
        for (int j = 0; j < k; ++j)
            out.features.feature_names.push_back(
                "V" + std::to_string(j + 1) + "[t+" + std::to_string(u) + "]");
    return out;
}

std::vector<int64_t> align_indices(
    const std::vector<const std::vector<int64_t>*>& indices) {
    if (indices.empty()) throw ConfigError("align needs at least one frame");
    std::vector<int64_t> acc = *indices[0];
    std::sort(acc.begin(), acc.end());
    for (size_t i = 1; i < indices.size(); ++i) {
        std::vector<int64_t> other = *indices[i];
        std::sort(other.begin(), other.end());
        std::vector<int64_t> next;
        std::set_intersection(acc.begin(), acc.end(), other.begin(),
                              other.end(), std::back_inserter(next));
        acc = std::move(next);
    }
    if (acc.empty())
        throw EmptyIntersectionError("no shared sample timestamps");
    return acc;
}

namespace {

std::vector<Eigen::Index> selection_rows(const std::vector<int64_t>& have,
                                         const std::vector<int64_t>& want) {
    std::unordered_map<int64_t, Eigen::Index> pos;
    for (size_t i = 0; i < have.size(); ++i)
        pos[have[i]] = static_cast<Eigen::Index>(i);
    std::vector<Eigen::Index> rows;
    rows.reserve(want.size());
    for (int64_t t : want) {
        auto it = pos.find(t);
        if (it == pos.end())
            throw EmptyIntersectionError("selected timestamp missing from frame");
        rows.push_back(it->second);
    }
    return rows;
}

}  // namespace

FeatureFrame apply_selection(const FeatureFrame& f,
                             const std::vector<int64_t>& index) {
    std::vector<Eigen::Index> rows = selection_rows(f.sample_index, index);
    FeatureFrame out;
    out.feature_names = f.feature_names;
    out.sample_index = index;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), f.X.cols());
    for (size_t r = 0; r < rows.size(); ++r)
        out.X.row(static_cast<Eigen::Index>(r)) = f.X.row(rows[r]);
    return out;
}

LabelFrame apply_selection(const LabelFrame& l,
                           const std::vector<int64_t>& index) {
    std::vector<Eigen::Index> rows = selection_rows(l.sample_index, index);
    LabelFrame out;
    out.horizon_steps = l.horizon_steps;
    out.sample_index = index;
    out.y.resize(static_cast<Eigen::Index>(rows.size()), l.y.cols());
    for (size_t r = 0; r < rows.size(); ++r)
        out.y.row(static_cast<Eigen::Index>(r)) = l.y.row(rows[r]);
    return out;
}

std::vector<FeatureFrame> align(const std::vector<FeatureFrame>& frames) {
    std::vector<const std::vector<int64_t>*> idx;
    for (const auto& f : frames) idx.push_back(&f.sample_index);
    std::vector<int64_t> shared = align_indices(idx);
    std::vector<FeatureFrame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(apply_selection(f, shared));
    return out;
}

// ---- synthetic cluster ---------------------------------------------------------

namespace {

// Stationary AR(1) with unit marginal variance.
std::vector<double> ar1_series(int steps, double phi, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(1.0 - phi * phi));
    std::normal_distribution<double> init(0.0, 1.0);
    std::vector<double> x(steps);
    double v = init(rng);
    for (int t = 0; t < steps; ++t) {
        x[t] = v;
        v = phi * v + gauss(rng);
    }
    return x;
}

double power_curve(double speed_z) {
    // Logistic curve from standardized wind speed to normalized power.
    return 1.0 / (1.0 + std::exp(-1.5 * speed_z));
}

}  // namespace

std::vector<FarmSeries> synth_cluster(const SynthSpec& spec) {
    if (spec.n_farms < 1) throw ConfigError("n_farms must be >= 1");
    if (spec.steps < 2) throw ConfigError("steps must be >= 2");
    if (!(spec.spatial_corr >= 0.0 && spec.spatial_corr < 1.0))
        throw ConfigError("spatial_corr must be in [0, 1)");
    if (spec.n_independent < 0 || spec.n_independent >= spec.n_farms)
        throw ConfigError("n_independent must be in [0, n_farms)");
    if (spec.nwp_vars < 1) throw ConfigError("nwp_vars must be >= 1");

    const int n_corr = spec.n_farms - spec.n_independent;
    const int lead = 8;  // extra latent history so lags never underflow
    const int total = spec.steps + lead;

    std::mt19937_64 latent_rng(derive_seed(spec.seed, "synth-latent"));
    std::vector<double> latent = ar1_series(total, 0.98, latent_rng);

    // Per-farm local wind fields, pre-generated so the target can blend
    // advected eddies from its upwind peers. Each farm keeps its own rng
    // stream; the AR(1) draw comes first so the stream layout is stable.
    std::vector<std::mt19937_64> farm_rng;
    std::vector<std::vector<double>> own(spec.n_farms);
    for (int f = 0; f < spec.n_farms; ++f) {
        farm_rng.emplace_back(
            derive_seed(spec.seed, "synth-farm-" + std::to_string(f)));
        const bool correlated = f < n_corr;
        // Independent farms run their own regimes: different persistence
        // (and below, power-curve offset and no diurnal term), so their
        // distribution — not just their correlation — differs from the
        // cluster's.
        const int regime = correlated ? 0 : (f - n_corr) + 1;
        const double phi_own = correlated ? 0.98 : 0.86 - 0.04 * (regime % 3);
        own[f] = ar1_series(total, phi_own, farm_rng[f]);
    }

    std::vector<FarmSeries> farms;
    farms.reserve(spec.n_farms);
    const double rho = spec.spatial_corr;
    for (int f = 0; f < spec.n_farms; ++f) {
        const bool correlated = f < n_corr;
        std::mt19937_64& rng = farm_rng[f];
        // The cluster's diurnal cycle belongs to the shared regional process,
        // so it scales away with spatial_corr -> 0 (uncorrelated farms must
        // actually decorrelate). Independent regimes carry no thermal cycle
        // at all (offshore/trade-wind sites): a deterministic cycle would act
        // as a shared clock and leak time-of-day information across regimes.
        const double diurnal_amp = correlated ? 0.6 * std::sqrt(rho) : 0.0;
        const double diurnal_phase = 0.0;
        const double curve_shift = correlated ? 0.0 : 0.8;
        // Farm 0 (the prediction target) sits downwind: it lags the regional
        // wind by 8 steps (2 h) while its peers lag by 0..2, so peer history
        // genuinely leads farm 0's near future.
        const int lag = correlated ? (f == 0 ? 8 : (f - 1) % 3) : 0;
        // The target's regional wind also blends eddies advected from each
        // upwind peer's local field (delay 8 steps), so every peer carries
        // lead information the others do not.
        const bool blend_eddies = correlated && f == 0 && n_corr > 1;
        const double eps = 0.3;
        const double eddy_norm =
            blend_eddies ? 1.0 / std::sqrt(double(n_corr - 1)) : 0.0;

        std::normal_distribution<double> nwp_noise(0.0, 0.35);
        std::uniform_real_distribution<double> dir0(0.0, 2.0 * M_PI);
        double direction = dir0(rng);
        std::normal_distribution<double> dir_step(0.0, 0.05);

        FarmSeries s;
        s.farm_id = "farm_" + std::to_string(f);
        s.capacity = spec.capacity;
        s.timestamps.resize(spec.steps);
        s.power.resize(spec.steps);
        s.nwp.resize(spec.steps, spec.nwp_vars);
        for (int t = 0; t < spec.steps; ++t) {
            const int u = t + lead;
            const double diurnal =
                diurnal_amp *
                std::sin(2.0 * M_PI * ((t % 96) / 96.0) + diurnal_phase);
            double speed;
            if (correlated) {
                double regional = latent[u - lag];
                if (blend_eddies) {
                    double eddy = 0.0;
                    for (int p = 1; p < n_corr; ++p) eddy += own[p][u - 8];
                    regional = std::sqrt(1.0 - eps) * regional +
                               std::sqrt(eps) * eddy_norm * eddy;
                }
                speed = std::sqrt(rho) * regional +
                        std::sqrt(1.0 - rho) * own[f][u] + diurnal;
            } else {
                speed = own[f][u] + diurnal;
            }
            s.timestamps[t] = spec.start_epoch + int64_t(t) * kStep;
            s.power(t) = power_curve(speed + curve_shift);
            // nwp_1 forecasts the farm's true wind; the rest encode a noisy
            // wind direction as sin/cos.
            s.nwp(t, 0) = speed + nwp_noise(rng);
            direction += dir_step(rng);
            if (spec.nwp_vars >= 2)
                s.nwp(t, 1) = std::sin(direction) + 0.1 * nwp_noise(rng);
            if (spec.nwp_vars >= 3)
                s.nwp(t, 2) = std::cos(direction) + 0.1 * nwp_noise(rng);
            for (int j = 3; j < spec.nwp_vars; ++j)
                s.nwp(t, j) = nwp_noise(rng);
        }
        farms.push_back(std::move(s));
    }

    // Site coordinates: the correlated cluster sits within ~80 km of the
    // target; the first three independent farms are placed close to the target
    // (think a ridge line or a coastal regime boundary) so geometric distance
    // alone mis-ranks them, the rest sit far away.
    std::mt19937_64 geo(derive_seed(spec.seed, "synth-geo"));
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    for (int f = 0; f < spec.n_farms; ++f) {
        if (f == 0) continue;  // target at the origin
        double r, a = ang(geo);
        if (f < n_corr)
            r = 30.0 + 50.0 * (double(f) / std::max(1, n_corr - 1));
        else if (f - n_corr < 3)
            r = 12.0 + 7.0 * (f - n_corr);
        else
            r = 220.0 + 40.0 * (f - n_corr);
        farms[f].coord_x = r * std::cos(a);
        farms[f].coord_y = r * std::sin(a);
    }
    return farms;
}

std::vector<FarmSeries> synth_cluster(int n_farms, int steps,
                                      double spatial_corr, uint64_t seed) {
    SynthSpec spec;
    spec.n_farms = n_farms;
    spec.steps = steps;
    spec.spatial_corr = spatial_corr;
    spec.seed = seed;
    return synth_cluster(spec);
}

}  // namespace windmpc
