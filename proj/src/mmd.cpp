#include "windmpc/mmd.hpp"

#include <algorithm>
#include <cmath>

namespace windmpc {

SampleSet power_windows(const FarmSeries& s, int L, int stride, int history,
                        int cap) {
    if (L < 1 || stride < 1 || cap < 1)
        throw ConfigError("window parameters must be >= 1");
    const Eigen::Index T = s.steps();
    const Eigen::Index start = std::max<Eigen::Index>(0, T - history);

    std::vector<Eigen::Index> offsets;
    for (Eigen::Index t = start; t + L <= T; t += stride) {
        bool ok = true;
        for (int a = 0; a < L && ok; ++a)
            if (std::isnan(s.power(t + a))) ok = false;
        if (ok) offsets.push_back(t);
    }
    if (offsets.empty())
        throw EmptySetError("no complete power windows in " + s.farm_id);

    std::vector<Eigen::Index> pick;
    const Eigen::Index n = static_cast<Eigen::Index>(offsets.size());
    if (n <= cap) {
        pick = offsets;
    } else {
        pick.reserve(cap);  // even deterministic subsample
        for (Eigen::Index i = 0; i < cap; ++i)
            pick.push_back(offsets[(i * n) / cap]);
    }

    SampleSet set;
    set.windows.resize(static_cast<Eigen::Index>(pick.size()), L);
    for (size_t r = 0; r < pick.size(); ++r)
        for (int a = 0; a < L; ++a)
            set.windows(static_cast<Eigen::Index>(r), a) =
                s.power(pick[r] + a);
    return set;
}

double median_heuristic(const std::vector<SampleSet>& sets, int max_rows) {
    Eigen::Index total = 0;
    for (const auto& s : sets) total += s.size();
    if (total < 2) throw EmptySetError("median heuristic needs >= 2 windows");
    const Eigen::Index cols = sets.front().windows.cols();

    Eigen::MatrixXd pool(std::min<Eigen::Index>(total, max_rows), cols);
    Eigen::Index written = 0, seen = 0;
    for (const auto& s : sets) {
        for (Eigen::Index r = 0; r < s.size(); ++r, ++seen) {
            // Even deterministic subsample across the pooled rows.
            if ((seen * pool.rows()) / total !=
                ((seen + 1) * pool.rows()) / total) {
                if (s.windows.cols() != cols)
                    throw ShapeError("window lengths differ across farms");
                pool.row(written++) = s.windows.row(r);
            }
        }
    }
    pool.conservativeResize(written, cols);
    if (written < 2) throw EmptySetError("median heuristic needs >= 2 windows");

    std::vector<double> dists;
    dists.reserve(static_cast<size_t>(written) * (written - 1) / 2);
    for (Eigen::Index i = 0; i < written; ++i)
        for (Eigen::Index j = i + 1; j < written; ++j)
            dists.push_back((pool.row(i) - pool.row(j)).norm());
    size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
    double med = dists[mid];
    if (med == 0.0)
        throw DegenerateError("median pairwise distance is 0; kernel bandwidth undefined");
    return med;
}

KernelSpec kernel_from_data(const std::vector<SampleSet>& sets) {
    KernelSpec k;
    k.base_bandwidth = median_heuristic(sets);
    return k;
}

namespace {

double kernel_sum_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const KernelSpec& k) {
    // Mean over all pairs of the summed Gaussian kernel exp(-d^2/(2*bw^2)).
    Eigen::VectorXd an = a.rowwise().squaredNorm();
    Eigen::VectorXd bn = b.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = (-2.0 * (a * b.transpose())).colwise() + an;
    d2.rowwise() += bn.transpose();
    d2 = d2.cwiseMax(0.0);

    double acc = 0.0;
    for (double q : k.multipliers) {
        const double bw = q * k.base_bandwidth;
        if (!(bw > 0.0)) throw ConfigError("kernel bandwidth must be > 0");
        acc += (d2 / (-2.0 * bw * bw)).array().exp().mean();
    }
    return acc;
}

}  // namespace

double mmd2(const SampleSet& d1, const SampleSet& d2, const KernelSpec& k) {
    if (d1.size() == 0 || d2.size() == 0)
        throw EmptySetError("mmd2 over empty sample set");
    if (d1.windows.cols() != d2.windows.cols())
        throw ShapeError("window lengths differ");
    const double kxx = kernel_sum_mean(d1.windows, d1.windows, k);
    const double kyy = kernel_sum_mean(d2.windows, d2.windows, k);
    const double kxy = kernel_sum_mean(d1.windows, d2.windows, k);
    return std::max(0.0, kxx + kyy - 2.0 * kxy);
}

Adjacency adjacency(const std::vector<SampleSet>& farms, double beta,
                    const KernelSpec& k) {
    const int n = static_cast<int>(farms.size());
    if (n < 2) throw ConfigError("adjacency needs at least 2 farms");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");

    Adjacency adj;
    adj.beta = beta;
    adj.m2 = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double v = mmd2(farms[i], farms[j], k);
            adj.m2(i, j) = v;
            adj.m2(j, i) = v;
        }

    double sum = 0.0, sum2 = 0.0;
    const int pairs = n * (n - 1) / 2;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            sum += adj.m2(i, j);
            sum2 += adj.m2(i, j) * adj.m2(i, j);
        }
    adj.mean = sum / pairs;
    double var = sum2 / pairs - adj.mean * adj.mean;
    adj.sigma = std::sqrt(std::max(0.0, var));

    // With sigma = 0 the exponent degenerates gracefully: a zero
    // discrepancy maps to exactly 1 (identical farms stay fully adjacent),
    // a positive one to exp(-inf) = 0.
    const double s2 = adj.sigma * adj.sigma;
    adj.A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        adj.A(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double m2 = adj.m2(i, j);
            double a = 0.0;
            if (m2 <= beta * adj.mean)
                a = (m2 == 0.0) ? 1.0 : std::exp(-m2 / s2);
            adj.A(i, j) = a;
            adj.A(j, i) = a;
        }
    }
    return adj;
}

std::vector<int> select_participants(const Adjacency& adj, int target) {
    const int n = static_cast<int>(adj.A.rows());
    if (target < 0 || target >= n) throw ConfigError("target out of range");
    std::vector<int> picked;
    for (int j = 0; j < n; ++j)
        if (j != target && adj.A(target, j) != 0.0) picked.push_back(j);
    std::stable_sort(picked.begin(), picked.end(), [&](int a, int b) {
        if (adj.A(target, a) != adj.A(target, b))
            return adj.A(target, a) > adj.A(target, b);
        return a < b;
    });
    return picked;
}

std::vector<int> select_participants(const Adjacency& adj,
                                     const std::vector<int>& ids,
                                     int target_id) {
    if (static_cast<Eigen::Index>(ids.size()) != adj.A.rows())
        throw ShapeError("id list does not match adjacency size");
    int target = -1;
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == target_id) target = static_cast<int>(i);
    if (target < 0) throw ConfigError("target id not in id list");
    std::vector<int> idx = select_participants(adj, target);
    // Ascending-id tie-break applies to the external ids.
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (adj.A(target, a) != adj.A(target, b))
            return adj.A(target, a) > adj.A(target, b);
        return ids[a] < ids[b];
    });
    std::vector<int> out;
    for (int i : idx) out.push_back(ids[i]);
    return out;
}

}  // namespace windmpc
