#include "ddm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ddm/errors.hpp"
#include "ddm/rng.hpp"

namespace ddm {

std::string method_name(W1Method m) {
    switch (m) {
        case W1Method::Exact1D: return "exact1d";
        case W1Method::ExactAssignment: return "exact_assignment";
        case W1Method::Sliced: return "sliced";
    }
    return "unknown";
}

W1Estimate w1_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("w1_1d needs non-empty samples");
    if (a.size() != b.size()) throw DomainError("w1_1d needs equal sample counts");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return {s / static_cast<double>(a.size()), W1Method::Exact1D, 0, 0.0};
}

// Shortest augmenting paths with potentials, O(n^3).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw DomainError("assignment needs a square cost matrix");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col(n);
    for (int j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
    return col;
}

W1Estimate w1_exact(const Cloud& a, const Cloud& b) {
    if (a.cols() == 0 || b.cols() == 0) throw DomainError("w1_exact needs non-empty samples");
    if (a.cols() != b.cols()) throw DomainError("w1_exact needs equal sample counts");
    if (a.rows() != b.rows()) throw DomainError("w1_exact needs equal dimensions");
    if (a.cols() > 1024) throw DomainError("w1_exact is capped at n = 1024; use w1_sliced");
    const Eigen::Index n = a.cols();
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) c(i, j) = (a.col(i) - b.col(j)).norm();
    const std::vector<int> col = solve_assignment(c);
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += c(i, col[static_cast<std::size_t>(i)]);
    return {s / static_cast<double>(n), W1Method::ExactAssignment, 0, 0.0};
}

W1Estimate w1_sliced(const Cloud& a, const Cloud& b, int n_proj, std::uint64_t seed) {
    if (n_proj < 1) throw DomainError("w1_sliced needs n_proj >= 1");
    if (a.rows() != b.rows()) throw DomainError("w1_sliced needs equal dimensions");
    std::vector<double> vals(static_cast<std::size_t>(n_proj));
    for (int j = 0; j < n_proj; ++j) {
        Stream rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
        Eigen::VectorXd th = rng.normal_vec(a.rows());
        th.normalize();
        const Eigen::VectorXd pa = a.transpose() * th, pb = b.transpose() * th;
        vals[static_cast<std::size_t>(j)] = w1_1d({pa.data(), pa.data() + pa.size()}, {pb.data(), pb.data() + pb.size()}).value;
    }
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n_proj;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double se = n_proj > 1 ? std::sqrt(ss / (n_proj - 1) / n_proj) : 0.0;
    return {mean, W1Method::Sliced, n_proj, se};
}

namespace {

W1Estimate w1_equal(const Cloud& a, const Cloud& b, std::uint64_t seed) {
    if (a.rows() == 1) {
        return w1_1d({a.data(), a.data() + a.cols()}, {b.data(), b.data() + b.cols()});
    }
    if (a.rows() <= 8 && a.cols() <= 1024) return w1_exact(a, b);
    return w1_sliced(a, b, 256, seed);
}

}  // namespace

W1Estimate w1(const Cloud& a, const Cloud& b, std::uint64_t seed) {
    if (a.rows() != b.rows()) throw DomainError("w1 needs equal dimensions");
    if (a.cols() == 0 || b.cols() == 0) throw DomainError("w1 needs non-empty samples");
    if (a.cols() == b.cols()) return w1_equal(a, b, seed);
    const bool a_small = a.cols() < b.cols();
    const Cloud& small = a_small ? a : b;
    const Cloud& big = a_small ? b : a;
    std::vector<double> vals;
    W1Estimate out;
    for (int r = 0; r < 16; ++r) {
        Stream rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(r)));
        Cloud sub(big.rows(), small.cols());
        for (Eigen::Index j = 0; j < small.cols(); ++j)
            sub.col(j) = big.col(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(big.cols()))));
        const W1Estimate e = w1_equal(small, sub, derive_seed(seed, r));
        out.method = e.method;
        out.n_projections = e.n_projections;
        vals.push_back(e.value);
    }
    std::sort(vals.begin(), vals.end());
    out.value = 0.5 * (vals[7] + vals[8]);
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / 16.0;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    out.std_err = std::sqrt(ss / 15.0);
    return out;
}

SupportDistance support_distance(const Cloud& samples, const CompactTarget& target) {
    SupportDistance s;
    if (samples.cols() == 0) return s;
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        const Eigen::VectorXd x = samples.col(j);
        const double dist = (x - target.project(x)).norm();
        s.mean += dist;
        s.max = std::max(s.max, dist);
    }
    s.mean /= static_cast<double>(samples.cols());
    return s;
}

}  // namespace ddm
