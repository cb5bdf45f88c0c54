#include "ddm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "ddm/errors.hpp"
#include "ddm/rng.hpp"

namespace ddm {

namespace {

constexpr double kDivergenceLimit = 1e6;

double fwd(const StepGrid& g, std::size_t k) { return std::max(0.0, g.T - g.ts[k]); }

void finish_grid(StepGrid& g) {
    g.ts.assign(g.gammas.size() + 1, 0.0);
    for (std::size_t k = 0; k < g.gammas.size(); ++k) g.ts[k + 1] = g.ts[k] + g.gammas[k];
    g.ts.back() = g.T;
}

void check_state(const Eigen::VectorXd& y, std::size_t step) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i]) || std::abs(y[i]) > kDivergenceLimit) {
            std::ostringstream os;
            os << "backward iterate left [-1e6, 1e6] at step " << step << " (component " << i << " = " << y[i]
               << ")";
            throw DivergedError(os.str(), step);
        }
    }
}

Eigen::MatrixXd draw_noise(int d, int K, std::uint64_t seed) {
    Stream rng(seed);
    Eigen::MatrixXd z(d, K);
    for (int j = 0; j < K; ++j)
        for (int i = 0; i < d; ++i) z(i, j) = rng.normal();
    return z;
}

// Noise column used by step k (end-aligned).
Eigen::VectorXd noise_for(const Eigen::MatrixXd& z, int k) { return z.col(z.cols() - 1 - k); }

Eigen::VectorXd step(const ScoreField& f, const StepCoeffs& c, double t_fwd, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& z, Scheme scheme) {
    const Eigen::VectorXd drift = y + 2.0 * f.score(t_fwd, y);
    if (scheme == Scheme::EI) return y + c.gamma1 * drift + std::sqrt(2.0 * c.gamma2) * z;
    return y + c.gamma * c.beta * drift + std::sqrt(2.0 * c.beta * c.gamma) * z;
}

}  // namespace

StepGrid make_stepgrid(const NoiseSchedule& sched, double T, double eps, double delta) {
    if (!(eps > 0.0 && eps < T)) throw ConfigError("make_stepgrid needs 0 < eps < T");
    if (!(delta > 0.0 && delta <= 0.5)) throw ConfigError("make_stepgrid needs 0 < delta <= 1/2");
    if (T > sched.T() * (1.0 + 1e-15)) throw ConfigError("grid horizon exceeds the schedule horizon");
    StepGrid g;
    g.T = T;
    g.eps = eps;
    g.delta = delta;
    std::vector<double> rev{eps};  // gamma_K, gamma_{K-1}, ...
    double s = eps;                // T - t_{k+1}
    while (s < T) {
        const double room = T - s;
        double gam;
        if (sched.kind() == NoiseSchedule::Kind::Constant) {
            gam = delta / (sched.beta0() + 1.0 / (2.0 * s));
        } else {
            const double s2 = sched.sigma2(s);
            // a hair inside delta so the audit on cumulative ts never sees a rounding overshoot
            const double target = delta * (1.0 - 1e-10);
            auto ok = [&](double x) { return x * sched.beta(std::min(T, s + x)) / s2 <= target; };
            if (ok(room)) {
                gam = room;
            } else {
                double lo = 0.0, hi = room;
                for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (ok(mid) ? lo : hi) = mid;
                }
                gam = lo;
            }
        }
        if (!(gam > 0.0)) throw ConfigError("make_stepgrid: A4 admits no positive step");
        if (gam >= room) {
            rev.push_back(room);
            break;
        }
        rev.push_back(gam);
        s += gam;
    }
    g.gammas.assign(rev.rbegin(), rev.rend());
    finish_grid(g);
    return g;
}

StepGrid grid_from_steps(const NoiseSchedule& sched, std::vector<double> gammas) {
    if (gammas.size() < 2) throw ConfigError("a grid needs at least one step before eps");
    for (double v : gammas)
        if (!(v > 0.0)) throw ConfigError("step sizes must be positive");
    StepGrid g;
    g.gammas = std::move(gammas);
    g.eps = g.gammas.back();
    g.T = 0.0;
    for (double v : g.gammas) g.T += v;
    if (g.T > sched.T() * (1.0 + 1e-12)) throw ConfigError("grid horizon exceeds the schedule horizon");
    g.T = std::min(g.T, sched.T());
    finish_grid(g);
    g.delta = audit_a4(sched, g).max_ratio;
    return g;
}

StepGrid uniform_grid(const NoiseSchedule& sched, double T, double eps, int K) {
    if (!(eps > 0.0 && eps < T)) throw ConfigError("uniform_grid needs 0 < eps < T");
    if (K < 1) throw ConfigError("uniform_grid needs K >= 1");
    std::vector<double> gam(static_cast<std::size_t>(K), (T - eps) / K);
    gam.push_back(eps);
    StepGrid g = grid_from_steps(sched, std::move(gam));
    g.T = T;
    g.ts.back() = T;
    return g;
}

A4Audit audit_a4(const NoiseSchedule& sched, const StepGrid& grid) {
    A4Audit a;
    a.worst_margin = std::numeric_limits<double>::infinity();
    const int K = grid.K();
    for (int k = 0; k < K; ++k) {
        const double ratio = grid.gammas[k] * sched.beta(fwd(grid, k)) / sched.sigma2(fwd(grid, k + 1));
        const double margin = grid.delta - ratio;
        a.max_ratio = std::max(a.max_ratio, ratio);
        if (margin < a.worst_margin) {
            a.worst_margin = margin;
            a.worst_k = k;
        }
    }
    a.pass = grid.delta <= 0.5 && a.worst_margin >= -1e-12 * grid.delta;
    return a;
}

StepCoeffs step_coeffs(const NoiseSchedule& sched, const StepGrid& grid, int k) {
    StepCoeffs c;
    const double hi = fwd(grid, k), lo = fwd(grid, k + 1);
    c.gamma = grid.gammas[k];
    c.g = sched.integral_beta(lo, hi);
    c.beta = sched.beta(hi);
    c.gamma1 = std::expm1(c.g);
    c.gamma2 = 0.5 * std::expm1(2.0 * c.g);
    return c;
}

namespace {

Trajectory run(const ScoreField& field, const StepGrid& grid, const Eigen::VectorXd& y0, std::uint64_t seed,
               Scheme scheme) {
    if (y0.size() != field.dim()) throw DomainError("y0 dimension does not match the field");
    const NoiseSchedule& sched = field.schedule();
    const int K = grid.K();
    const Eigen::MatrixXd z = draw_noise(field.dim(), K, seed);
    Trajectory tr;
    tr.seed = seed;
    tr.grid = grid;
    tr.states.reserve(static_cast<std::size_t>(K) + 1);
    tr.states.push_back(y0);
    check_state(y0, 0);
    for (int k = 0; k < K; ++k) {
        const StepCoeffs c = step_coeffs(sched, grid, k);
        tr.states.push_back(step(field, c, fwd(grid, k), tr.states.back(), noise_for(z, k), scheme));
        check_state(tr.states.back(), static_cast<std::size_t>(k) + 1);
    }
    return tr;
}

int worker_count(int requested, std::size_t jobs) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    n = std::max(1, n);
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

// Runs body(i) for i in [0, n) on a fixed partition into contiguous chunks.
template <class F>
void parallel_for(std::size_t n, int threads, F body) {
    const int w = worker_count(threads, n);
    if (w == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(static_cast<std::size_t>(w));
    for (int j = 0; j < w; ++j) {
        pool.emplace_back([&, j] {
            const std::size_t lo = n * static_cast<std::size_t>(j) / static_cast<std::size_t>(w);
            const std::size_t hi = n * static_cast<std::size_t>(j + 1) / static_cast<std::size_t>(w);
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errs[static_cast<std::size_t>(j)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace

Trajectory backward(const ScoreField& field, const StepGrid& grid, const Eigen::VectorXd& y0, std::uint64_t seed,
                    Scheme scheme) {
    return run(field, grid, y0, seed, scheme);
}

Trajectory backward_ei(const ScoreField& field, const StepGrid& grid, const Eigen::VectorXd& y0,
                       std::uint64_t seed) {
    return run(field, grid, y0, seed, Scheme::EI);
}

Trajectory backward_em(const ScoreField& field, const StepGrid& grid, const Eigen::VectorXd& y0,
                       std::uint64_t seed) {
    return run(field, grid, y0, seed, Scheme::EM);
}

Batch sample_backward(const ScoreField& field, const StepGrid& grid, std::size_t n, std::uint64_t seed,
                      const BatchOptions& opt) {
    if (opt.init == Init::ForwardLaw && opt.target == nullptr)
        throw ConfigError("forward-law initialization needs a target");
    const int d = field.dim();
    const double mT = field.schedule().m(grid.T);
    const double sT = std::sqrt(field.schedule().sigma2(grid.T));
    Batch b;
    b.terminal.resize(d, static_cast<Eigen::Index>(n));
    if (opt.keep_paths) b.paths.resize(n);
    parallel_for(n, opt.threads, [&](std::size_t i) {
        const std::uint64_t si = derive_seed(seed, i);
        Stream init(derive_seed(si, 0));
        Eigen::VectorXd y0;
        if (opt.init == Init::StandardNormal) {
            y0 = init.normal_vec(d);
        } else {
            const Eigen::VectorXd x0 = opt.target->sample_one(init);
            y0 = mT * x0 + sT * init.normal_vec(d);
        }
        Trajectory tr = run(field, grid, y0, derive_seed(si, 1), opt.scheme);
        b.terminal.col(static_cast<Eigen::Index>(i)) = tr.states.back();
        if (opt.keep_paths) b.paths[i] = std::move(tr);
    });
    return b;
}

Cloud forward_sample(const CompactTarget& target, const NoiseSchedule& sched, double t, std::size_t n,
                     std::uint64_t seed) {
    const double m = sched.m(t);
    const double s = std::sqrt(sched.sigma2(t));
    Cloud x = target.sample(n, derive_seed(seed, 0));
    Stream rng(derive_seed(seed, 1));
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = m * x(i, j) + s * rng.normal();
    return x;
}

OneStepGap one_step_gap(const ScoreField& field, double t0, const Eigen::VectorXd& y0, double gamma,
                        std::size_t n_pairs, std::uint64_t seed) {
    const NoiseSchedule& sched = field.schedule();
    if (!(gamma > 0.0 && gamma < t0)) throw DomainError("one_step_gap needs 0 < gamma < t0");
    StepCoeffs c;
    c.gamma = gamma;
    c.g = sched.integral_beta(t0 - gamma, t0);
    c.beta = sched.beta(t0);
    c.gamma1 = std::expm1(c.g);
    c.gamma2 = 0.5 * std::expm1(2.0 * c.g);
    Stream rng(seed);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(y0.size());
    double sq = 0.0;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const Eigen::VectorXd z = rng.normal_vec(y0.size());
        for (double sgn : {1.0, -1.0}) {
            const Eigen::VectorXd diff =
                step(field, c, t0, y0, sgn * z, Scheme::EI) - step(field, c, t0, y0, sgn * z, Scheme::EM);
            sum += diff;
            sq += diff.squaredNorm();
        }
    }
    const double n = 2.0 * static_cast<double>(n_pairs);
    return {(sum / n).norm(), std::sqrt(sq / n)};
}

TangentRecord tangent_flow(const ScoreField& field, double T, double s, double t, const Eigen::VectorXd& x,
                           std::uint64_t seed, double delta, bool noiseless) {
    if (field.is_perturbed()) throw UnsupportedOperation("tangent_flow needs the exact Hessian");
    if (!(0.0 <= s && s <= t && t < T)) throw DomainError("tangent_flow needs 0 <= s <= t < T");
    const NoiseSchedule& sched = field.schedule();
    const int d = field.dim();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    Stream rng(seed);
    TangentRecord rec;
    Eigen::VectorXd y = x;
    Eigen::MatrixXd J = I;
    double u = s;
    rec.u.push_back(u);
    rec.norm.push_back(1.0);
    auto A = [&](double uu, const Eigen::VectorXd& yy) {
        const double tf = T - uu;
        return (sched.beta(tf) * (I + 2.0 * field.hessian(tf, yy))).eval();
    };
    while (u < t) {
        const double tf = T - u;
        const double b = sched.beta(tf);
        const double h1 = 0.25 * delta * sched.sigma2(tf) / b;
        double h = 0.25 * delta * sched.sigma2(std::max(T - t, tf - h1)) / b;
        if (u + h >= t || t - (u + h) < 1e-12 * t) h = t - u;
        const double g = sched.integral_beta(tf - h, tf);
        Eigen::VectorXd ynew = std::exp(g) * y + std::expm1(g) * 2.0 * field.score(tf, y);
        if (!noiseless) ynew += std::sqrt(std::expm1(2.0 * g)) * rng.normal_vec(d);
        const Eigen::MatrixXd Jh = J + 0.5 * h * A(u, y) * J;
        J = J + h * A(u + 0.5 * h, 0.5 * (y + ynew)) * Jh;
        y = ynew;
        u += h;
        check_state(y, rec.u.size());
        rec.u.push_back(u);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        rec.norm.push_back(svd.singularValues()(0));
    }
    rec.jacobian = J;
    rec.y = y;
    return rec;
}

ThresholdedPair thresholded_pair(const ScoreField& exact, const ScoreField& approx, double zeta, double M,
                                 const StepGrid& grid, const Eigen::VectorXd& y0, std::uint64_t seed) {
    if (!(zeta > 0.0 && zeta <= 1.0)) throw DomainError("zeta must lie in (0, 1]");
    const NoiseSchedule& sched = approx.schedule();
    const int K = grid.K();
    const Eigen::MatrixXd z = draw_noise(approx.dim(), K, seed);
    ThresholdedPair out;
    for (Trajectory* tr : {&out.y, &out.ystar}) {
        tr->seed = seed;
        tr->grid = grid;
        tr->states.push_back(y0);
    }
    bool switched = false;
    for (int k = 0; k < K; ++k) {
        const double tf = fwd(grid, k);
        const StepCoeffs c = step_coeffs(sched, grid, k);
        const Eigen::VectorXd& yk = out.y.states.back();
        if (!switched) {
            const double err = (approx.score(tf, yk) - exact.score(tf, yk)).norm();
            if (err > (M / zeta) / sched.sigma2(tf) * (1.0 + 1e-12)) {
                switched = true;
                out.divergence_step = k;
            }
        }
        const Eigen::VectorXd zk = noise_for(z, k);
        out.y.states.push_back(step(approx, c, tf, yk, zk, Scheme::EI));
        out.ystar.states.push_back(step(switched ? exact : approx, c, tf, out.ystar.states.back(), zk, Scheme::EI));
        check_state(out.y.states.back(), static_cast<std::size_t>(k) + 1);
        check_state(out.ystar.states.back(), static_cast<std::size_t>(k) + 1);
    }
    return out;
}

std::vector<DdpmRow> ddpm_convert(const NoiseSchedule& sched, const StepGrid& grid) {
    const int K = grid.K();
    std::vector<DdpmRow> rows;
    double log_bar = 0.0;
    for (int k = 0; k <= K; ++k) {
        const double hi = fwd(grid, static_cast<std::size_t>(K - k));
        const double lo = fwd(grid, static_cast<std::size_t>(K + 1 - k));
        const double g = sched.integral_beta(lo, hi);
        DdpmRow r;
        r.k = k;
        r.t = hi;
        r.alpha = std::exp(-2.0 * g);
        r.beta_ddpm = -std::expm1(-2.0 * g);
        log_bar += -2.0 * g;
        r.alpha_bar = std::exp(log_bar);
        r.m2 = sched.m(hi) * sched.m(hi);
        rows.push_back(r);
    }
    return rows;
}

double moment_bound_K0(int d, double diam) { return 5.0 * d + 320.0 * (1.0 + diam) * (1.0 + diam); }

double increment_bound_L0(int d, double diam) { return 64.0 * d + 20544.0 * (1.0 + diam) * (1.0 + diam); }

MomentAudit moment_audit(const std::vector<Trajectory>& paths, double diam) {
    MomentAudit a;
    if (paths.empty()) throw DomainError("moment_audit needs trajectories");
    const std::size_t len = paths.front().states.size();
    a.second_moment.assign(len, 0.0);
    for (const auto& p : paths) {
        if (p.states.size() != len) throw DomainError("trajectories have different lengths");
        for (std::size_t k = 0; k < len; ++k) a.second_moment[k] += p.states[k].squaredNorm();
    }
    for (auto& v : a.second_moment) v /= static_cast<double>(paths.size());
    const auto it = std::max_element(a.second_moment.begin(), a.second_moment.end());
    a.max_moment = *it;
    a.argmax_k = static_cast<int>(it - a.second_moment.begin());
    a.K0 = moment_bound_K0(static_cast<int>(paths.front().states.front().size()), diam);
    a.pass = a.max_moment <= a.K0;
    return a;
}

IncrementAudit increment_audit(const ScoreField& field, const std::vector<Trajectory>& paths, double diam,
                               std::uint64_t seed) {
    if (paths.empty()) throw DomainError("increment_audit needs trajectories");
    const StepGrid& grid = paths.front().grid;
    const NoiseSchedule& sched = field.schedule();
    const int K = grid.K();
    const int d = field.dim();
    const double L0 = increment_bound_L0(d, diam);
    IncrementAudit a;
    a.mid_increment.assign(static_cast<std::size_t>(K), 0.0);
    Stream rng(seed);
    for (int k = 0; k < K; ++k) {
        const double tf = fwd(grid, k);
        const double gm = sched.integral_beta(tf - 0.5 * grid.gammas[k], tf);
        for (const auto& p : paths) {
            const Eigen::VectorXd& y = p.states[static_cast<std::size_t>(k)];
            const Eigen::VectorXd inc = std::expm1(gm) * (y + 2.0 * field.score(tf, y)) +
                                        std::sqrt(std::expm1(2.0 * gm)) * rng.normal_vec(d);
            a.mid_increment[static_cast<std::size_t>(k)] += inc.squaredNorm();
        }
        a.mid_increment[static_cast<std::size_t>(k)] /= static_cast<double>(paths.size());
        a.bound.push_back(L0 * sched.beta(tf) * grid.gammas[k]);
        a.worst_ratio = std::max(a.worst_ratio, a.mid_increment[static_cast<std::size_t>(k)] / a.bound.back());
    }
    a.pass = a.worst_ratio <= 1.0;
    return a;
}

}  // namespace ddm
