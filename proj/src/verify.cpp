#include "ddm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <functional>
#include <future>
#include <set>
#include <thread>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ddm/bounds.hpp"
#include "ddm/errors.hpp"
#include "ddm/rng.hpp"

namespace ddm {

namespace {

constexpr double kSlack = 1e-9;

double integrate(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

}  // namespace

void CheckReport::record(const ProbeRecord& p, double slack) {
    if (probes == 0 || p.margin < worst_margin) worst_margin = p.margin;
    ++probes;
    if (p.margin < -slack) ++violations;
    details.push_back(p);
}

nlohmann::json to_json(const CheckReport& r) {
    nlohmann::json j;
    j["check_id"] = r.check_id;
    j["pass"] = r.pass();
    j["probes"] = r.probes;
    j["violations"] = r.violations;
    j["worst_margin"] = r.worst_margin;
    j["metrics"] = r.metrics;
    j["notes"] = r.notes;
    if (!r.error.empty()) j["error"] = r.error;
    // keep the ten tightest probes; the full list is large
    std::vector<ProbeRecord> d = r.details;
    std::sort(d.begin(), d.end(), [](const ProbeRecord& a, const ProbeRecord& b) { return a.margin < b.margin; });
    if (d.size() > 10) d.resize(10);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : d) arr.push_back({{"t", p.t}, {"x_norm", p.x_norm}, {"margin", p.margin}, {"what", p.what}});
    j["tightest"] = arr;
    return j;
}

std::vector<Probe> draw_probes(int d, double diam, double T, std::size_t n, std::uint64_t seed) {
    Stream rng(seed);
    const double lo = std::log(1e-3), hi = std::log(T);
    const double scale = 2.0 * (1.0 + diam);
    std::vector<Probe> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::exp(lo + (hi - lo) * rng.uniform());
        out.push_back({t, scale * rng.normal_vec(d)});
    }
    return out;
}

CheckReport check_C1(const CompactTarget& target, const NoiseSchedule& sched, std::size_t n_probes,
                     std::uint64_t seed, double corrupt) {
    CheckReport r;
    r.check_id = "C1/" + target.name();
    ScoreField f = ScoreField::exact(target, sched);
    if (corrupt > 0.0) {
        f = perturb(f, corrupt, PerturbMode::FixedDirection, Eigen::VectorXd::Unit(target.dim(), 0),
                    ErrorGrowth::Flat);
        r.notes.push_back("score corrupted by an offset of size corrupt / sigma^2 along e_1");
    }
    const double diam = target.diameter();
    r.metrics["diam"] = diam;
    for (const Probe& p : draw_probes(target.dim(), diam, sched.T(), n_probes, seed)) {
        const double m = sched.m(p.t), s2 = sched.sigma2(p.t);
        const Eigen::VectorXd s = f.score(p.t, p.x);
        const double xn = p.x.norm();
        const double inner_rhs = -xn * xn / s2 + m * diam * xn / s2;
        r.record({p.t, xn, inner_rhs - s.dot(p.x), "inner"}, kSlack);
        const double sq_rhs = 2.0 * xn * xn / (s2 * s2) + 2.0 * m * m * diam * diam / (s2 * s2);
        r.record({p.t, xn, sq_rhs - s.squaredNorm(), "square"}, kSlack);
    }
    return r;
}

namespace {

// Operator norm of a symmetric matrix through repeated normalized squaring of H^2.
double norm_by_squaring(const Eigen::MatrixXd& H) {
    Eigen::MatrixXd A = H * H;
    for (int i = 0; i < 64; ++i) {
        const double s = A.cwiseAbs().maxCoeff();
        if (s == 0.0) return 0.0;
        A /= s;
        A = (A * A).eval();
    }
    Eigen::Index j;
    A.colwise().norm().maxCoeff(&j);
    Eigen::VectorXd v = A.col(j).normalized();
    return std::sqrt(v.dot(H * H * v));
}

}  // namespace

CheckReport check_C2(const CompactTarget& target, const NoiseSchedule& sched, std::size_t n_probes,
                     std::uint64_t seed) {
    CheckReport r;
    r.check_id = "C2/" + target.name();
    const ScoreField f = ScoreField::exact(target, sched);
    const double diam = target.diameter();
    const int d = target.dim();
    Stream rng(derive_seed(seed, 1));
    double worst_cross = 0.0;
    for (const Probe& p : draw_probes(d, diam, sched.T(), n_probes, seed)) {
        const double m = sched.m(p.t), s2 = sched.sigma2(p.t);
        const Eigen::MatrixXd H = f.hessian(p.t, p.x);
        Eigen::MatrixXd M(d, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) M(i, j) = rng.normal();
        M /= M.norm();
        const double q = (M.transpose() * H * M).trace();
        const double q_rhs = -(1.0 - m * m * diam * diam / (2.0 * s2)) / s2;
        r.record({p.t, p.x.norm(), q_rhs - q, "quadratic"}, kSlack);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
        const double op = es.eigenvalues().cwiseAbs().maxCoeff();
        const double op2 = norm_by_squaring(H);
        worst_cross = std::max(worst_cross, std::abs(op - op2) / std::max(op, 1e-300));
        r.record({p.t, p.x.norm(), (1.0 + diam * diam) / (s2 * s2) - op, "operator"}, kSlack);
    }
    r.metrics["norm_cross_check_rel"] = worst_cross;
    if (worst_cross > 1e-8) {
        ++r.violations;
        r.notes.push_back("operator norms from squaring and eigensolver disagree beyond 1e-8");
    }
    return r;
}

CheckReport check_C3(const CompactTarget& target, const NoiseSchedule& sched, std::size_t n_probes,
                     std::uint64_t seed) {
    CheckReport r;
    r.check_id = "C3/" + target.name();
    const ScoreField f = ScoreField::exact(target, sched);
    const double diam = target.diameter();
    const int d = target.dim();

    // finite-difference gate at moderate t, where central differences are accurate
    const bool mixture = std::holds_alternative<ScoreField::EmpiricalBase>(f.base()) ||
                         std::holds_alternative<ScoreField::DiracBase>(f.base());
    double res_minus = 0.0, res_plus = 0.0;
    Stream g(derive_seed(seed, 7));
    for (int i = 0; i < 20; ++i) {
        const double t = 0.1 + 0.9 * g.uniform();
        const Eigen::VectorXd x = (1.0 + diam) * g.normal_vec(d);
        const double h = 1e-6;
        const Eigen::VectorXd fd = (f.score(t + h, x) - f.score(t - h, x)) / (2.0 * h);
        const double scale = std::max(1.0, fd.norm());
        res_minus = std::max(res_minus, (f.dt_score_branch(t, x, -1.0) - fd).norm() / scale);
        if (mixture) res_plus = std::max(res_plus, (f.dt_score_branch(t, x, +1.0) - fd).norm() / scale);
    }
    r.metrics["fd_residual_minus"] = res_minus;
    if (mixture) r.metrics["fd_residual_plus"] = res_plus;
    if (!(res_minus <= 1e-5)) {
        std::ostringstream os;
        os << "dt_score failed the finite-difference gate: residual(-) = " << res_minus
           << ", residual(+) = " << res_plus;
        r.error = os.str();
        return r;
    }
    if (mixture) {
        r.notes.push_back(res_plus > 1e-5 ? "inner-product sign resolved to the negative branch"
                                          : "both sign branches pass finite differences on these probes");
    }

    for (const Probe& p : draw_probes(d, diam, sched.T(), n_probes, seed)) {
        const double s2 = sched.sigma2(p.t);
        const double beta = sched.beta(p.t);
        const double xn = p.x.norm();
        const double rhs = beta / (s2 * s2 * s2) * (2.0 + diam * diam) * (diam + xn);
        r.record({p.t, xn, rhs - f.dt_score(p.t, p.x).norm(), "dt"}, kSlack);
    }
    return r;
}

CheckReport check_D1(const NoiseSchedule& sched, std::size_t n_probes, std::uint64_t seed) {
    CheckReport r;
    r.check_id = "D1";
    const double T = sched.T();
    Stream rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_probes; ++i) {
        double s = T * 0.99 * rng.uniform(), t = T * 0.99 * rng.uniform();
        if (s > t) std::swap(s, t);
        const D1Integrals c = closed_integrals_D1(sched, s, t);
        auto f1 = [&](double u) { return sched.beta(T - u) / sched.sigma2(T - u); };
        auto f2 = [&](double u) {
            const double m = sched.m(T - u), s2 = sched.sigma2(T - u);
            return sched.beta(T - u) * m * m / (s2 * s2);
        };
        const double q1 = integrate(f1, s, t), q2 = integrate(f2, s, t);
        const double e1 = std::abs(c.I1 - q1) / std::max(1.0, std::abs(q1));
        const double e2 = std::abs(c.I2 - q2) / std::max(1.0, std::abs(q2));
        worst = std::max({worst, e1, e2});
        r.record({t, 0.0, 1e-8 - std::max(e1, e2), "closed form vs quadrature"}, 0.0);
    }
    r.metrics["max_rel_error"] = worst;
    return r;
}

CheckReport check_D2(const NoiseSchedule& sched, std::size_t n_probes) {
    CheckReport r;
    r.check_id = "D2";
    const double bb = sched.beta_bar();
    const double T = sched.T();
    for (std::size_t i = 0; i < n_probes; ++i) {
        const double t = T * std::pow(1e-6, 1.0 - static_cast<double>(i + 1) / n_probes);
        const double s2 = sched.sigma2(t);
        r.record({t, 0.0, (2.0 * t * bb - s2) / (2.0 * t * bb), "sigma2 <= 2 t beta_bar"}, kSlack);
        r.record({t, 0.0, (1.0 + bb / (2.0 * t) - 1.0 / s2) / (1.0 + bb / (2.0 * t)), "1/sigma2 bound"}, kSlack);
    }
    r.metrics["beta_bar"] = bb;
    return r;
}

CheckReport check_D8(const CompactTarget& target, const NoiseSchedule& sched, double T, std::size_t n_pairs,
                     std::uint64_t seed) {
    CheckReport r;
    r.check_id = "D8/" + target.name();
    const double diam = target.diameter();
    const double bb = sched.beta_bar();
    double ts;
    try {
        ts = tstar(T, bb, diam);
    } catch (const DomainError& e) {
        r.error = e.what();
        return r;
    }
    r.metrics["t_star"] = ts;
    auto integrand = [&](double u) {
        const double tf = T - u;
        const double m = sched.m(tf), s2 = sched.sigma2(tf);
        return sched.beta(tf) * (1.0 - 2.0 / s2 + m * m * diam * diam / (s2 * s2));
    };
    auto beta_back = [&](double u) { return sched.beta(T - u); };
    // pointwise on [0, t*]
    for (int i = 0; i <= 200; ++i) {
        const double u = ts * i / 200.0;
        r.record({u, 0.0, -0.5 * beta_back(u) - integrand(u), "pointwise"}, kSlack);
    }
    Stream rng(seed);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const double s = ts * rng.uniform();
        const double lhs = integrate(integrand, s, ts);
        r.record({s, 0.0, -0.5 * integrate(beta_back, s, ts) - lhs, "[s, t*]"}, kSlack);
        const double t = ts + (T - ts) * (0.999 * rng.uniform());
        const double lhs2 = integrate(integrand, ts, t);
        const double rhs2 = 0.5 * diam * diam * (1.0 / sched.sigma2(T - t) - 1.0 / sched.sigma2(T - ts));
        r.record({t, 0.0, rhs2 - lhs2, "[t*, t]"}, kSlack);
    }
    return r;
}

CheckReport check_A2_report(const NoiseSchedule& sched, std::size_t grid_points) {
    CheckReport r;
    r.check_id = "A2";
    const A2Report a = check_A2(sched, grid_points);
    r.probes = grid_points;
    r.worst_margin = a.worst_margin;
    r.violations = a.pass ? 0 : 1;
    r.metrics["beta_bar"] = a.beta_bar;
    r.metrics["monotone"] = a.monotone ? 1.0 : 0.0;
    if (!a.note.empty()) r.notes.push_back(a.note);
    return r;
}


namespace {

// Runs body(i) for i in [0, n) across a few std::async workers with a fixed partition.
template <class F>
void run_parallel(std::size_t n, F body) {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
    std::vector<std::future<void>> jobs;
    for (std::size_t j = 0; j < w; ++j) {
        jobs.push_back(std::async(std::launch::async, [&, j] {
            for (std::size_t i = n * j / w; i < n * (j + 1) / w; ++i) body(i);
        }));
    }
    for (auto& f : jobs) f.get();
}

}  // namespace

CheckReport check_prop6(const CompactTarget& target, const NoiseSchedule& sched, const StepGrid& grid,
                        std::size_t n_paths, std::uint64_t seed) {
    CheckReport r;
    r.check_id = "prop6/" + target.name();
    const double diam = target.diameter();
    const double T = grid.T;
    const double tK = grid.t_K();
    double ts;
    try {
        ts = tstar(T, sched.beta_bar(), diam);
    } catch (const DomainError& e) {
        r.error = e.what();
        return r;
    }
    r.metrics["t_star"] = ts;
    const ScoreField f = ScoreField::exact(target, sched);
    std::vector<std::vector<ProbeRecord>> per(n_paths);
    run_parallel(n_paths, [&](std::size_t i) {
        const std::uint64_t si = derive_seed(seed, i);
        Stream rng(derive_seed(si, 0));
        const int k = static_cast<int>(rng.index(static_cast<std::size_t>(grid.K()) + 1));
        const double s = grid.ts[static_cast<std::size_t>(k)];
        const Eigen::VectorXd x = 2.0 * (1.0 + diam) * rng.normal_vec(target.dim());
        const TangentRecord tr = tangent_flow(f, T, s, tK, x, derive_seed(si, 1));
        for (std::size_t j = 0; j < tr.u.size(); ++j) {
            const double u = tr.u[j];
            double log_env = 0.5 * diam * diam / sched.sigma2(T - u);
            if (s <= ts) log_env -= 0.5 * sched.integral_beta(T - std::min(u, ts), T - s);
            per[i].push_back({u, x.norm(), log_env - std::log(tr.norm[j]), "log envelope - log |J|"});
        }
    });
    for (const auto& v : per)
        for (const auto& p : v) r.record(p, 1e-6);
    return r;
}

namespace {

struct InterpRun {
    double residual = 0.0;
    double lhs_l1 = 0.0;
    std::vector<ProbeRecord> audit;
};

// One run of the interpolation identity at `m` fine steps per coarse step.
InterpRun interp_run(const ScoreField& exact, const ScoreField& field, const NoiseSchedule& sched,
                     const StepGrid& grid, double diam, int m, std::size_t n_paths, std::uint64_t seed) {
    const int K = grid.K();
    const int d = exact.dim();
    const double T = grid.T;
    const int N = K * m;
    std::vector<double> u(N + 1), h(N);
    std::vector<int> coarse(N);
    for (int k = 0; k < K; ++k)
        for (int i = 0; i < m; ++i) {
            const int j = k * m + i;
            h[j] = grid.gammas[k] / m;
            u[j] = grid.ts[k] + i * h[j];
            coarse[j] = k;
        }
    u[N] = grid.ts[K];
    const double M = field.is_perturbed() ? field.perturbation().M : 0.0;

    std::vector<double> num(n_paths), den(n_paths);
    std::vector<std::vector<ProbeRecord>> audit(n_paths);
    run_parallel(n_paths, [&](std::size_t p) {
        const std::uint64_t sp = derive_seed(seed, p);
        Stream init(derive_seed(sp, 0));
        // fine Brownian increments from unit normals per finest level (2 x 64 = 128 slots per coarse step)
        // so that runs at m and 2 m see the same Brownian path
        Stream noise(derive_seed(sp, 1));
        const int finest = 128;
        std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(K * finest));
        for (auto& v : z) v = noise.normal_vec(d);
        const int group = finest / m;
        auto dW = [&](int j) {
            const int k = coarse[j];
            const int i = j - k * m;
            Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
            for (int q = 0; q < group; ++q) w += z[static_cast<std::size_t>(k * finest + i * group + q)];
            return Eigen::VectorXd(std::sqrt(grid.gammas[k] / finest) * w);
        };
        auto beta_at = [&](int j) { return sched.beta(T - u[j]); };
        auto exact_drift = [&](int j, const Eigen::VectorXd& y) {
            return Eigen::VectorXd(beta_at(j) * (y + 2.0 * exact.score(T - u[j], y)));
        };

        std::vector<Eigen::VectorXd> dw(N);
        for (int j = 0; j < N; ++j) dw[j] = dW(j);
        std::vector<Eigen::VectorXd> ybar(N + 1), y(N + 1), db(N);
        ybar[0] = y[0] = init.normal_vec(d);
        Eigen::VectorXd frozen;
        for (int j = 0; j < N; ++j) {
            const int k = coarse[j];
            const double b = beta_at(j);
            if (j == k * m) frozen = field.score(T - grid.ts[k], ybar[j]);
            const Eigen::VectorXd bbar = b * (ybar[j] + 2.0 * frozen);
            db[j] = exact_drift(j, ybar[j]) - bbar;
            ybar[j + 1] = ybar[j] + h[j] * bbar + std::sqrt(2.0 * b) * dw[j];
            y[j + 1] = y[j] + h[j] * exact_drift(j, y[j]) + std::sqrt(2.0 * b) * dw[j];

            // three-term envelope for Delta b at this fine time
            const double tf_lo = T - grid.ts[k + 1], tf_hi = T - grid.ts[k];
            const double s2u = sched.sigma2(T - u[j]);
            const double bu = beta_at(j);
            const double bk = sched.beta(tf_hi);
            const double sup_dt = bk * bk / std::pow(sched.sigma2(tf_lo), 3);
            const Eigen::VectorXd& yk = ybar[k * m];
            const double env = 2.0 * sup_dt * (2.0 + diam * diam) * (diam + ybar[j].norm()) * grid.gammas[k] +
                               2.0 * bu / (s2u * s2u) * (1.0 + diam * diam) * (ybar[j] - yk).norm() +
                               2.0 * bu * M * (1.0 + yk.norm()) / s2u;
            audit[p].push_back({u[j], ybar[j].norm(), (env - db[j].norm()) / std::max(env, 1e-300), "Delta b"});
        }

        // RHS: sum_j h_j DPhi_{j+1 -> N}(Ybar_{j+1}) Delta b_j along exact-drift Euler flows
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
        for (int j = 0; j < N; ++j) {
            Eigen::VectorXd x = ybar[j + 1];
            Eigen::VectorXd v = h[j] * db[j];
            for (int i = j + 1; i < N; ++i) {
                const double b = beta_at(i);
                const Eigen::MatrixXd H = exact.hessian(T - u[i], x);
                v = v + h[i] * b * (v + 2.0 * H * v);
                x = x + h[i] * exact_drift(i, x) + std::sqrt(2.0 * b) * dw[i];
            }
            rhs += v;
        }
        const Eigen::VectorXd lhs = y[N] - ybar[N];
        num[p] = (lhs - rhs).lpNorm<1>();
        den[p] = lhs.lpNorm<1>();
    });
    InterpRun out;
    double sn = 0.0, sd = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        sn += num[p];
        sd += den[p];
        out.audit.insert(out.audit.end(), audit[p].begin(), audit[p].end());
    }
    out.residual = sd > 0.0 ? sn / sd : 0.0;
    out.lhs_l1 = sd;
    return out;
}

}  // namespace

CheckReport check_interp(const CompactTarget& target, const NoiseSchedule& sched, const StepGrid& grid,
                         const ScoreField& field, std::size_t n_paths, std::uint64_t seed,
                         const InterpOptions& opt) {
    CheckReport r;
    r.check_id = "interp/" + target.name();
    if (opt.substeps < 1 || 128 % (opt.refine ? 2 * opt.substeps : opt.substeps) != 0) {
        r.error = "substeps (and twice substeps when refining) must divide 128";
        return r;
    }
    const ScoreField exact = ScoreField::exact(target, sched);
    const double diam = target.diameter();
    const InterpRun a = interp_run(exact, field, sched, grid, diam, opt.substeps, n_paths, seed);
    r.metrics["residual"] = a.residual;
    r.metrics["lhs_l1"] = a.lhs_l1;
    r.metrics["substeps"] = opt.substeps;
    for (const auto& p : a.audit) r.record(p, 1e-9);
    r.record({grid.t_K(), 0.0, opt.tolerance - a.residual, "residual"}, 0.0);
    if (opt.refine) {
        const InterpRun b = interp_run(exact, field, sched, grid, diam, 2 * opt.substeps, n_paths, seed);
        const double ratio = a.residual > 0.0 ? b.residual / a.residual : 0.0;
        r.metrics["residual_refined"] = b.residual;
        r.metrics["halving_ratio"] = ratio;
        r.record({grid.t_K(), 0.0, opt.halving_ratio - ratio, "refinement ratio"}, 0.0);
    }
    return r;
}

CheckReport check_F2(const NoiseSchedule& sched, double t_K, std::size_t n, std::uint64_t seed, int d) {
    CheckReport r;
    r.check_id = "F2";
    if (sched.kind() != NoiseSchedule::Kind::Constant || sched.beta0() != 1.0) {
        r.error = "the closed-form variance assumes a constant schedule with beta = 1";
        return r;
    }
    const double eps = 0.01;
    const int K = static_cast<int>(std::lround(t_K / eps));
    const double T = t_K + eps;
    const NoiseSchedule s = NoiseSchedule::constant(1.0, T);
    const StepGrid grid = uniform_grid(s, T, eps, K);
    const Batch b = sample_backward(ScoreField::zero(d, s), grid, n, seed);
    const double var = b.terminal.array().square().mean();
    const double claimed = (3.0 * std::exp(2.0 * t_K) - 1.0) / 2.0;
    const double exact = 2.0 * std::exp(2.0 * t_K) - 1.0;
    const double se = var * std::sqrt(2.0 / (static_cast<double>(n) * d));
    r.metrics["empirical_variance"] = var;
    r.metrics["claimed_variance"] = claimed;
    r.metrics["recursion_variance"] = exact;
    r.metrics["std_err"] = se;
    r.metrics["z_claimed"] = (var - claimed) / se;
    r.metrics["z_recursion"] = (var - exact) / se;
    r.record({t_K, 0.0, 4.0 * se - std::abs(var - claimed), "claimed variance within 4 SE"}, 0.0);
    if (std::abs(var - exact) <= 4.0 * se)
        r.notes.push_back("empirical variance matches 2 e^{2 t_K} - 1 from the step recursion");
    return r;
}

std::vector<double> default_t_ladder() {
    std::vector<double> t;
    for (int i = 0; i <= 16; ++i) t.push_back(std::pow(10.0, -i / 4.0));
    return t;
}

namespace {

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double op_norm(const Eigen::MatrixXd& H) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

CheckReport check_hessian_scaling(const CompactTarget& target, const NoiseSchedule& sched,
                                  const std::vector<double>& t_list) {
    CheckReport r;
    r.check_id = "hessian_scaling/" + target.name();
    const ScoreField f = ScoreField::exact(target, sched);
    const int d = target.dim();
    std::vector<double> lt, lsup;
    for (double t : t_list) {
        lt.push_back(std::log(t));
        lsup.push_back(0.0);
    }

    if (const auto* hc = std::get_if<Hypercube>(&target.variant())) {
        const double half = hc->side / 2.0;
        for (std::size_t i = 0; i < t_list.size(); ++i) {
            const double t = t_list[i];
            const double sig = std::sqrt(sched.sigma2(t));
            const double m = sched.m(t);
            std::vector<double> pts;
            for (int z = -6; z <= 6; ++z) {
                pts.push_back(m * half + 0.5 * z * sig);
                pts.push_back(-m * half + 0.5 * z * sig);
            }
            for (int g = 0; g <= 40; ++g) pts.push_back(-2.0 * half + 4.0 * half * g / 40.0);
            double sup = 0.0;
            for (double v : pts) {
                Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
                x.head(hc->p).setConstant(v);
                sup = std::max(sup, op_norm(f.hessian(t, x).topLeftCorner(hc->p, hc->p)));
            }
            lsup[i] = std::log(sched.sigma2(t) * sup);
        }
        const double slope = ols_slope(lt, lsup);
        r.metrics["slope_log_sigma2_sup_H"] = slope;
        r.record({0.0, 0.0, 0.15 - std::abs(slope), "sigma^2 sup|H| flat in t"}, 0.0);
        r.notes.push_back("sup |H| grows like sigma_t^{-2}, not sigma_t^{-4}");
        return r;
    }
    if (const auto* e = std::get_if<Empirical>(&target.variant()); e && e->atoms.cols() >= 2) {
        const Eigen::VectorXd x = e->atoms.rowwise().mean();
        const double ref_t = 1e-2;
        const double s2r = sched.sigma2(ref_t);
        const double ref = s2r * s2r * op_norm(f.hessian(ref_t, x));
        std::vector<double> ls2, lh;
        for (double t : t_list) {
            const double s2 = sched.sigma2(t);
            const double hn = op_norm(f.hessian(t, x));
            if (t <= ref_t) r.record({t, x.norm(), s2 * s2 * hn - 0.5 * ref, "sigma^4 |H| bounded below"}, 0.0);
            ls2.push_back(std::log(s2));
            lh.push_back(std::log(hn));
        }
        r.metrics["sigma4_H_at_1e-2"] = ref;
        r.metrics["slope_log_H_vs_log_sigma2"] = ols_slope(ls2, lh);
        return r;
    }
    // Dirac: |H| = 1 / sigma^2 exactly
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    for (double t : t_list) {
        const double v = sched.sigma2(t) * op_norm(f.hessian(t, x));
        r.record({t, 0.0, 1e-9 - std::abs(v - 1.0), "sigma^2 |H| = 1"}, 0.0);
    }
    return r;
}

bool SuiteReport::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.pass(); });
}

nlohmann::json SuiteReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass();
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) arr.push_back(ddm::to_json(c));
    j["checks"] = arr;
    return j;
}

std::vector<std::pair<std::string, CompactTarget>> standard_targets() {
    Eigen::MatrixXd two(2, 2);
    two << -0.5, 0.5, 0.0, 0.0;
    Eigen::MatrixXd five(2, 5);
    five << 0.0, 0.4, -0.3, 0.1, -0.2,
            0.0, 0.1, 0.3, -0.4, -0.2;
    std::vector<std::pair<std::string, CompactTarget>> out;
    out.emplace_back("dirac", CompactTarget::dirac(Eigen::VectorXd::Zero(2)).recentered());
    out.emplace_back("two_atom", CompactTarget::empirical(two).recentered());
    out.emplace_back("five_atom", CompactTarget::empirical(five).recentered());
    out.emplace_back("hypercube", CompactTarget::hypercube(1, 2).recentered());
    return out;
}

SuiteReport run_all(const VerifyConfig& cfg) {
    const std::set<std::string> suites{"all", "c-lemmas", "d-lemmas", "flows", "scaling"};
    if (!suites.count(cfg.suite)) throw ConfigError("unknown verify suite: " + cfg.suite);
    auto want = [&](const char* s) { return cfg.suite == "all" || cfg.suite == s; };
    const double T = cfg.schedule_T;
    const NoiseSchedule cst = NoiseSchedule::constant(1.0, T);
    const NoiseSchedule lin = NoiseSchedule::linear(1.0, 2.0, T);
    const auto targets = standard_targets();

    std::vector<std::function<CheckReport()>> jobs;
    std::uint64_t tag = 0;
    auto sd = [&] { return derive_seed(cfg.seed, tag++); };
    if (want("c-lemmas")) {
        for (const auto& [name, tg] : targets) {
            const auto t = tg;
            const std::uint64_t s1 = sd(), s2 = sd(), s3 = sd();
            jobs.push_back([=] { return check_C1(t, cst, cfg.n_probes, s1, cfg.corrupt); });
            jobs.push_back([=] { return check_C2(t, cst, cfg.n_probes, s2); });
            jobs.push_back([=] { return check_C3(t, cst, cfg.n_probes, s3); });
        }
    }
    if (want("d-lemmas")) {
        const std::uint64_t s1 = sd(), s2 = sd();
        jobs.push_back([=] {
            CheckReport a = check_D1(cst, cfg.n_probes, s1);
            a.check_id = "D1/constant";
            return a;
        });
        jobs.push_back([=] {
            CheckReport a = check_D1(lin, cfg.n_probes, s2);
            a.check_id = "D1/linear";
            return a;
        });
        jobs.push_back([=] {
            CheckReport a = check_D2(cst, cfg.n_probes);
            a.check_id = "D2/constant";
            return a;
        });
        jobs.push_back([=] {
            CheckReport a = check_D2(lin, cfg.n_probes);
            a.check_id = "D2/linear";
            return a;
        });
        jobs.push_back([=] {
            CheckReport a = check_A2_report(lin, 4096);
            a.check_id = "A2/linear";
            return a;
        });
        for (const auto& [name, tg] : targets) {
            if (name == "dirac") continue;
            const auto t = tg;
            const std::uint64_t s = sd();
            jobs.push_back([=] { return check_D8(t, cst, T, 200, s); });
        }
    }
    if (want("flows")) {
        const StepGrid grid = make_stepgrid(cst, T, 0.1, 0.1);
        for (const auto& [name, tg] : targets) {
            if (name != "dirac" && name != "two_atom") continue;
            const auto t = tg;
            const std::uint64_t s = sd();
            jobs.push_back([=] { return check_prop6(t, cst, grid, cfg.prop6_paths, s); });
        }
        const auto two = targets[1].second;
        const NoiseSchedule s_short = NoiseSchedule::constant(1.0, 2.0);
        const StepGrid coarse = uniform_grid(s_short, 2.0, 0.1, 20);
        const std::uint64_t si = sd(), sf = sd();
        jobs.push_back([=] {
            return check_interp(two, s_short, coarse, ScoreField::exact(two, s_short), cfg.interp_paths, si);
        });
        jobs.push_back([=] { return check_F2(NoiseSchedule::constant(1.0, 1.01), 1.0, cfg.f2_samples, sf); });
    }
    if (want("scaling")) {
        for (const auto& [name, tg] : targets) {
            const auto t = tg;
            jobs.push_back([=] { return check_hessian_scaling(t, cst, default_t_ladder()); });
        }
    }

    SuiteReport out;
    out.checks.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    const int w = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (int i = 0; i < w; ++i) {
        pool.emplace_back([&] {
            for (std::size_t j; (j = next++) < jobs.size();) {
                try {
                    out.checks[j] = jobs[j]();
                } catch (const std::exception& e) {
                    out.checks[j].check_id = "job" + std::to_string(j);
                    out.checks[j].error = e.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    std::sort(out.checks.begin(), out.checks.end(),
              [](const CheckReport& a, const CheckReport& b) { return a.check_id < b.check_id; });
    return out;
}

}  // namespace ddm
