// Acceptance criteria 1-10. Usage: acceptance <n> [<n> ...] | all
// Prints one "criterion n: PASS|FAIL ..." line per criterion; exit code 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ddm/bounds.hpp"
#include "ddm/cli.hpp"
#include "ddm/errors.hpp"
#include "ddm/rng.hpp"
#include "ddm/verify.hpp"

using namespace ddm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += std::log(x[i]);
        sy += std::log(y[i]);
        sxx += std::log(x[i]) * std::log(x[i]);
        sxy += std::log(x[i]) * std::log(y[i]);
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

bool close(double a, double b, double tol = 1e-14) { return std::abs(a - b) <= tol * std::abs(b); }

// 1. Zero-score Gaussian law at t_K = 1.
Outcome c1() {
    const CheckReport r = check_F2(NoiseSchedule::constant(1.0, 1.01), 1.0, 100000, 101, 2);
    std::ostringstream os;
    os << "variance " << r.metrics.at("empirical_variance") << " vs (3e^2-1)/2 = " << r.metrics.at("claimed_variance")
       << " (z = " << r.metrics.at("z_claimed") << ", tolerance 4 SE); recursion value 2e^2-1 = "
       << r.metrics.at("recursion_variance") << " (z = " << r.metrics.at("z_recursion") << ")";
    return {r.pass(), os.str()};
}

// 2. Dirac target, exact score.
Outcome c2() {
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 4.0);
    const ScoreField f = ScoreField::exact(CompactTarget::dirac(Eigen::Vector2d::Zero()), s);
    const StepGrid g = make_stepgrid(s, 4.0, 1e-2, 0.05);
    const Batch b = sample_backward(f, g, 10000, 102);
    const double m2 = b.terminal.colwise().squaredNorm().mean();
    const double target = 2.0 * s.sigma2(1e-2);
    // closed-form variance of the linear backward recursion
    double v = 1.0;
    for (int k = 0; k < g.K(); ++k) {
        const StepCoeffs c = step_coeffs(s, g, k);
        const double a = 1.0 + c.gamma1 * (1.0 - 2.0 / s.sigma2(g.T - g.ts[k]));
        v = a * a * v + 2.0 * c.gamma2;
    }
    std::ostringstream os;
    os << "E|Y_K|^2 = " << m2 << ", d sigma_eps^2 = " << target << ", ratio " << m2 / target
       << " (tolerance 20%); recursion oracle " << 2.0 * v;
    return {std::abs(m2 - target) <= 0.2 * target, os.str()};
}

// 3. Lemma suites.
Outcome c3() {
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 10.0);
    std::size_t probes = 0, viol = 0;
    std::vector<std::string> failed;
    auto add = [&](const CheckReport& r) {
        probes += r.probes;
        viol += r.violations;
        if (!r.pass()) failed.push_back(r.check_id + (r.error.empty() ? "" : " (" + r.error + ")"));
    };
    std::uint64_t seed = 300;
    for (const auto& [name, t] : standard_targets()) {
        add(check_C1(t, s, 1000, ++seed));
        add(check_C2(t, s, 1000, ++seed));
        add(check_C3(t, s, 1000, ++seed));
        add(check_D8(t, s, 10.0, 1000, ++seed));
    }
    add(check_D1(s, 1000, ++seed));
    add(check_D1(NoiseSchedule::linear(1.0, 2.0, 10.0), 1000, ++seed));
    add(check_D2(s, 1000));
    add(check_D2(NoiseSchedule::linear(1.0, 2.0, 10.0), 1000));
    std::ostringstream os;
    os << probes << " probes, " << viol << " violations at slack 1e-9";
    for (const auto& f : failed) os << "; failed " << f;
    return {failed.empty(), os.str()};
}

// 4. Finite-difference consistency of score, Hessian and time derivative; pairwise Hessian form.
Outcome c4() {
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 4.0);
    Stream rng(104);
    Eigen::MatrixXd atoms(2, 5);
    for (int j = 0; j < 5; ++j) atoms.col(j) = 0.5 * rng.normal_vec(2);
    const ScoreField five = ScoreField::exact(CompactTarget::empirical(atoms), s);
    const ScoreField cube = ScoreField::exact(CompactTarget::hypercube(1, 2), s);
    double e_score = 0, e_hess = 0, e_dt = 0;
    for (const ScoreField* f : {&five, &cube}) {
        for (int i = 0; i < 100; ++i) {
            const double t = 0.1 + 0.9 * rng.uniform();
            const Eigen::VectorXd x = 1.5 * rng.normal_vec(2);
            Eigen::VectorXd g(2);
            Eigen::MatrixXd J(2, 2);
            for (int k = 0; k < 2; ++k) {
                const double h = 1e-5;
                Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
                e[k] = h;
                g[k] = (f->log_density(t, x + e) - f->log_density(t, x - e)) / (2 * h);
                J.col(k) = (f->score(t, x + e) - f->score(t, x - e)) / (2 * h);
            }
            e_score = std::max(e_score, rel(g, f->score(t, x)));
            e_hess = std::max(e_hess, rel(J, f->hessian(t, x)));
            const Eigen::VectorXd fd = (f->score(t + 1e-6, x) - f->score(t - 1e-6, x)) / 2e-6;
            e_dt = std::max(e_dt, rel(fd, f->dt_score(t, x)));
        }
    }
    // double sum over atom pairs against the covariance form
    double e_pair = 0;
    for (int N = 2; N <= 8; ++N) {
        Eigen::MatrixXd a(2, N);
        for (int j = 0; j < N; ++j) a.col(j) = rng.normal_vec(2);
        const ScoreField f = ScoreField::exact(CompactTarget::empirical(a), s);
        for (int i = 0; i < 10; ++i) {
            const double t = 0.05 + rng.uniform();
            const Eigen::VectorXd x = rng.normal_vec(2);
            const double m = s.m(t), s2 = s.sigma2(t);
            std::vector<double> lw(N);
            for (int k = 0; k < N; ++k) lw[k] = -(x - m * a.col(k)).squaredNorm() / (2 * s2);
            const double mx = *std::max_element(lw.begin(), lw.end());
            Eigen::Matrix2d num = Eigen::Matrix2d::Zero();
            double den = 0;
            for (int k = 0; k < N; ++k)
                for (int j = 0; j < N; ++j) {
                    const double w = std::exp(lw[k] - mx + lw[j] - mx);
                    const Eigen::Vector2d dk = m * (a.col(k) - a.col(j)) / s2;
                    num += 0.5 * w * dk * dk.transpose();
                    den += w;
                }
            const Eigen::MatrixXd H = -Eigen::Matrix2d::Identity() / s2 + num / den;
            e_pair = std::max(e_pair, (H - f.hessian(t, x)).norm() / std::max(1.0, H.norm()));
        }
    }
    std::ostringstream os;
    os << "max rel error: score " << e_score << " (1e-6), Hessian " << e_hess << " (1e-5), dt score " << e_dt
       << " (1e-5), pairwise form " << e_pair << " (1e-12)";
    return {e_score <= 1e-6 && e_hess <= 1e-5 && e_dt <= 1e-5 && e_pair <= 1e-12, os.str()};
}

// 5. DDPM telescoping and second-order one-step gap.
Outcome c5() {
    double worst = 0;
    std::size_t grids = 0;
    for (const NoiseSchedule& s : {NoiseSchedule::constant(1.0, 4.0), NoiseSchedule::linear(0.5, 4.0, 4.0),
                                   NoiseSchedule::cosine(4.0)})
        for (double delta : {0.01, 0.05, 0.1, 0.5}) {
            ++grids;
            for (const DdpmRow& r : ddpm_convert(s, make_stepgrid(s, 4.0, 1e-2, delta)))
                worst = std::max(worst, std::abs(r.alpha_bar - r.m2) / r.m2);
        }
    Eigen::MatrixXd a(2, 2);
    a << -0.5, 0.5, 0.0, 0.0;
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 4.0);
    const ScoreField two = ScoreField::exact(CompactTarget::empirical(a), s);
    std::vector<double> gams{0.04, 0.02, 0.01}, gap;
    for (double g : gams) gap.push_back(one_step_gap(two, 1.0, Eigen::Vector2d(0.3, 0.4), g, 256, 105).mean_gap);
    const double sl = slope(gams, gap);
    std::ostringstream os;
    os << "telescoping max rel error " << worst << " over " << grids << " grids (1e-12); one-step gap slope " << sl
       << " (>= 1.9)";
    return {worst <= 1e-12 && sl >= 1.9, os.str()};
}

// 6. Hessian scaling dichotomy.
Outcome c6() {
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 10.0);
    const CheckReport cube = check_hessian_scaling(CompactTarget::hypercube(1, 2), s, default_t_ladder());
    Eigen::MatrixXd a(2, 2);
    a << -0.5, 0.5, 0.0, 0.0;
    const CheckReport two = check_hessian_scaling(CompactTarget::empirical(a), s, default_t_ladder());
    std::ostringstream os;
    os << "hypercube slope of log sigma^2 sup|H| " << cube.metrics.at("slope_log_sigma2_sup_H")
       << " (|.| <= 0.15); two-atom sigma^4 |H(0)| worst margin over half its t=1e-2 value " << two.worst_margin
       << " (>= 0), log|H| vs log sigma^2 slope " << two.metrics.at("slope_log_H_vs_log_sigma2");
    return {cube.pass() && two.pass(), os.str()};
}

// 7. Trends in M, delta, T.
Outcome c7() {
    RunConfig base;
    base.target_variant = "two_atom";
    base.d = 2;
    base.offset = 1.5;
    base.beta0 = 0.5;
    base.T = 4.0;
    base.delta = 0.05;
    base.n = 512;
    struct Axis {
        SweepAxis axis;
        std::vector<double> values;
        bool up;
        RunConfig cfg;
    };
    RunConfig cm = base, cd = base, ct = base;
    cm.eps = 0.003;
    cd.eps = 0.1;
    ct.eps = 0.01;
    ct.beta0 = 0.25;
    const std::vector<Axis> axes{{SweepAxis::M, {0.0, 0.005, 0.01, 0.02}, true, cm},
                                 {SweepAxis::delta, {0.005, 0.02, 0.08}, true, cd},
                                 {SweepAxis::T, {2.0, 4.0, 8.0}, false, ct}};
    bool ok = true;
    std::ostringstream os;
    for (const Axis& ax : axes) {
        SweepSpec spec;
        spec.axis = ax.axis;
        spec.values = ax.values;
        spec.replicates = 16;
        spec.base_config = ax.cfg;
        spec.seed = 107;
        const TrendSummary t = summarize(run_sweep(spec));
        const bool mono = ax.up ? t.monotone_up : t.monotone_down;
        ok = ok && mono && t.resolved;
        os << axis_name(ax.axis) << " medians [";
        for (std::size_t i = 0; i < t.medians.size(); ++i) os << (i ? " " : "") << t.medians[i];
        os << "] " << (mono ? "monotone" : "NOT monotone") << ", change " << t.total_change << " vs 2 SE_null "
           << 2.0 * t.null_se << (t.resolved ? " resolved" : " NOT resolved") << "; ";
    }
    return {ok, os.str()};
}

// 8. Statistical rate in the number of atoms.
Outcome c8() {
    RunConfig c;
    c.target_variant = "circle";
    c.d = 2;
    c.T = 4.0;
    c.eps = 1e-3;
    c.delta = 0.05;
    c.n = 1024;
    SweepSpec spec;
    spec.axis = SweepAxis::N_atoms;
    spec.values = {16, 64, 256, 1024};
    spec.replicates = 8;
    spec.base_config = c;
    spec.seed = 108;
    const TrendSummary t = summarize(run_sweep(spec));
    const double sl = slope(t.values, t.medians);
    std::ostringstream os;
    os << "median W1 [";
    for (std::size_t i = 0; i < t.medians.size(); ++i) os << (i ? " " : "") << t.medians[i];
    os << "], null floor " << t.null_median << "; log-log slope " << sl << " (required [-1.3, -0.7])";
    return {sl >= -1.3 && sl <= -0.7, os.str()};
}

// 9. Bound formulas against hand-computed values.
Outcome c9() {
    std::vector<std::string> bad;
    auto expect = [&](const char* what, double got, double want) {
        if (!close(got, want)) {
            std::ostringstream os;
            os << what << " = " << got << " expected " << want;
            bad.push_back(os.str());
        }
    };
    expect("kappa(diam=1, beta_bar=1)", kappa(1.0, 1.0), 1.0);
    BoundInputs k;
    k.d = 2;
    k.diam = 1.0;
    expect("K0(d=2, diam=1)", constants(k).at("K0"), 1290.0);
    expect("t*(T=10, beta_bar=1, diam=0)", tstar(10.0, 1.0, 0.0), 8.0);

    const Corollary2 cor = corollary2(1.0 / 32.0, 0.0, 1.0, 1);
    expect("corollary kappa + 1", cor.kappa + 1.0, 1.0);
    expect("corollary T", cor.T, 1024.0);
    expect("corollary M", cor.M, std::ldexp(1.0, -25));
    expect("corollary delta", cor.delta, std::ldexp(1.0, -50));
    expect("corollary gamma_K", cor.gamma_K, std::ldexp(1.0, -10));
    expect("corollary bound", cor.bound, 32.0);  // 4 * 2^7 * 2 / 32

    // d = 1, diam = 0, beta_bar = 1, T = 10, eps = 1/32, delta = 1/1024, M = 0
    BoundInputs in;
    in.d = 1;
    in.diam = 0.0;
    in.beta_bar = 1.0;
    in.T = 10.0;
    in.eps = 1.0 / 32.0;
    in.delta = 1.0 / 1024.0;
    in.M = 0.0;
    const BoundReport t1 = theorem1(in);
    expect("theorem1 disc", t1.term_disc, 11244544.0 * 32.0);
    expect("theorem1 mixing", t1.term_mixing, std::exp(-10.0));
    expect("theorem1 noising", t1.term_noising, 0.25);
    expect("theorem1 headline", t1.headline, 256.0 * (32.0 + std::exp(-10.0) + 1.0 / std::sqrt(32.0)));

    in.Gamma = 1.0;
    const BoundReport t3 = theorem3(in);
    expect("theorem3 headline", t3.headline,
           3.0 * std::exp(36.0) * (1024.0 + 32.0 * std::exp(-10.0) + 1.0 / std::sqrt(32.0)));
    expect("theorem3 disc", t3.term_disc, 4.0 * 43924.0 * std::exp(36.0) * 1024.0);
    expect("theorem3 mixing", t3.term_mixing, std::exp(24.0) * std::exp(-10.0) * 32.0);
    expect("theorem3 noising", t3.term_noising, 0.25);

    std::ostringstream os;
    os << (bad.empty() ? "all hand-computed values reproduced (rel 1e-14)" : "mismatches:");
    for (const auto& b : bad) os << " " << b << ";";
    return {bad.empty(), os.str()};
}

// 10. Stochastic interpolation identity.
Outcome c10() {
    Eigen::MatrixXd a(1, 2);
    a << -0.5, 0.5;
    const CompactTarget tg = CompactTarget::empirical(a);
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 2.0);
    const StepGrid g = uniform_grid(s, 2.0, 0.1, 20);
    const CheckReport r = check_interp(tg, s, g, ScoreField::exact(tg, s), 20, 110);
    std::ostringstream os;
    os << "K = " << g.K() << ", residual " << r.metrics.at("residual") << " (<= 0.1) at 32 substeps, "
       << r.metrics.at("residual_refined") << " at 64, ratio " << r.metrics.at("halving_ratio")
       << " (<= 0.6); Delta b envelope worst relative margin " << r.worst_margin;
    if (!r.error.empty()) os << "; error " << r.error;
    return {r.pass(), os.str()};
}

struct Criterion {
    std::function<Outcome()> run;
    double budget_s;  // 0: no runtime requirement
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{{c1, 30},  {c2, 60}, {c3, 60}, {c4, 0},   {c5, 0},
                                     {c6, 0},   {c7, 600}, {c8, 600}, {c9, 0}, {c10, 0}};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "all") {
            for (int k = 1; k <= 10; ++k) which.push_back(k);
        } else {
            which.push_back(std::stoi(argv[i]));
        }
    }
    if (which.empty())
        for (int k = 1; k <= 10; ++k) which.push_back(k);

    bool ok = true;
    for (int k : which) {
        if (k < 1 || k > 10) {
            std::cerr << "no criterion " << k << '\n';
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = all[k - 1].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double budget = all[k - 1].budget_s;
        if (budget > 0 && secs > budget) {
            o.pass = false;
            o.detail += "; runtime over budget";
        }
        std::printf("criterion %d: %s  %s  [%.1f s%s]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                    budget > 0 ? (", budget " + std::to_string(static_cast<int>(budget)) + " s").c_str() : "");
        std::fflush(stdout);
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
