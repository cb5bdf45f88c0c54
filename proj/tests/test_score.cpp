#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "ddm/errors.hpp"
#include "ddm/score.hpp"

using namespace ddm;
using doctest::Approx;

namespace {

const NoiseSchedule kSched = NoiseSchedule::constant(1.0, 4.0);

Cloud random_atoms(int d, int n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, scale);
    Cloud a(d, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i) a(i, j) = N(rng);
    return a;
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

Eigen::VectorXd fd_grad(const ScoreField& f, double t, const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f.log_density(t, xp) - f.log_density(t, xm)) / (2 * h);
    }
    return g;
}

Eigen::MatrixXd fd_jac(const ScoreField& f, double t, const Eigen::VectorXd& x, double h) {
    Eigen::MatrixXd J(x.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        J.col(i) = (f.score(t, xp) - f.score(t, xm)) / (2 * h);
    }
    return J;
}

Eigen::VectorXd fd_dt(const ScoreField& f, double t, const Eigen::VectorXd& x, double h) {
    return (f.score(t + h, x) - f.score(t - h, x)) / (2 * h);
}

// Hessian of log p via the double sum over atom pairs.
Eigen::MatrixXd pairwise_hessian(const Cloud& atoms, double m, double s2, const Eigen::VectorXd& x) {
    const int d = static_cast<int>(x.size());
    const int n = static_cast<int>(atoms.cols());
    std::vector<double> logits(n);
    std::vector<Eigen::VectorXd> f(n);
    for (int k = 0; k < n; ++k) {
        logits[k] = -(x - m * atoms.col(k)).squaredNorm() / (2 * s2);
        f[k] = -(x - m * atoms.col(k)) / s2;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(d, d);
    double den = 0.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            const double ekj = std::exp(logits[k] - mx) * std::exp(logits[j] - mx);
            num += 0.5 * ekj * (f[k] - f[j]) * (f[k] - f[j]).transpose();
            den += ekj;
        }
    return -Eigen::MatrixXd::Identity(d, d) / s2 + num / den;
}

}  // namespace

TEST_CASE("score closed forms") {
    const auto dirac = ScoreField::exact(CompactTarget::dirac(Eigen::Vector2d::Zero()), kSched);
    const double t = std::log(2.0);  // sigma^2 = 0.75
    const Eigen::VectorXd s = dirac.score(t, Eigen::Vector2d(1.0, 0.0));
    CHECK(s[0] == Approx(-4.0 / 3.0).epsilon(1e-14));
    CHECK(s[1] == 0.0);

    Cloud pm(2, 2);
    pm << 0.7, -0.7, -0.2, 0.2;
    const auto sym = ScoreField::exact(CompactTarget::empirical(pm), kSched);
    for (double tt : {0.01, 0.3, 2.0}) CHECK(sym.score(tt, Eigen::Vector2d::Zero()).norm() < 1e-15);
}

TEST_CASE("score is the gradient of the log density") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N(0.0, 1.5);
    const auto five = ScoreField::exact(CompactTarget::empirical(random_atoms(2, 5, 42)), kSched);
    const auto cube = ScoreField::exact(CompactTarget::hypercube(1, 2, 1.0), kSched);
    const auto cube3 = ScoreField::exact(CompactTarget::hypercube(2, 3, 1.3), kSched);
    for (const auto* f : {&five, &cube, &cube3}) {
        for (int i = 0; i < 100; ++i) {
            const double t = 0.1 + 0.9 * (i / 99.0);
            Eigen::VectorXd x(f->dim());
            for (auto& v : x) v = N(rng);
            CHECK(rel(fd_grad(*f, t, x, 1e-5), f->score(t, x)) < 1e-6);
        }
    }
    CHECK(rel(fd_grad(five, 0.4, Eigen::Vector2d(0.3, -0.2), 1e-5), five.score(0.4, Eigen::Vector2d(0.3, -0.2))) < 1e-6);
}

TEST_CASE("hessian") {
    const auto dirac = ScoreField::exact(CompactTarget::dirac(Eigen::Vector3d::Zero()), kSched);
    const double t = 0.5 * std::log(2.0);  // sigma^2 = 0.5
    CHECK(rel(dirac.hessian(t, Eigen::Vector3d(0.3, 1.0, -2.0)), -2.0 * Eigen::Matrix3d::Identity()) < 1e-14);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int n : {1, 2, 3, 5, 8}) {
        const Cloud atoms = random_atoms(3, n, 100 + n);
        const auto f = ScoreField::exact(CompactTarget::empirical(atoms), kSched);
        for (int i = 0; i < 20; ++i) {
            const double tt = 0.05 + 0.1 * i;
            Eigen::VectorXd x(3);
            for (auto& v : x) v = N(rng);
            const Eigen::MatrixXd H = f.hessian(tt, x);
            const Eigen::MatrixXd P = pairwise_hessian(atoms, kSched.m(tt), kSched.sigma2(tt), x);
            CHECK((H - P).norm() <= 1e-12 * P.norm());
            CHECK((H - H.transpose()).norm() <= 1e-10 * H.norm());
        }
    }
}

TEST_CASE("hessian is the jacobian of the score") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N(0.0, 1.5);
    const auto five = ScoreField::exact(CompactTarget::empirical(random_atoms(2, 5, 43)), kSched);
    const auto cube = ScoreField::exact(CompactTarget::hypercube(2, 3, 1.0), kSched);
    for (const auto* f : {&five, &cube}) {
        for (int i = 0; i < 100; ++i) {
            const double t = 0.1 + 0.9 * (i / 99.0);
            Eigen::VectorXd x(f->dim());
            for (auto& v : x) v = N(rng);
            CHECK(rel(fd_jac(*f, t, x, 1e-5), f->hessian(t, x)) < 1e-5);
        }
    }
}

TEST_CASE("Hessian quadratic-form bound on five atoms") {
    const auto target = CompactTarget::empirical(random_atoms(2, 5, 44)).recentered();
    const auto f = ScoreField::exact(target, kSched);
    const double diam = target.diameter();
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(std::log(1e-3), std::log(4.0));
    for (int i = 0; i < 100; ++i) {
        const double t = std::exp(U(rng));
        const Eigen::Vector2d x(2 * (1 + diam) * N(rng), 2 * (1 + diam) * N(rng));
        Eigen::Matrix2d M;
        M << N(rng), N(rng), N(rng), N(rng);
        const double m = kSched.m(t), s2 = kSched.sigma2(t);
        const double q = (M.transpose() * f.hessian(t, x) * M).trace();
        CHECK(q <= -(1 - m * m * diam * diam / (2 * s2)) / s2 * M.squaredNorm() + 1e-9);
    }
}

TEST_CASE("dt_score") {
    const auto dirac = ScoreField::exact(CompactTarget::dirac(Eigen::Vector2d::Zero()), kSched);
    const Eigen::Vector2d x(0.4, -1.1);
    for (double t : {0.05, 0.5, 2.0}) {
        const double m = kSched.m(t), s2 = kSched.sigma2(t);
        CHECK(rel(dirac.dt_score(t, x), 2.0 * m * m * x / (s2 * s2)) < 1e-13);
    }
    // Dirac at a non-origin point against differentiating (m p - x)/sigma^2
    const Eigen::Vector2d p(0.5, 0.25);
    const auto dp = ScoreField::exact(CompactTarget::dirac(p), kSched);
    for (double t : {0.05, 0.5, 2.0}) {
        const double m = kSched.m(t), s2 = kSched.sigma2(t);
        const Eigen::Vector2d want = -m * p / s2 - (m * p - x) * 2.0 * m * m / (s2 * s2);
        CHECK(rel(dp.dt_score(t, x), want) < 1e-13);
    }
}

TEST_CASE("dt_score matches finite differences and fixes the inner-product sign") {
    const auto four = ScoreField::exact(CompactTarget::empirical(random_atoms(2, 4, 45)), kSched);
    const Eigen::Vector2d x(0.3, 0.8);
    const Eigen::VectorXd fd = fd_dt(four, 0.3, x, 1e-6);
    CHECK(rel(four.dt_score(0.3, x), fd) / std::max(1.0, fd.norm()) < 1e-5);
    const double res_minus = (four.dt_score_branch(0.3, x, -1.0) - fd).norm() / fd.norm();
    const double res_plus = (four.dt_score_branch(0.3, x, +1.0) - fd).norm() / fd.norm();
    CHECK(res_minus < 1e-5);
    CHECK(res_plus > 1e-2);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0.0, 1.5);
    const auto cube = ScoreField::exact(CompactTarget::hypercube(1, 2, 1.0), kSched);
    for (const auto* f : {&four, &cube}) {
        for (int i = 0; i < 100; ++i) {
            const double t = 0.1 + 0.9 * (i / 99.0);
            Eigen::VectorXd y(2);
            for (auto& v : y) v = N(rng);
            CHECK(rel(f->dt_score(t, y), fd_dt(*f, t, y, 1e-6)) < 1e-5);
        }
    }
}

TEST_CASE("hypercube density against direct quadrature of the Gaussian convolution") {
    const auto cube = ScoreField::exact(CompactTarget::hypercube(1, 1, 1.0), kSched);
    for (double t : {1e-3, 0.05, 0.7, 3.0}) {
        const double m = kSched.m(t), s2 = kSched.sigma2(t);
        for (double x : {-3.0, -0.6, -0.5, -0.1, 0.0, 0.2, 0.49, 0.8, 2.0}) {
            auto g = [&](double y) { return std::exp(-(x - m * y) * (x - m * y) / (2 * s2)) / std::sqrt(2 * M_PI * s2); };
            const double p = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -0.5, 0.5, 20, 1e-14);
            if (p < 1e-250) continue;
            CHECK(cube.log_density(t, Eigen::VectorXd::Constant(1, x)) == Approx(std::log(p)).epsilon(1e-10));
        }
    }
}

TEST_CASE("log-space evaluation is overflow free") {
    const double t = -0.5 * std::log1p(-1e-6);  // sigma^2 = 1e-6
    const auto five = ScoreField::exact(CompactTarget::empirical(random_atoms(2, 5, 46)), kSched);
    const auto cube = ScoreField::exact(CompactTarget::hypercube(1, 2, 1.0), kSched);
    const auto dirac = ScoreField::exact(CompactTarget::dirac(Eigen::Vector2d::Zero()), kSched);
    for (const auto* f : {&five, &cube, &dirac}) {
        for (double ang = 0.0; ang < 6.3; ang += 0.7) {
            const Eigen::Vector2d x(1e3 * std::cos(ang), 1e3 * std::sin(ang));
            CHECK(f->score(t, x).allFinite());
            CHECK(f->hessian(t, x).allFinite());
            CHECK(std::isfinite(f->log_density(t, x)));
            CHECK(f->dt_score(t, x).allFinite());
        }
    }
}

TEST_CASE("perturb") {
    const auto base = ScoreField::exact(CompactTarget::empirical(random_atoms(2, 3, 47)), kSched);
    const Eigen::Vector2d x(0.2, -0.4);
    CHECK(perturb(base, 0.0, PerturbMode::FixedDirection, Eigen::Vector2d(1, 0)).score(0.3, x) == base.score(0.3, x));

    const double t = 0.5 * std::log(2.0);
    const auto pf = perturb(base, 0.01, PerturbMode::FixedDirection, Eigen::Vector2d(1, 0));
    const Eigen::VectorXd off = pf.score(t, Eigen::Vector2d::Zero()) - base.score(t, Eigen::Vector2d::Zero());
    CHECK(off[0] == Approx(0.02).epsilon(1e-12));
    CHECK(std::abs(off[1]) < 1e-15);

    const auto rs = perturb(base, 0.05, PerturbMode::RadialSign);
    CHECK((rs.score(t, Eigen::Vector2d::Zero()) - base.score(t, Eigen::Vector2d::Zero())).norm() == 0.0);

    std::mt19937_64 rng(6);
    std::normal_distribution<double> N(0.0, 2.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double tt = 0.01 + 3.9 * (i / 999.0);
        const Eigen::Vector2d y(N(rng), N(rng));
        const double want = 0.05 * (1 + y.norm()) / kSched.sigma2(tt);
        for (const auto* f : {&pf, &rs}) {
            const double M = f->perturbation().M;
            const double got = (f->score(tt, y) - base.score(tt, y)).norm();
            worst = std::max(worst, std::abs(got - want * M / 0.05) / (want * M / 0.05));
        }
    }
    CHECK(worst < 1e-12);
    CHECK_THROWS_AS(pf.hessian(0.3, x), UnsupportedOperation);
    CHECK_THROWS_AS(pf.dt_score(0.3, x), UnsupportedOperation);
}

TEST_CASE("l2_perturb") {
    const auto base = ScoreField::exact(CompactTarget::dirac(Eigen::Vector2d::Zero()), kSched);
    const auto none = l2_perturb(base, 0.02, 0.5, [](const Eigen::VectorXd&) { return false; });
    const auto same = perturb(base, 0.02, PerturbMode::FixedDirection, Eigen::Vector2d(1, 0), ErrorGrowth::RootQuadratic);
    const Eigen::Vector2d x(0.7, 1.2);
    CHECK(none.score(0.4, x) == same.score(0.4, x));

    const auto far = l2_perturb(base, 0.02, 0.5, [](const Eigen::VectorXd& y) { return y.norm() > 1e3; });
    const auto near = l2_perturb(base, 0.02, 0.5, [](const Eigen::VectorXd& y) { return y[0] > 0.5; });
    const double t = 0.8;
    const Cloud cloud = std::sqrt(kSched.sigma2(t)) * random_atoms(2, 4000, 48);
    const auto r = empirical_l2_error(far, t, cloud);
    CHECK(r.pass);
    CHECK(r.frac_in_Ak <= r.markov_bound);
    const auto q = empirical_l2_error(near, t, cloud);
    CHECK(q.frac_in_Ak > 0.0);
    CHECK(q.frac_in_Ak <= q.markov_bound);
}

TEST_CASE("score errors") {
    const auto f = ScoreField::exact(CompactTarget::dirac(Eigen::Vector2d::Zero()), kSched);
    CHECK_THROWS_AS(f.score(0.0, Eigen::Vector2d::Zero()), SingularityError);
    CHECK_THROWS_AS(f.score(-1.0, Eigen::Vector2d::Zero()), SingularityError);
    CHECK_THROWS_AS(ScoreField::exact(CompactTarget::circle(1.0, Eigen::Vector2d::Zero()), kSched), UnsupportedOperation);
    CHECK(ScoreField::zero(3, kSched).score(0.5, Eigen::Vector3d(1, 2, 3)).isZero(0.0));
}

TEST_CASE("dsm_loss") {
    const auto target = CompactTarget::dirac(Eigen::Vector2d::Zero());
    const auto exact = ScoreField::exact(target, kSched);
    const auto zero = ScoreField::zero(2, kSched);
    auto sig2 = [](double t) { return kSched.sigma2(t); };
    // for a Dirac target the conditional and marginal scores coincide
    const auto le = dsm_loss(exact, target, sig2, 64, 50, 7);
    CHECK(le.value < 1e-20);
    // zero field with weight sigma^2: integrand is E|Z|^2 = d, so the loss is d (T - t_min)
    const auto lz = dsm_loss(zero, target, sig2, 400, 100, 7);
    CHECK(std::abs(lz.value - 2.0 * (4.0 - 1e-3)) < 4.0 * lz.std_err);

    Cloud pm(2, 2);
    pm << 0.8, -0.8, 0.0, 0.0;
    const auto two = CompactTarget::empirical(pm);
    const auto ex2 = ScoreField::exact(two, kSched);
    auto one = [](double) { return 1.0; };
    const double l_exact = dsm_loss(ex2, two, sig2, 100, 40, 9).value;
    CHECK(l_exact > 0.0);
    for (double M : {0.01, 0.1}) {
        CHECK(l_exact <= dsm_loss(perturb(ex2, M, PerturbMode::FixedDirection, Eigen::Vector2d(0, 1)), two, sig2, 100, 40, 9).value);
        CHECK(l_exact <= dsm_loss(perturb(ex2, M, PerturbMode::RadialSign), two, sig2, 100, 40, 9).value);
    }
    CHECK(dsm_loss(ex2, two, one, 100, 40, 9).value <= dsm_loss(zero, two, one, 100, 40, 9).value);
}

TEST_CASE("dsm_loss standard error halves when n_mc quadruples") {
    Cloud pm(2, 2);
    pm << 0.8, -0.8, 0.0, 0.0;
    const auto two = CompactTarget::empirical(pm);
    const auto f = perturb(ScoreField::exact(two, kSched), 0.05, PerturbMode::RadialSign);
    auto sig2 = [](double t) { return kSched.sigma2(t); };
    auto spread = [&](std::size_t n_mc) {
        double s = 0.0, ss = 0.0;
        for (int r = 0; r < 30; ++r) {
            const double v = dsm_loss(f, two, sig2, n_mc, 8, 1000 + r).value;
            s += v;
            ss += v * v;
        }
        return std::sqrt((ss - s * s / 30.0) / 29.0);
    };
    const double ratio = spread(200) / spread(50);
    CHECK(ratio > 0.3);
    CHECK(ratio < 0.7);
}
