#include "ddm/score.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "ddm/errors.hpp"

namespace ddm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInvSqrt2Pi = 0.3989422804014327;

struct Time {
    double beta, m, sigma2;
};

// Softmax-weighted moments of the atoms at (t, x).
struct Mixture {
    Eigen::VectorXd w;
    Eigen::VectorXd mean;
    double logsumexp = 0.0;
};

Mixture mixture(const Cloud& atoms, const Eigen::VectorXd& x, double m, double sigma2) {
    Mixture mx;
    Eigen::VectorXd e = -((m * atoms).colwise() - x).colwise().squaredNorm().transpose() / (2.0 * sigma2);
    const double emax = e.maxCoeff();
    mx.w = (e.array() - emax).exp();
    const double z = mx.w.sum();
    mx.w /= z;
    mx.logsumexp = emax + std::log(z);
    mx.mean = atoms * mx.w;
    return mx;
}

// Per-coordinate quantities of log F(a, b), F = Phi(a + b) - Phi(a - b), u0 = a - b, u1 = a + b:
// r0 = (phi(u1) - phi(u0))/F, r1 = (phi'(u1) - phi'(u0))/F,
// q0 = (phi(u1) + phi(u0))/F, q1 = (phi'(u1) + phi'(u0))/F.
struct CubeCoord {
    double logF, r0, r1, q0, q1;
};

CubeCoord cube_coord(double a_in, double b) {
    const bool flip = a_in < 0.0;
    const double a = std::abs(a_in);
    const double u0 = a - b, u1 = a + b;
    CubeCoord c{};
    if (b <= 0.5 && a * b <= 2.0) {
        // F = phi(a) int_{-b}^{b} exp(-a v - v^2/2) dv, no cancellation for small b
        const double I = boost::math::quadrature::gauss<double, 30>::integrate(
            [a](double v) { return std::exp(-a * v - 0.5 * v * v); }, -b, b);
        const double E = std::exp(-0.5 * b * b);
        const double sh = std::sinh(a * b), ch = std::cosh(a * b);
        c.logF = std::log(kInvSqrt2Pi) - 0.5 * a * a + std::log(I);
        c.r0 = -2.0 * E * sh / I;
        c.q0 = 2.0 * E * ch / I;
        c.r1 = E * (2.0 * a * sh - 2.0 * b * ch) / I;
        c.q1 = -E * (2.0 * a * ch - 2.0 * b * sh) / I;
    } else if (u0 > 0.0) {
        // both ends in the upper tail: scale out exp(-u0^2/2)
        const double damp = std::exp(-2.0 * a * b);
        const double D = erfcx(u0 / std::numbers::sqrt2) - erfcx(u1 / std::numbers::sqrt2) * damp;
        const double P0 = 2.0 * kInvSqrt2Pi / D;
        const double P1 = P0 * damp;
        c.logF = std::log(0.5) - 0.5 * u0 * u0 + std::log(D);
        c.r0 = P1 - P0;
        c.q0 = P1 + P0;
        c.r1 = -u1 * P1 + u0 * P0;
        c.q1 = -u1 * P1 - u0 * P0;
    } else {
        const double F = 1.0 - 0.5 * std::erfc(u1 / std::numbers::sqrt2) - 0.5 * std::erfc(-u0 / std::numbers::sqrt2);
        const double p0 = kInvSqrt2Pi * std::exp(-0.5 * u0 * u0);
        const double p1 = kInvSqrt2Pi * std::exp(-0.5 * u1 * u1);
        c.logF = std::log(F);
        c.r0 = (p1 - p0) / F;
        c.q0 = (p1 + p0) / F;
        c.r1 = (-u1 * p1 + u0 * p0) / F;
        c.q1 = (-u1 * p1 - u0 * p0) / F;
    }
    if (flip) {
        c.r0 = -c.r0;
        c.q1 = -c.q1;
    }
    return c;
}

double growth_factor(ErrorGrowth g, double xnorm) {
    switch (g) {
        case ErrorGrowth::Affine:
            return 1.0 + xnorm;
        case ErrorGrowth::RootQuadratic:
            return std::sqrt(1.0 + xnorm * xnorm);
        case ErrorGrowth::Flat:
            return 1.0;
    }
    return 0.0;
}

}  // namespace

double erfcx(double x) {
    if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
    if (x < 20.0) return std::exp(x * x) * std::erfc(x);
    // asymptotic series 1/(x sqrt(pi)) sum (-1)^n (2n-1)!! / (2x^2)^n
    const double inv = 1.0 / (2.0 * x * x);
    double term = 1.0, sum = 1.0;
    for (int n = 1; n <= 10; ++n) {
        term *= -(2.0 * n - 1.0) * inv;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

ScoreField ScoreField::exact(const CompactTarget& target, NoiseSchedule sched) {
    const int d = target.dim();
    return std::visit(overloaded{
                          [&](const Dirac& a) { return ScoreField(DiracBase{a.point}, d, sched); },
                          [&](const Empirical& e) { return ScoreField(EmpiricalBase{e.atoms}, d, sched); },
                          [&](const Hypercube& h) {
                              return ScoreField(HypercubeBase{h.p, h.d, h.side}, d, sched);
                          },
                          [&](const Circle&) -> ScoreField {
                              throw UnsupportedOperation("circle scores require as_empirical discretization");
                          },
                      },
                      target.variant());
}

ScoreField ScoreField::zero(int d, NoiseSchedule sched) {
    if (d < 1) throw ConfigError("zero field needs d >= 1");
    return ScoreField(ZeroBase{d}, d, std::move(sched));
}

ScoreField ScoreField::unperturbed() const {
    ScoreField f = *this;
    f.pert_ = Perturbation{};
    return f;
}

ScoreField ScoreField::with_perturbation(Perturbation p) const {
    if (p.M < 0.0) throw DomainError("perturbation level M must be >= 0");
    if (!(p.zeta > 0.0 && p.zeta <= 1.0)) throw DomainError("zeta must lie in (0, 1]");
    if (p.mode == PerturbMode::FixedDirection) {
        if (p.direction.size() != d_) throw DomainError("perturbation direction has wrong dimension");
        const double n = p.direction.norm();
        if (!(n > 0.0)) throw DomainError("perturbation direction must be nonzero");
        p.direction /= n;
    }
    ScoreField f = *this;
    f.pert_ = std::move(p);
    return f;
}

void ScoreField::require_time(double t) const {
    if (!(t > 0.0)) throw SingularityError("score evaluated at t <= 0, where sigma_t vanishes");
    if (t > sched_.T()) throw DomainError("score evaluated beyond the schedule horizon");
}

Eigen::VectorXd ScoreField::base_score(double t, const Eigen::VectorXd& x) const {
    require_time(t);
    const double m = sched_.m(t);
    const double s2 = sched_.sigma2(t);
    if (!(s2 > 0.0)) throw SingularityError("sigma_t^2 underflows to zero");
    return std::visit(overloaded{
                          [&](const EmpiricalBase& e) -> Eigen::VectorXd {
                              const Mixture mx = mixture(e.atoms, x, m, s2);
                              return (m * mx.mean - x) / s2;
                          },
                          [&](const DiracBase& a) -> Eigen::VectorXd { return (m * a.point - x) / s2; },
                          [&](const HypercubeBase& h) -> Eigen::VectorXd {
                              const double sig = std::sqrt(s2);
                              const double b = m * h.side / (2.0 * sig);
                              Eigen::VectorXd s = -x / s2;
                              for (int i = 0; i < h.p; ++i) s[i] = cube_coord(x[i] / sig, b).r0 / sig;
                              return s;
                          },
                          [&](const ZeroBase& z) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(z.d); },
                      },
                      base_);
}

Eigen::VectorXd ScoreField::offset(double t, const Eigen::VectorXd& x) const {
    if (!is_perturbed()) return Eigen::VectorXd::Zero(d_);
    const double s2 = sched_.sigma2(t);
    const double xn = x.norm();
    double level = pert_.M;
    if (pert_.bad_region && pert_.bad_region(x)) level /= pert_.zeta;
    const double mag = level * growth_factor(pert_.growth, xn) / s2;
    if (pert_.mode == PerturbMode::FixedDirection) return mag * pert_.direction;
    if (xn == 0.0) return Eigen::VectorXd::Zero(d_);
    return -mag * x / xn;
}

Eigen::VectorXd ScoreField::score(double t, const Eigen::VectorXd& x) const {
    if (x.size() != d_) throw DomainError("score: dimension mismatch");
    Eigen::VectorXd s = base_score(t, x);
    if (is_perturbed()) s += offset(t, x);
    return s;
}

Eigen::MatrixXd ScoreField::hessian(double t, const Eigen::VectorXd& x) const {
    if (is_perturbed()) throw UnsupportedOperation("perturbed fields carry no Hessian");
    require_time(t);
    const double m = sched_.m(t);
    const double s2 = sched_.sigma2(t);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d_, d_);
    return std::visit(overloaded{
                          [&](const EmpiricalBase& e) -> Eigen::MatrixXd {
                              const Mixture mx = mixture(e.atoms, x, m, s2);
                              const Cloud c = e.atoms.colwise() - mx.mean;
                              const Eigen::MatrixXd cov = c * mx.w.asDiagonal() * c.transpose();
                              Eigen::MatrixXd H = -I / s2 + (m * m / (s2 * s2)) * cov;
                              return 0.5 * (H + H.transpose());
                          },
                          [&](const DiracBase&) -> Eigen::MatrixXd { return -I / s2; },
                          [&](const HypercubeBase& h) -> Eigen::MatrixXd {
                              const double sig = std::sqrt(s2);
                              const double b = m * h.side / (2.0 * sig);
                              Eigen::MatrixXd H = -I / s2;
                              for (int i = 0; i < h.p; ++i) {
                                  const CubeCoord c = cube_coord(x[i] / sig, b);
                                  H(i, i) = (c.r1 - c.r0 * c.r0) / s2;
                              }
                              return H;
                          },
                          [&](const ZeroBase&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(d_, d_); },
                      },
                      base_);
}

Eigen::VectorXd ScoreField::dt_score_branch(double t, const Eigen::VectorXd& x, double sgn) const {
    if (is_perturbed()) throw UnsupportedOperation("perturbed fields carry no time derivative");
    require_time(t);
    const double beta = sched_.beta(t);
    const double m = sched_.m(t);
    const double s2 = sched_.sigma2(t);
    auto mix_dt = [&](const Cloud& atoms) -> Eigen::VectorXd {
        const Mixture mx = mixture(atoms, x, m, s2);
        const double c = beta * m / (s2 * s2);
        const double xx = x.squaredNorm();
        // d/dt f_k and its gradient
        Eigen::VectorXd a = c * (m * xx + m * atoms.colwise().squaredNorm().transpose().array() +
                                 sgn * (1.0 + m * m) * (atoms.transpose() * x).array())
                                    .matrix();
        const double abar = mx.w.dot(a);
        Eigen::VectorXd out = c * (2.0 * m * x + sgn * (1.0 + m * m) * mx.mean);
        const Eigen::VectorXd wa = mx.w.cwiseProduct((a.array() - abar).matrix());
        out += (m / s2) * (atoms * wa);
        return out;
    };
    return std::visit(overloaded{
                          [&](const EmpiricalBase& e) -> Eigen::VectorXd { return mix_dt(e.atoms); },
                          [&](const DiracBase& p) -> Eigen::VectorXd {
                              Cloud one(d_, 1);
                              one.col(0) = p.point;
                              return mix_dt(one);
                          },
                          [&](const HypercubeBase& h) -> Eigen::VectorXd {
                              const double sig = std::sqrt(s2);
                              const double b = m * h.side / (2.0 * sig);
                              const double dsig = beta * m * m / sig;
                              // Gaussian coordinates: d/dt(-x/sigma^2) = 2 beta m^2 x / sigma^4
                              Eigen::VectorXd out = 2.0 * beta * m * m * x / (s2 * s2);
                              for (int i = 0; i < h.p; ++i) {
                                  const double a = x[i] / sig;
                                  const CubeCoord c = cube_coord(a, b);
                                  const double Laa = c.r1 - c.r0 * c.r0;
                                  const double Lab = c.q1 - c.r0 * c.q0;
                                  const double da = -a * dsig / sig;
                                  const double db = b * (-beta - dsig / sig);
                                  out[i] = -dsig / s2 * c.r0 + (Laa * da + Lab * db) / sig;
                              }
                              return out;
                          },
                          [&](const ZeroBase&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(d_); },
                      },
                      base_);
}

Eigen::VectorXd ScoreField::dt_score(double t, const Eigen::VectorXd& x) const {
    return dt_score_branch(t, x, -1.0);
}

double ScoreField::log_density(double t, const Eigen::VectorXd& x) const {
    require_time(t);
    const double m = sched_.m(t);
    const double s2 = sched_.sigma2(t);
    const double gauss_norm = -0.5 * std::log(2.0 * std::numbers::pi * s2);
    return std::visit(overloaded{
                          [&](const EmpiricalBase& e) -> double {
                              const Mixture mx = mixture(e.atoms, x, m, s2);
                              return mx.logsumexp - std::log(static_cast<double>(e.atoms.cols())) +
                                     d_ * gauss_norm;
                          },
                          [&](const DiracBase& p) -> double {
                              return -(x - m * p.point).squaredNorm() / (2.0 * s2) + d_ * gauss_norm;
                          },
                          [&](const HypercubeBase& h) -> double {
                              const double sig = std::sqrt(s2);
                              const double b = m * h.side / (2.0 * sig);
                              double lp = 0.0;
                              for (int i = 0; i < h.d; ++i) {
                                  if (i < h.p) lp += cube_coord(x[i] / sig, b).logF - std::log(h.side * m);
                                  else lp += -x[i] * x[i] / (2.0 * s2) + gauss_norm;
                              }
                              return lp;
                          },
                          [&](const ZeroBase&) -> double {
                              throw UnsupportedOperation("the zero field is not the score of a density");
                          },
                      },
                      base_);
}

ScoreField perturb(const ScoreField& base, double M, PerturbMode mode, Eigen::VectorXd direction,
                   ErrorGrowth growth) {
    if (M < 0.0) throw DomainError("perturbation level M must be >= 0");
    if (base.is_perturbed()) throw DomainError("perturb expects an exact base field");
    Perturbation p;
    p.M = M;
    p.mode = mode;
    p.direction = std::move(direction);
    p.growth = growth;
    if (mode == PerturbMode::None || M == 0.0) return base.unperturbed();
    return base.with_perturbation(std::move(p));
}

ScoreField l2_perturb(const ScoreField& base, double M, double zeta,
                      std::function<bool(const Eigen::VectorXd&)> bad_region, PerturbMode mode,
                      Eigen::VectorXd direction) {
    if (!(zeta > 0.0 && zeta <= 1.0)) throw DomainError("zeta must lie in (0, 1]");
    if (mode == PerturbMode::FixedDirection && direction.size() == 0)
        direction = Eigen::VectorXd::Unit(base.dim(), 0);
    ScoreField f = perturb(base, M, mode, std::move(direction), ErrorGrowth::RootQuadratic);
    if (!f.is_perturbed()) return f;
    Perturbation p = f.perturbation();
    p.zeta = zeta;
    p.bad_region = std::move(bad_region);
    return f.with_perturbation(std::move(p));
}

L2ErrorReport empirical_l2_error(const ScoreField& field, double t, const Cloud& cloud) {
    L2ErrorReport r;
    const ScoreField exact = field.unperturbed();
    const double s2 = field.schedule().sigma2(t);
    const double M = field.perturbation().M;
    const double zeta = field.perturbation().zeta;
    const double thresh = (M / zeta) / s2;
    double err2 = 0.0, mom = 0.0;
    std::size_t inside = 0;
    for (Eigen::Index j = 0; j < cloud.cols(); ++j) {
        const Eigen::VectorXd x = cloud.col(j);
        const double e = (field.score(t, x) - exact.score(t, x)).norm();
        err2 += e * e;
        mom += 1.0 + x.squaredNorm();
        if (e > thresh * (1.0 + 1e-12)) ++inside;
    }
    const double n = static_cast<double>(cloud.cols());
    r.mean_sq_error = err2 / n;
    r.bound = M * M * (mom / n) / (s2 * s2);
    r.frac_in_Ak = static_cast<double>(inside) / n;
    r.markov_bound = zeta * zeta * (mom / n);
    r.pass = r.mean_sq_error <= r.bound * (1.0 + 1e-12);
    return r;
}

DsmEstimate dsm_loss(const ScoreField& field, const CompactTarget& target,
                     const std::function<double(double)>& phi, std::size_t n_mc, std::size_t n_time,
                     std::uint64_t seed, double t_min) {
    if (n_mc < 1 || n_time < 1) throw DomainError("dsm_loss needs n_mc, n_time >= 1");
    const NoiseSchedule& sched = field.schedule();
    const double T = sched.T();
    if (!(t_min > 0.0 && t_min < T)) throw DomainError("dsm_loss needs 0 < t_min < T");
    Stream rng(seed);
    const double width = (T - t_min) / static_cast<double>(n_time);
    double total = 0.0, var = 0.0;
    for (std::size_t j = 0; j < n_time; ++j) {
        const double t = t_min + width * (static_cast<double>(j) + rng.uniform());
        const double m = sched.m(t);
        const double s2 = sched.sigma2(t);
        const double sig = std::sqrt(s2);
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = 0; i < n_mc; ++i) {
            const Eigen::VectorXd x0 = target.sample_one(rng);
            const Eigen::VectorXd z = rng.normal_vec(target.dim());
            const Eigen::VectorXd xt = m * x0 + sig * z;
            const Eigen::VectorXd cond = -(xt - m * x0) / s2;
            const double v = (field.score(t, xt) - cond).squaredNorm();
            sum += v;
            sumsq += v * v;
        }
        const double nm = static_cast<double>(n_mc);
        const double mean = sum / nm;
        const double w = width * phi(t);
        total += w * mean;
        if (n_mc > 1) var += w * w * (sumsq / nm - mean * mean) / (nm - 1.0);
    }
    return {total, std::sqrt(var), t_min, n_time, n_mc};
}

}  // namespace ddm
