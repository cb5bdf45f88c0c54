#include "ddm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ddm/errors.hpp"

namespace ddm {

namespace {

constexpr std::size_t kCosineKnots = std::size_t{1} << 14;

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

template <class F>
double gk_integrate(F f, double a, double b, double abs_tol, int depth = 0) {
    if (a == b) return 0.0;
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-14, &err);
    if (err <= std::max(abs_tol, 1e-14 * std::abs(v)) || depth > 12) return v;
    const double mid = 0.5 * (a + b);
    return gk_integrate(f, a, mid, 0.5 * abs_tol, depth + 1) + gk_integrate(f, mid, b, 0.5 * abs_tol, depth + 1);
}

}  // namespace

double cosine_f(double t, double T, double eta) {
    const double arg = ((t / T + eta) / (1.0 + eta)) * std::numbers::pi / 2.0;
    return std::numbers::pi / (T * (1.0 + eta)) * std::tan(arg);
}

double softmin(double a, double b, double r) {
    // -r log(exp(-a/r) + exp(-b/r)), anchored at a
    return a - r * softplus((a - b) / r);
}

NoiseSchedule NoiseSchedule::constant(double beta0, double T) {
    if (!(beta0 > 0.0)) throw ConfigError("constant schedule needs beta0 > 0");
    if (!(T > 0.0)) throw ConfigError("schedule horizon T must be > 0");
    NoiseSchedule s(Kind::Constant, T);
    s.beta0_ = beta0;
    s.betaT_ = beta0;
    return s;
}

NoiseSchedule NoiseSchedule::linear(double beta0, double betaT, double T) {
    if (!(beta0 >= 0.0) || !(betaT >= beta0))
        throw ConfigError("linear schedule needs 0 <= beta0 <= betaT");
    if (!(betaT > 0.0)) throw ConfigError("linear schedule needs betaT > 0");
    if (!(T > 0.0)) throw ConfigError("schedule horizon T must be > 0");
    NoiseSchedule s(Kind::Linear, T);
    s.beta0_ = beta0;
    s.betaT_ = betaT;
    return s;
}

NoiseSchedule NoiseSchedule::cosine(double T, double eta, double r) {
    if (!(T > 0.0)) throw ConfigError("schedule horizon T must be > 0");
    if (!(eta >= 0.0)) throw ConfigError("cosine schedule needs eta >= 0");
    if (!(r > 0.0)) throw ConfigError("cosine schedule needs r > 0");
    if (eta == 0.0) throw ConfigError("cosine schedule with eta = 0 has beta_0 = 0, violating A2");
    NoiseSchedule s(Kind::Cosine, T);
    s.eta_ = eta;
    s.r_ = r;
    s.beta0_ = s.raw_beta(0.0);
    s.betaT_ = s.raw_beta(T);

    auto tab = std::make_shared<Table>();
    const std::size_t n = kCosineKnots;
    tab->h = T / static_cast<double>(n);
    tab->A.assign(n + 1, 0.0);
    std::vector<double> b(n + 1);
    for (std::size_t i = 0; i <= n; ++i) b[i] = s.raw_beta(tab->h * static_cast<double>(i));
    auto f = [&s](double u) { return s.raw_beta(u); };
    for (std::size_t i = 0; i < n; ++i) {
        const double a0 = tab->h * static_cast<double>(i);
        const double a1 = (i + 1 == n) ? T : tab->h * static_cast<double>(i + 1);
        tab->A[i + 1] = tab->A[i] + boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a0, a1, 0);
    }
    // Fritsch-Carlson limited slopes, starting from the exact derivative beta
    tab->slope = b;
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = (tab->A[i + 1] - tab->A[i]) / tab->h;
        if (delta <= 0.0) {
            tab->slope[i] = tab->slope[i + 1] = 0.0;
            continue;
        }
        const double al = tab->slope[i] / delta;
        const double be = tab->slope[i + 1] / delta;
        const double q = al * al + be * be;
        if (q > 9.0) {
            const double tau = 3.0 / std::sqrt(q);
            tab->slope[i] = tau * al * delta;
            tab->slope[i + 1] = tau * be * delta;
        }
    }
    s.table_ = std::move(tab);
    return s;
}

void NoiseSchedule::check_time(double t) const {
    if (!(t >= 0.0 && t <= T_)) {
        std::ostringstream os;
        os << "time " << t << " outside [0, " << T_ << "]";
        throw DomainError(os.str());
    }
}

double NoiseSchedule::raw_beta(double t) const {
    switch (kind_) {
        case Kind::Constant:
            return beta0_;
        case Kind::Linear:
            return beta0_ + (betaT_ - beta0_) * t / T_;
        case Kind::Cosine:
            return softmin(1.0, cosine_f(t, T_, eta_), r_);
    }
    return 0.0;
}

double NoiseSchedule::beta(double t) const {
    check_time(t);
    return raw_beta(t);
}

double NoiseSchedule::cosine_antiderivative(double t) const {
    const Table& tab = *table_;
    const std::size_t n = tab.A.size() - 1;
    if (t >= T_) return tab.A[n];
    std::size_t i = std::min(n - 1, static_cast<std::size_t>(t / tab.h));
    const double x0 = tab.h * static_cast<double>(i);
    const double h = (i + 1 == n) ? T_ - x0 : tab.h;
    const double u = (t - x0) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
    return h00 * tab.A[i] + h10 * h * tab.slope[i] + h01 * tab.A[i + 1] + h11 * h * tab.slope[i + 1];
}

double NoiseSchedule::integral_beta(double s, double t) const {
    check_time(s);
    check_time(t);
    if (s > t) throw DomainError("integral_beta needs s <= t");
    switch (kind_) {
        case Kind::Constant:
            return beta0_ * (t - s);
        case Kind::Linear:
            return beta0_ * (t - s) + (betaT_ - beta0_) * (t * t - s * s) / (2.0 * T_);
        case Kind::Cosine:
            return cosine_antiderivative(t) - cosine_antiderivative(s);
    }
    return 0.0;
}

double NoiseSchedule::integral_beta_quadrature(double s, double t, double abs_tol) const {
    check_time(s);
    check_time(t);
    if (s > t) throw DomainError("integral_beta needs s <= t");
    return gk_integrate([this](double u) { return raw_beta(u); }, s, t, abs_tol);
}

ScheduleEval NoiseSchedule::eval(double t) const {
    ScheduleEval e;
    e.t = t;
    e.beta = beta(t);
    e.int_beta_0_t = integral_beta(0.0, t);
    e.m = std::exp(-e.int_beta_0_t);
    e.sigma2 = -std::expm1(-2.0 * e.int_beta_0_t);
    return e;
}

double NoiseSchedule::m(double t) const { return std::exp(-integral_beta(0.0, t)); }

double NoiseSchedule::sigma2(double t) const { return -std::expm1(-2.0 * integral_beta(0.0, t)); }

double NoiseSchedule::beta_bar() const {
    const double b0 = raw_beta(0.0);
    const double bT = raw_beta(T_);
    return std::max(bT, b0 > 0.0 ? 1.0 / b0 : INFINITY);
}

std::string NoiseSchedule::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Constant:
            os << "constant(beta0=" << beta0_ << ", T=" << T_ << ")";
            break;
        case Kind::Linear:
            os << "linear(beta0=" << beta0_ << ", betaT=" << betaT_ << ", T=" << T_ << ")";
            break;
        case Kind::Cosine:
            os << "cosine(eta=" << eta_ << ", r=" << r_ << ", T=" << T_ << ")";
            break;
    }
    return os.str();
}

D1Integrals closed_integrals_D1(const NoiseSchedule& sched, double s, double t, std::optional<double> Topt) {
    const double T = Topt.value_or(sched.T());
    if (s > t) throw DomainError("closed_integrals_D1 needs s <= t");
    if (s < 0.0) throw DomainError("closed_integrals_D1 needs s >= 0");
    if (t >= T) throw SingularityError("closed_integrals_D1: sigma_{T-u} vanishes at u = T");
    if (s == t) return {};
    // B(v) = int_0^v beta; antiderivatives in u of the two integrands
    auto F1 = [&](double u) { return -0.5 * std::log(std::expm1(2.0 * sched.integral_beta(0.0, T - u))); };
    auto F2 = [&](double u) { return 0.5 / -std::expm1(-2.0 * sched.integral_beta(0.0, T - u)); };
    return {F1(t) - F1(s), F2(t) - F2(s)};
}

A2Report check_A2(const std::function<double(double)>& beta, double T, std::size_t grid_points) {
    A2Report rep;
    if (grid_points < 2) throw DomainError("check_A2 needs at least 2 grid points");
    std::vector<double> b(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i)
        b[i] = beta(T * static_cast<double>(i) / static_cast<double>(grid_points - 1));
    rep.monotone = true;
    for (std::size_t i = 1; i < grid_points; ++i) {
        if (b[i] < b[i - 1]) {
            rep.monotone = false;
            rep.first_violation = i;
            break;
        }
    }
    const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
    const double bbar = std::max(*hi, *lo > 0.0 ? 1.0 / *lo : INFINITY);
    rep.beta_bar = bbar;
    double worst = INFINITY;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double margin = std::min(bbar - b[i], b[i] - 1.0 / bbar);
        if (margin < worst) worst = margin;
        if (margin < 0.0 && !rep.first_violation) rep.first_violation = i;
    }
    rep.worst_margin = worst;
    rep.pass = rep.monotone && std::isfinite(bbar) && worst >= 0.0;
    if (!std::isfinite(bbar)) rep.note = "beta vanishes on the grid; no finite beta_bar";
    return rep;
}

A2Report check_A2(const NoiseSchedule& sched, std::size_t grid_points) {
    A2Report rep = check_A2([&sched](double t) { return sched.beta(t); }, sched.T(), grid_points);
    if (sched.kind() == NoiseSchedule::Kind::Linear && sched.beta0() > 0.0 &&
        sched.betaT() < 1.0 / sched.beta0()) {
        rep.note = "betaT < 1/beta0: beta_bar is set by 1/beta0, not by betaT";
    }
    return rep;
}

}  // namespace ddm
