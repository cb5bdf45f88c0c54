#include "ddm/bounds.hpp"

#include <cmath>
#include <sstream>

#include "ddm/errors.hpp"

namespace ddm {

namespace {

double logfac(double diam) { return 1.0 + std::log1p(diam); }

std::vector<std::string> caveats(const BoundInputs& in) {
    std::ostringstream os;
    os << "D = " << in.D << " and D1 = " << in.D1
       << " are unspecified numerical constants; values validate formula shape and trends only";
    return {os.str()};
}

}  // namespace

double kappa(double diam, double beta_bar) { return diam * diam * (1.0 + beta_bar) / 2.0; }

double tstar(double T, double beta_bar, double diam) {
    const double need = 2.0 * beta_bar * logfac(diam);
    if (T < need) {
        std::ostringstream os;
        os << "t* needs T >= 2 beta_bar (1 + log(1 + diam)) = " << need << ", got T = " << T;
        throw DomainError(os.str());
    }
    return T - need;
}

double constant_D0(const BoundInputs& in) {
    return in.D * std::pow(1.0 + in.beta_bar, 7) * (1.0 + in.d + std::pow(in.diam, 4)) * logfac(in.diam);
}

double constant_D0_disc(const BoundInputs& in) {
    return std::pow(1.0 + in.beta_bar, 7) * (8.0 + 512.0 * in.d + 87328.0 * std::pow(1.0 + in.diam, 4)) *
           logfac(in.diam);
}

double constant_C0(const BoundInputs& in) {
    return std::pow(1.0 + in.beta_bar, 3.5) * (4.0 + 256.0 * in.d + 43664.0 * std::pow(1.0 + in.diam, 4));
}

double constant_D0_poly(const BoundInputs& in) {
    const double b = 1.0 + in.beta_bar;
    return in.D * (1.0 + in.d + std::pow(1.0 + in.diam, 4)) * std::exp(3.0 * b * b * (in.Gamma + 2.0) * logfac(in.diam));
}

double constant_D0_poly_disc(const BoundInputs& in) {
    const double b = 1.0 + in.beta_bar;
    return 4.0 * (4.0 + 256.0 * in.d + 43664.0 * std::pow(1.0 + in.diam, 4)) *
           std::exp(3.0 * b * b * (in.Gamma + 2.0) * logfac(in.diam));
}

double constant_D1_poly_mix(const BoundInputs& in) {
    const double b = 1.0 + in.beta_bar;
    return std::exp(2.0 * (in.Gamma + 2.0) * b * b * logfac(in.diam)) * (std::sqrt(in.d) + in.diam);
}

std::map<std::string, double> constants(const BoundInputs& in) {
    std::map<std::string, double> c;
    c["kappa"] = kappa(in.diam, in.beta_bar);
    if (in.T >= 2.0 * in.beta_bar * logfac(in.diam)) c["t_star"] = tstar(in.T, in.beta_bar, in.diam);
    c["D0"] = constant_D0(in);
    c["D0_disc"] = constant_D0_disc(in);
    c["C0"] = constant_C0(in);
    c["K0"] = moment_bound_K0(in.d, in.diam);
    c["L0"] = increment_bound_L0(in.d, in.diam);
    return c;
}

void check_hypotheses(const BoundInputs& in) {
    auto refuse = [](const std::string& what) { throw DomainError("hypothesis violated: " + what); };
    if (in.d < 1) refuse("d >= 1");
    if (!(in.diam >= 0.0)) refuse("diam >= 0");
    if (!(in.beta_bar > 0.0)) refuse("beta_bar > 0");
    if (!(in.eps > 0.0 && in.eps <= 1.0 / 32.0)) refuse("0 < eps <= 1/32");
    if (!(in.delta > 0.0 && in.delta <= 1.0 / 32.0)) refuse("0 < delta <= 1/32");
    if (!(in.M >= 0.0 && in.M <= 1.0 / 32.0)) refuse("0 <= M <= 1/32");
    if (!(in.T >= 2.0 * in.beta_bar * logfac(in.diam))) refuse("T >= 2 beta_bar (1 + log(1 + diam))");
    if (!(in.Gamma >= 0.0)) refuse("Gamma >= 0");
}

BoundReport theorem1(const BoundInputs& in) {
    check_hypotheses(in);
    BoundReport r;
    const double k = kappa(in.diam, in.beta_bar);
    const double ek = std::exp(k / in.eps);
    const double emix = std::exp(-in.T / in.beta_bar);
    const double lin = in.M + std::sqrt(in.delta);
    r.term_disc = constant_D0_disc(in) * ek * lin / (in.eps * in.eps);
    r.term_mixing = ek * emix * (std::sqrt(in.d) + in.diam);
    r.term_noising = std::sqrt(2.0 * in.beta_bar) * (in.diam + std::sqrt(in.d)) * std::sqrt(in.eps);
    r.total = r.term_disc + r.term_mixing + r.term_noising;
    r.headline = constant_D0(in) * (ek * lin / (in.eps * in.eps) + ek * emix + std::sqrt(in.eps));
    r.constants = constants(in);
    r.caveats = caveats(in);
    return r;
}

BoundReport theorem3(const BoundInputs& in) {
    check_hypotheses(in);
    BoundReport r;
    const double emix = std::exp(-in.T / in.beta_bar);
    const double lin = in.M + std::sqrt(in.delta);
    const double pg2 = std::pow(in.eps, in.Gamma + 2.0), pg = std::pow(in.eps, in.Gamma);
    r.term_disc = constant_D0_poly_disc(in) * lin / pg2;
    r.term_mixing = constant_D1_poly_mix(in) * emix / pg;
    r.term_noising = std::sqrt(2.0 * in.beta_bar) * (in.diam + std::sqrt(in.d)) * std::sqrt(in.eps);
    r.total = r.term_disc + r.term_mixing + r.term_noising;
    r.headline = constant_D0_poly(in) * (lin / pg2 + emix / pg + std::sqrt(in.eps));
    r.constants = constants(in);
    r.constants["D0_poly"] = constant_D0_poly(in);
    r.constants["D0_poly_disc"] = constant_D0_poly_disc(in);
    r.constants["D1_poly_mix"] = constant_D1_poly_mix(in);
    r.caveats = caveats(in);
    return r;
}

BoundReport prop4(const BoundInputs& in) {
    if (!(in.N >= 1.0)) throw DomainError("hypothesis violated: N >= 1");
    if (!(in.d_M > 0.0)) throw DomainError("hypothesis violated: d_M > 0");
    if (!(in.eta_w >= 0.0)) throw DomainError("hypothesis violated: eta_w >= 0");
    BoundReport r = theorem1(in);
    const double stat = in.D1 * std::pow(in.N, -1.0 / (in.d_M + in.eta_w));
    r.constants["statistical_term"] = stat;
    r.headline += stat;
    r.total += stat;
    return r;
}

BoundReport theoremI1(const BoundInputs& in, double zeta, const StepGrid& grid) {
    if (!(zeta > 0.0 && zeta <= 1.0)) throw DomainError("hypothesis violated: 0 < zeta <= 1");
    if (!(in.M / zeta <= 1.0 / 32.0)) throw DomainError("hypothesis violated: M / zeta <= 1/32");
    check_hypotheses(in);
    BoundReport r;
    const double K = static_cast<double>(grid.K());
    const double ek = std::exp(kappa(in.diam, in.beta_bar) / in.eps);
    const double emix = std::exp(-in.T / in.beta_bar);
    const double lin = in.M / zeta + std::sqrt(in.delta);
    r.term_disc = constant_D0_disc(in) * (K * zeta + ek * lin / (in.eps * in.eps));
    r.term_mixing = ek * emix * (std::sqrt(in.d) + in.diam);
    r.term_noising = std::sqrt(2.0 * in.beta_bar) * (in.diam + std::sqrt(in.d)) * std::sqrt(in.eps);
    r.total = r.term_disc + r.term_mixing + r.term_noising;
    r.headline = constant_D0(in) * (K * zeta + ek * lin / (in.eps * in.eps) + ek * emix + std::sqrt(in.eps));
    r.constants = constants(in);
    r.constants["K"] = K;
    r.constants["zeta"] = zeta;
    r.caveats = caveats(in);
    return r;
}

Corollary2 corollary2(double eta, double diam, double beta_bar, int d, double D) {
    if (!(eta > 0.0 && eta <= 1.0 / 32.0)) throw DomainError("corollary2 needs 0 < eta <= 1/32");
    Corollary2 c;
    c.eta = eta;
    c.kappa = kappa(diam, beta_bar);
    const double e2 = eta * eta;
    c.T = std::max(beta_bar * (c.kappa + 1.0) / e2, 2.0 * beta_bar * logfac(diam));
    c.M = std::exp(-c.kappa / e2) * std::pow(eta, 5);
    c.delta = std::exp(-2.0 * c.kappa / e2) * std::pow(eta, 10);
    c.gamma_K = e2;
    BoundInputs in;
    in.d = d;
    in.diam = diam;
    in.beta_bar = beta_bar;
    in.D = D;
    c.bound = 4.0 * constant_D0(in) * eta;
    return c;
}

}  // namespace ddm
