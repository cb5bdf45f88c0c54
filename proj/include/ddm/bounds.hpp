#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddm/sampler.hpp"

namespace ddm {

struct BoundInputs {
    int d = 1;
    double diam = 0.0;
    double beta_bar = 1.0;
    double T = 10.0;
    double eps = 1.0 / 32.0;
    double delta = 1.0 / 32.0;
    double M = 0.0;
    double Gamma = 0.0;     // Hessian exponent, polynomial bound
    double N = 1.0;         // number of atoms, statistical term
    double d_M = 1.0;       // Minkowski dimension
    double eta_w = 0.0;     // rate slack in N^{-1/(d_M + eta_w)}
    double D = 1.0;         // unspecified numerical constant
    double D1 = 1.0;        // unspecified numerical constant of the statistical rate
};

/**
 * total = term_disc + term_mixing + term_noising, each with its own explicit constant.
 * headline is the single-constant form D0 (...) with D0 carrying the factor D.
 */
struct BoundReport {
    double total = 0.0;
    double term_disc = 0.0;
    double term_mixing = 0.0;
    double term_noising = 0.0;
    double headline = 0.0;
    std::map<std::string, double> constants;
    std::vector<std::string> caveats;
};

double kappa(double diam, double beta_bar);
double tstar(double T, double beta_bar, double diam);

double constant_D0(const BoundInputs& in);          // D (1+b)^7 (1 + d + diam^4)(1 + log(1 + diam))
double constant_D0_disc(const BoundInputs& in);     // (1+b)^7 (8 + 512 d + 87328 (1+diam)^4)(1 + log(1 + diam))
double constant_C0(const BoundInputs& in);          // (1+b)^{7/2} (4 + 256 d + 43664 (1+diam)^4)
double constant_D0_poly(const BoundInputs& in);     // D (1 + d + (1+diam)^4) exp(3 (1+b)^2 (G+2)(1 + log(1+diam)))
double constant_D0_poly_disc(const BoundInputs& in);  // 4 (4 + 256 d + 43664 (1+diam)^4) exp(3 (1+b)^2 (G+2)(1+log(1+diam)))
double constant_D1_poly_mix(const BoundInputs& in);   // exp(2 (G+2)(1+b)^2 (1+log(1+diam))) (sqrt d + diam)

std::map<std::string, double> constants(const BoundInputs& in);

// Throw DomainError naming the violated hypothesis.
void check_hypotheses(const BoundInputs& in);

BoundReport theorem1(const BoundInputs& in);
BoundReport theorem3(const BoundInputs& in);

// theorem1 headline plus D1 N^{-1/(d_M + eta_w)}.
BoundReport prop4(const BoundInputs& in);

// L2-error version with threshold zeta; K is taken from the grid.
BoundReport theoremI1(const BoundInputs& in, double zeta, const StepGrid& grid);

struct Corollary2 {
    double eta = 0.0;
    double kappa = 0.0;
    double T = 0.0;      // smallest admissible horizon
    double M = 0.0;      // largest admissible error level
    double delta = 0.0;  // largest admissible A4 level
    double gamma_K = 0.0;
    double bound = 0.0;  // 4 D0 eta
};

// eta in (0, 1/32]; the closed endpoint is admitted so the eta = 1/32 parameter set can be evaluated.
Corollary2 corollary2(double eta, double diam, double beta_bar, int d, double D = 1.0);

}  // namespace ddm
