#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ddm {

struct ScheduleEval {
    double t = 0.0;
    double beta = 0.0;
    double int_beta_0_t = 0.0;
    double m = 1.0;
    double sigma2 = 0.0;
};

/**
 * Weight function t -> beta_t of the VP forward SDE dX = -beta_t X dt + sqrt(2 beta_t) dB.
 *
 * Constant: beta0. Linear: beta0 + (betaT - beta0) t / T.
 * Cosine: softmin_r(1, -abar'/abar) with the offset-cosine abar; its integral comes from a
 * Hermite table on 2^14 knots filled by adaptive quadrature.
 */
class NoiseSchedule {
public:
    enum class Kind { Constant, Linear, Cosine };

    static NoiseSchedule constant(double beta0, double T);
    static NoiseSchedule linear(double beta0, double betaT, double T);
    static NoiseSchedule cosine(double T, double eta = 0.008, double r = 0.01);

    Kind kind() const { return kind_; }
    double T() const { return T_; }
    double beta0() const { return beta0_; }
    double betaT() const { return betaT_; }
    double eta() const { return eta_; }
    double r() const { return r_; }

    double beta(double t) const;
    double integral_beta(double s, double t) const;
    // Direct adaptive Gauss-Kronrod quadrature, bypassing closed forms and tables.
    double integral_beta_quadrature(double s, double t, double abs_tol = 1e-10) const;
    ScheduleEval eval(double t) const;
    double m(double t) const;
    double sigma2(double t) const;

    // max(beta_T, 1/beta_0); the A2 constant for a non-decreasing schedule.
    double beta_bar() const;

    std::string describe() const;

private:
    NoiseSchedule(Kind k, double T) : kind_(k), T_(T) {}
    double raw_beta(double t) const;
    double cosine_antiderivative(double t) const;
    void check_time(double t) const;

    struct Table {
        double h = 0.0;
        std::vector<double> A;     // int_0^{t_i} beta
        std::vector<double> slope; // limited Hermite slopes
    };

    Kind kind_;
    double T_;
    double beta0_ = 1.0;
    double betaT_ = 1.0;
    double eta_ = 0.008;
    double r_ = 0.01;
    std::shared_ptr<const Table> table_;
};

// Cosine-schedule ingredient f = -abar'/abar, exposed for the r -> 0 property.
double cosine_f(double t, double T, double eta);
double softmin(double a, double b, double r);

struct D1Integrals {
    double I1 = 0.0;
    double I2 = 0.0;
};

/// I1 = int_s^t beta_{T-u}/sigma^2_{T-u} du, I2 = int_s^t beta_{T-u} m^2_{T-u}/sigma^4_{T-u} du
/// via their antiderivatives. T defaults to the schedule horizon.
D1Integrals closed_integrals_D1(const NoiseSchedule& sched, double s, double t,
                                std::optional<double> T = std::nullopt);

struct A2Report {
    bool pass = false;
    bool monotone = false;
    double beta_bar = 0.0;
    double worst_margin = 0.0;
    std::optional<std::size_t> first_violation;
    std::string note;
};

A2Report check_A2(const std::function<double(double)>& beta, double T, std::size_t grid_points);
A2Report check_A2(const NoiseSchedule& sched, std::size_t grid_points);

}  // namespace ddm
