#pragma once

#include <cstdint>
#include <functional>
#include <variant>

#include <Eigen/Dense>

#include "ddm/schedule.hpp"
#include "ddm/target.hpp"

namespace ddm {

enum class PerturbMode { None, FixedDirection, RadialSign };

// Profile g(x) of the injected error M g(x) / sigma_t^2.
enum class ErrorGrowth {
    Affine,         // 1 + |x|, saturates the A3 inequality
    RootQuadratic,  // sqrt(1 + |x|^2), saturates the A5 integrand pointwise
    Flat,           // 1
};

struct Perturbation {
    double M = 0.0;
    PerturbMode mode = PerturbMode::None;
    Eigen::VectorXd direction;  // FixedDirection only; unit norm
    ErrorGrowth growth = ErrorGrowth::Affine;
    // Inside bad_region the level is M / zeta instead of M.
    double zeta = 1.0;
    std::function<bool(const Eigen::VectorXd&)> bad_region;
};

/**
 * Score field s(t, x) built on a closed-form base (Gaussian mixture over atoms, Dirac,
 * centered hypercube, or the zero field) plus an optional controlled perturbation.
 *
 * Time t is forward-process time. Evaluations are pure; copies share nothing mutable.
 */
class ScoreField {
public:
    struct EmpiricalBase {
        Cloud atoms;
    };
    struct DiracBase {
        Eigen::VectorXd point;
    };
    struct HypercubeBase {
        int p = 1;
        int d = 1;
        double side = 1.0;
    };
    struct ZeroBase {
        int d = 1;
    };
    using Base = std::variant<EmpiricalBase, DiracBase, HypercubeBase, ZeroBase>;

    // Exact score of the target; circles must be discretized with as_empirical first.
    static ScoreField exact(const CompactTarget& target, NoiseSchedule sched);
    static ScoreField zero(int d, NoiseSchedule sched);

    int dim() const { return d_; }
    const NoiseSchedule& schedule() const { return sched_; }
    const Base& base() const { return base_; }
    const Perturbation& perturbation() const { return pert_; }
    bool is_perturbed() const { return pert_.mode != PerturbMode::None && pert_.M > 0.0; }
    bool is_zero() const { return std::holds_alternative<ZeroBase>(base_); }

    // The same field with the perturbation removed.
    ScoreField unperturbed() const;
    ScoreField with_perturbation(Perturbation p) const;

    Eigen::VectorXd score(double t, const Eigen::VectorXd& x) const;
    Eigen::VectorXd base_score(double t, const Eigen::VectorXd& x) const;
    Eigen::VectorXd offset(double t, const Eigen::VectorXd& x) const;
    Eigen::MatrixXd hessian(double t, const Eigen::VectorXd& x) const;
    Eigen::VectorXd dt_score(double t, const Eigen::VectorXd& x) const;
    // log p_t(x) including normalization; exact non-zero bases only.
    double log_density(double t, const Eigen::VectorXd& x) const;

    // Mixture time derivative with a chosen sign on the <x, X_k> terms of d/dt f_k and its
    // gradient. The derivation gives -1, which dt_score uses; +1 exists for the FD gate.
    Eigen::VectorXd dt_score_branch(double t, const Eigen::VectorXd& x, double inner_sign) const;

private:
    ScoreField(Base b, int d, NoiseSchedule s) : base_(std::move(b)), d_(d), sched_(std::move(s)) {}
    void require_time(double t) const;

    Base base_;
    int d_;
    NoiseSchedule sched_;
    Perturbation pert_;
};

ScoreField perturb(const ScoreField& base, double M, PerturbMode mode,
                   Eigen::VectorXd direction = {}, ErrorGrowth growth = ErrorGrowth::Affine);

// Error level M outside bad_region and M / zeta inside, with the sqrt(1 + |x|^2) profile.
ScoreField l2_perturb(const ScoreField& base, double M, double zeta,
                      std::function<bool(const Eigen::VectorXd&)> bad_region,
                      PerturbMode mode = PerturbMode::FixedDirection, Eigen::VectorXd direction = {});

struct L2ErrorReport {
    double mean_sq_error = 0.0;
    double bound = 0.0;  // M^2 E[1 + |Y|^2] / sigma^4
    double frac_in_Ak = 0.0;
    double markov_bound = 0.0;  // zeta^2 E[1 + |Y|^2]
    bool pass = false;
};

// Empirical A5 and A_k statistics of field against its exact base on a cloud at forward time t.
L2ErrorReport empirical_l2_error(const ScoreField& field, double t, const Cloud& cloud);

struct DsmEstimate {
    double value = 0.0;
    double std_err = 0.0;
    double t_min = 0.0;
    std::size_t n_time = 0;
    std::size_t n_mc = 0;
};

DsmEstimate dsm_loss(const ScoreField& field, const CompactTarget& target,
                     const std::function<double(double)>& phi, std::size_t n_mc, std::size_t n_time,
                     std::uint64_t seed, double t_min = 1e-3);

// Scaled complementary error function exp(x^2) erfc(x), x >= 0.
double erfcx(double x);

}  // namespace ddm
