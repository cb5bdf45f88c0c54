#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ddm/schedule.hpp"
#include "ddm/score.hpp"
#include "ddm/target.hpp"

namespace ddm {

/**
 * Backward step sizes gamma_0..gamma_K with sum T and gamma_K = eps.
 * ts holds t_0 = 0, ..., t_{K+1} = T; backward time t maps to forward time T - t.
 */
struct StepGrid {
    std::vector<double> gammas;
    std::vector<double> ts;
    double T = 0.0;
    double eps = 0.0;
    double delta = 0.0;

    int K() const { return static_cast<int>(gammas.size()) - 1; }
    double t_K() const { return ts[gammas.size() - 1]; }
};

// A4 grid built backwards from T. Constant beta uses gamma = delta / (beta0 + 1/(2 s)),
// other schedules bisect gamma * beta_{T-t_k} / sigma^2_{T-t_{k+1}} <= delta.
StepGrid make_stepgrid(const NoiseSchedule& sched, double T, double eps, double delta);

// K equal steps covering [0, T - eps] followed by gamma_K = eps. delta is the audited A4 level.
StepGrid uniform_grid(const NoiseSchedule& sched, double T, double eps, int K);

// Grid from explicit step sizes; the last entry is eps.
StepGrid grid_from_steps(const NoiseSchedule& sched, std::vector<double> gammas);

struct A4Audit {
    bool pass = false;
    double worst_margin = 0.0;  // min over k < K of delta - gamma_k beta_{T-t_k} / sigma^2_{T-t_{k+1}}
    double max_ratio = 0.0;
    int worst_k = -1;
};

A4Audit audit_a4(const NoiseSchedule& sched, const StepGrid& grid);

struct StepCoeffs {
    double gamma = 0.0;   // gamma_k
    double g = 0.0;       // integral of beta over [T - t_{k+1}, T - t_k]
    double beta = 0.0;    // beta_{T - t_k}
    double gamma1 = 0.0;  // exp(g) - 1
    double gamma2 = 0.0;  // (exp(2g) - 1) / 2
};

StepCoeffs step_coeffs(const NoiseSchedule& sched, const StepGrid& grid, int k);

struct Trajectory {
    std::vector<Eigen::VectorXd> states;  // Y_0..Y_K
    std::uint64_t seed = 0;
    StepGrid grid;
};

enum class Scheme { EI, EM };

// Y_0 ~ N(0, I), or the exact forward law L(X_T) of the target.
enum class Init { StandardNormal, ForwardLaw };

/**
 * Iterates the backward recursion for k = 0..K-1, returning Y_0..Y_K.
 *
 * Noise: a block of K standard normal d-vectors is drawn from Stream(seed) up front and
 * step k consumes block K-1-k, so grids sharing their final steps share the late noise.
 * Throws DivergedError when a component leaves [-1e6, 1e6] or becomes non-finite.
 */
Trajectory backward(const ScoreField& field, const StepGrid& grid, const Eigen::VectorXd& y0,
                    std::uint64_t seed, Scheme scheme);
Trajectory backward_ei(const ScoreField& field, const StepGrid& grid, const Eigen::VectorXd& y0,
                       std::uint64_t seed);
Trajectory backward_em(const ScoreField& field, const StepGrid& grid, const Eigen::VectorXd& y0,
                       std::uint64_t seed);

struct BatchOptions {
    Scheme scheme = Scheme::EI;
    Init init = Init::StandardNormal;
    const CompactTarget* target = nullptr;  // required for Init::ForwardLaw
    int threads = 0;                        // 0: hardware concurrency
    bool keep_paths = false;
};

struct Batch {
    Cloud terminal;                 // d x n, column i = Y_K of trajectory i
    std::vector<Trajectory> paths;  // filled when keep_paths
};

/**
 * n independent trajectories. Trajectory i uses s_i = derive_seed(seed, i): Y_0 from
 * derive_seed(s_i, 0) and the step noise from derive_seed(s_i, 1). Output order is by i
 * and does not depend on the thread count.
 */
Batch sample_backward(const ScoreField& field, const StepGrid& grid, std::size_t n, std::uint64_t seed,
                      const BatchOptions& opt = {});

// Exact forward marginal X_t = m_t X_0 + sigma_t Z.
Cloud forward_sample(const CompactTarget& target, const NoiseSchedule& sched, double t, std::size_t n,
                     std::uint64_t seed);

struct OneStepGap {
    double mean_gap = 0.0;  // |E[EI - EM]| over antithetic matched noise
    double rms_gap = 0.0;   // sqrt(E|EI - EM|^2) over the same noise
};

// One step of size gamma from forward time t0 = T - t_k at y0, EI versus EM on shared noise.
OneStepGap one_step_gap(const ScoreField& field, double t0, const Eigen::VectorXd& y0, double gamma,
                        std::size_t n_pairs, std::uint64_t seed);

struct TangentRecord {
    std::vector<double> u;     // backward times s..t
    std::vector<double> norm;  // operator norm of grad Y_{s,u}
    Eigen::MatrixXd jacobian;  // grad Y_{s,t}
    Eigen::VectorXd y;         // Y_{s,t}
};

/**
 * Backward path from (s, x) with its tangent process d J = beta_{T-u} (I + 2 H(T-u, Y)) J du.
 * Substeps h satisfy h beta_{T-u} / sigma^2_{T-u} <= delta / 4; the path takes Euler steps
 * on the exact drift and J explicit midpoint steps with H at the averaged state.
 * seed = 0 with noiseless = true follows the deterministic drift only.
 */
TangentRecord tangent_flow(const ScoreField& field, double T, double s, double t, const Eigen::VectorXd& x,
                           std::uint64_t seed, double delta = 0.05, bool noiseless = false);

struct ThresholdedPair {
    Trajectory y;
    Trajectory ystar;
    std::optional<int> divergence_step;
};

/**
 * Y follows approx throughout. Y* follows approx until the first k with
 * |approx - exact|(T - t_k, Y_k) > (M / zeta) / sigma^2_{T-t_k}, and the exact score from then on.
 * Both use the noise of backward_ei(seed).
 */
ThresholdedPair thresholded_pair(const ScoreField& exact, const ScoreField& approx, double zeta, double M,
                                 const StepGrid& grid, const Eigen::VectorXd& y0, std::uint64_t seed);

struct DdpmRow {
    int k = 0;
    double t = 0.0;  // forward time T - t_{K-k}
    double alpha = 0.0;
    double alpha_bar = 0.0;    // running product
    double m2 = 0.0;           // m^2_{T - t_{K-k}}
    double beta_ddpm = 0.0;    // 1 - alpha
};

std::vector<DdpmRow> ddpm_convert(const NoiseSchedule& sched, const StepGrid& grid);

struct MomentAudit {
    std::vector<double> second_moment;  // E|Y_k|^2 per k
    double max_moment = 0.0;
    int argmax_k = 0;
    double K0 = 0.0;  // 5 d + 320 (1 + diam)^2
    bool pass = false;
};

MomentAudit moment_audit(const std::vector<Trajectory>& paths, double diam);

double moment_bound_K0(int d, double diam);
double increment_bound_L0(int d, double diam);

struct IncrementAudit {
    std::vector<double> mid_increment;  // E|Ybar_{t_k + gamma_k/2} - Y_k|^2
    std::vector<double> bound;          // L0 beta_{T-t_k} gamma_k
    double worst_ratio = 0.0;
    bool pass = false;
};

// Mid-step states of the EI interpolation process, drawn from stored trajectories.
IncrementAudit increment_audit(const ScoreField& field, const std::vector<Trajectory>& paths, double diam,
                               std::uint64_t seed);

}  // namespace ddm
