#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddm/sampler.hpp"

namespace ddm {

struct ProbeRecord {
    double t = 0.0;
    double x_norm = 0.0;
    double margin = 0.0;  // positive = slack
    std::string what;
};

struct CheckReport {
    std::string check_id;
    std::size_t probes = 0;
    std::size_t violations = 0;
    double worst_margin = 0.0;
    std::vector<ProbeRecord> details;
    std::map<std::string, double> metrics;
    std::vector<std::string> notes;
    std::string error;  // set when the check aborted

    bool pass() const { return error.empty() && violations == 0; }
    // Records a probe; margins below -slack count as violations.
    void record(const ProbeRecord& p, double slack = 1e-9);
};

nlohmann::json to_json(const CheckReport& r);

// Probe law: t log-uniform on [1e-3, T], x ~ N(0, (2 (1 + diam))^2 I).
struct Probe {
    double t;
    Eigen::VectorXd x;
};
std::vector<Probe> draw_probes(int d, double diam, double T, std::size_t n, std::uint64_t seed);

// Both inequalities of the score growth lemma. corrupt > 0 swaps in the score plus corrupt / sigma^2 e_1.
CheckReport check_C1(const CompactTarget& target, const NoiseSchedule& sched, std::size_t n_probes,
                     std::uint64_t seed, double corrupt = 0.0);

// Quadratic-form bound with random unit matrices, operator-norm bound, and the norm computed
// by repeated squaring versus a symmetric eigensolver (agreement 1e-8 relative).
CheckReport check_C2(const CompactTarget& target, const NoiseSchedule& sched, std::size_t n_probes,
                     std::uint64_t seed);

// Finite-difference gate on dt_score (mixtures: both inner-product sign branches), then the bound.
CheckReport check_C3(const CompactTarget& target, const NoiseSchedule& sched, std::size_t n_probes,
                     std::uint64_t seed);

CheckReport check_D1(const NoiseSchedule& sched, std::size_t n_probes, std::uint64_t seed);
CheckReport check_D2(const NoiseSchedule& sched, std::size_t n_probes);
CheckReport check_D8(const CompactTarget& target, const NoiseSchedule& sched, double T, std::size_t n_pairs,
                     std::uint64_t seed);
CheckReport check_A2_report(const NoiseSchedule& sched, std::size_t grid_points);

// Tangent-flow norm against the contraction envelope, pathwise.
CheckReport check_prop6(const CompactTarget& target, const NoiseSchedule& sched, const StepGrid& grid,
                        std::size_t n_paths, std::uint64_t seed);

struct InterpOptions {
    int substeps = 32;        // fine Euler steps per coarse step
    double tolerance = 0.1;   // relative residual
    double halving_ratio = 0.6;
    bool refine = true;       // also run 2 * substeps and report the ratio
};

/**
 * Stochastic interpolation identity on common Brownian paths. The coarse scheme uses `field`
 * frozen at t_k; the exact process uses the target score. LHS = Y_{t_K} - Ybar_{t_K} from a fine
 * Euler grid; RHS = sum_j h DPhi_{j+1 -> N}(Ybar_{j+1}) Delta b_j with Phi the Euler flow of the
 * exact drift. Residual = sum |LHS - RHS| / sum |LHS| over paths. Each Delta b_j is audited
 * against the three-term envelope.
 */
CheckReport check_interp(const CompactTarget& target, const NoiseSchedule& sched, const StepGrid& grid,
                         const ScoreField& field, std::size_t n_paths, std::uint64_t seed,
                         const InterpOptions& opt = {});

// Zero-field exponential integrator against the variance (3 e^{2 t_K} - 1) / 2, 4 standard errors.
CheckReport check_F2(const NoiseSchedule& sched, double t_K, std::size_t n, std::uint64_t seed, int d = 2);

// Hypercube: slope of sigma_t^2 sup |H| over t (bounded, |slope| <= 0.15).
// Two atoms: sigma_t^4 |H(0)| stays above half its t = 1e-2 value.
CheckReport check_hessian_scaling(const CompactTarget& target, const NoiseSchedule& sched,
                                  const std::vector<double>& t_list);

std::vector<double> default_t_ladder();  // geometric, 1 down to 1e-4

struct VerifyConfig {
    std::uint64_t seed = 0;
    std::string suite = "all";  // all | c-lemmas | d-lemmas | flows | scaling
    std::size_t n_probes = 1000;
    std::size_t prop6_paths = 50;
    std::size_t interp_paths = 20;
    std::size_t f2_samples = 100000;
    double schedule_T = 10.0;
    double corrupt = 0.0;  // injected score corruption for C1
    int threads = 0;
};

struct SuiteReport {
    std::vector<CheckReport> checks;  // ordered by check_id
    bool pass() const;
    nlohmann::json to_json() const;
};

// Standard targets: dirac, two_atom, five_atom, hypercube (p = 1, d = 2), all recentered.
std::vector<std::pair<std::string, CompactTarget>> standard_targets();

SuiteReport run_all(const VerifyConfig& cfg);

}  // namespace ddm
