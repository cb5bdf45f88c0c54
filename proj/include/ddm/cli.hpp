#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddm/bounds.hpp"
#include "ddm/metrics.hpp"
#include "ddm/sampler.hpp"

namespace ddm {

/**
 * Run configuration. Keys in the config file are grouped as schedule.*, target.*, run.*, sweep.*
 * and may be written nested ({"run": {"eps": 0.01}}) or dotted ({"run.eps": 0.01}).
 *
 *   schedule.kind     constant | linear | cosine
 *   schedule.beta0, schedule.betaT, schedule.T, schedule.eta, schedule.r
 *   target.variant    dirac | two_atom | five_atom | hypercube | circle | atoms
 *   target.p, target.d, target.side (hypercube side, two_atom separation), target.radius,
 *   target.atoms_file (variant atoms), target.n_atoms (circle discretization for the score),
 *   target.offset (two_atom midpoint along e_1)
 *   run.eps, run.delta, run.M, run.mode (ei | em | zero), run.perturb (fixed | radial),
 *   run.growth (affine | root_quadratic | flat), run.init (normal | forward), run.n, run.seed
 *   sweep.axis (eps | delta | M | T | N_atoms), sweep.values, sweep.replicates
 */
struct RunConfig {
    std::string schedule_kind = "constant";
    double beta0 = 1.0;
    double betaT = 1.0;
    double T = 4.0;
    double eta = 0.008;
    double r = 0.01;

    std::string target_variant = "two_atom";
    int p = 1;
    int d = 2;
    double side = 1.0;
    double radius = 1.0;
    std::string atoms_file;
    std::size_t n_atoms = 256;
    double offset = 0.0;

    double eps = 0.01;
    double delta = 0.05;
    double M = 0.0;
    std::string mode = "ei";
    std::string perturb = "fixed";
    std::string growth = "affine";
    std::string init = "normal";
    std::size_t n = 512;
    std::uint64_t seed = 0;

    std::string axis;
    std::vector<double> values;
    std::size_t replicates = 16;
};

// Throws ConfigError on unknown keys, wrong types and invalid values.
RunConfig parse_config(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);
void validate(const RunConfig& c);
// FNV-1a over the canonical JSON dump, 16 hex digits.
std::string config_hash(const RunConfig& c);

NoiseSchedule make_schedule(const RunConfig& c);
// The target law pi.
CompactTarget make_target(const RunConfig& c);
// The law whose exact score drives the sampler: circles are discretized into n_atoms atoms.
CompactTarget model_target(const RunConfig& c, std::uint64_t seed);
ScoreField make_field(const RunConfig& c, const CompactTarget& model, const NoiseSchedule& sched);

// Backward trajectories for the `sample` subcommand.
Batch run_sample(const RunConfig& c, int threads);
// Columns traj_id, k, t_k, y_1..y_d.
void write_trajectories_csv(std::ostream& os, const Batch& b);

enum class SweepAxis { eps, delta, M, T, N_atoms };
SweepAxis parse_axis(const std::string& s);
std::string axis_name(SweepAxis a);

struct SweepSpec {
    SweepAxis axis = SweepAxis::M;
    std::vector<double> values;
    std::size_t replicates = 16;
    RunConfig base_config;
    std::uint64_t seed = 0;
};

SweepSpec sweep_from_config(const RunConfig& c);

struct SweepRow {
    double axis_value = 0.0;
    std::size_t replicate = 0;
    double w1 = 0.0;  // NaN on skipped rows
    std::string method;
    double runtime = 0.0;  // seconds; the only non-reproducible column
    std::uint64_t seed = 0;
    std::string reason;    // why the row was skipped
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepRow> rows;   // ordered by (value index, replicate)
    std::vector<double> null_w1;  // target vs target, one per replicate
    nlohmann::json sidecar;
};

/**
 * One cell per (value, replicate). The cell seed is derive_seed(seed, axis id, replicate): replicates
 * share their randomness across the values of one axis, so trends are compared on common random
 * numbers. Inside a cell: sampler derive_seed(cell, 0), reference cloud derive_seed(cell, 1), atoms
 * of a discretized target derive_seed(cell, 2), W1 directions derive_seed(cell, 3).
 */
SweepResult run_sweep(const SweepSpec& spec, int threads = 0);
std::string sweep_csv(const SweepResult& r);

struct TrendSummary {
    std::vector<double> values;
    std::vector<double> medians;
    double null_median = 0.0;
    double null_se = 0.0;        // standard error of a median under the null sweep
    double total_change = 0.0;   // medians.back() - medians.front()
    bool monotone_up = false;    // non-decreasing
    bool monotone_down = false;  // non-increasing
    bool resolved = false;       // |total_change| > 2 null_se
};

TrendSummary summarize(const SweepResult& r);
nlohmann::json to_json(const TrendSummary& s);

// Heatmap of |s(t, x)| and |s - grad log p_t| over (t, x1) with the other coordinates at 0.
void emit_grid(std::ostream& os, const ScoreField& field, double t_lo, double t_hi, double x_lo, double x_hi,
               int resolution);

nlohmann::json to_json(const BoundReport& r);

}  // namespace ddm
