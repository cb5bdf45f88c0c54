#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ddm/cli.hpp"
#include "ddm/errors.hpp"
#include "ddm/verify.hpp"

using namespace ddm;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-model sampler, verification and bound toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    int threads = 0;
    app.add_option("--config", config_path, "JSON config file (schedule.*, target.*, run.*, sweep.*)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0: all cores)");

    // sample
    auto* sample = app.add_subcommand("sample", "backward trajectories to CSV");
    std::optional<std::string> s_target, s_schedule, s_mode, s_traj;
    std::optional<double> s_T, s_eps, s_delta, s_M;
    std::optional<std::size_t> s_n;
    sample->add_option("--target", s_target, "dirac | two_atom | five_atom | hypercube | circle | atoms");
    sample->add_option("--schedule", s_schedule, "constant | linear | cosine");
    sample->add_option("--T", s_T);
    sample->add_option("--eps", s_eps);
    sample->add_option("--delta", s_delta);
    sample->add_option("--M", s_M);
    sample->add_option("--mode", s_mode, "ei | em | zero");
    sample->add_option("--n", s_n);
    sample->add_option("--seed", seed);
    sample->add_option("--out", s_traj, "trajectory CSV (default OUT/traj.csv)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "parameter sweep: W1 per cell, null floor, JSON sidecar");
    std::optional<std::string> w_axis;
    std::vector<double> w_values;
    std::optional<std::size_t> w_reps;
    sweep->add_option("--axis", w_axis, "eps | delta | M | T | N_atoms");
    sweep->add_option("--values", w_values)->delimiter(',');
    sweep->add_option("--replicates", w_reps);

    // verify
    auto* verify = app.add_subcommand("verify", "lemma and flow verification suites");
    VerifyConfig vcfg;
    std::string v_json;
    verify->add_option("--suite", vcfg.suite, "all | c-lemmas | d-lemmas | flows | scaling");
    verify->add_option("--seed", seed);
    verify->add_option("--json", v_json, "write the JSON report here (default OUT/verify.json)");
    verify->add_option("--probes", vcfg.n_probes);
    verify->add_option("--corrupt", vcfg.corrupt, "inject a score error of this size into C1");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "evaluate the error bounds as JSON");
    BoundInputs bin;
    std::optional<double> b_eta, b_zeta;
    bounds->add_option("--d", bin.d);
    bounds->add_option("--diam", bin.diam);
    bounds->add_option("--beta-bar", bin.beta_bar);
    bounds->add_option("--T", bin.T);
    bounds->add_option("--eps", bin.eps);
    bounds->add_option("--delta", bin.delta);
    bounds->add_option("--M", bin.M);
    bounds->add_option("--Gamma", bin.Gamma);
    bounds->add_option("--N", bin.N);
    bounds->add_option("--d-M", bin.d_M);
    bounds->add_option("--eta", b_eta, "also evaluate the corollary parameter set");

    // grid
    auto* grid = app.add_subcommand("grid", "score-norm heatmap CSV over (t, x1)");
    double g_tlo = 1e-3, g_thi = 1.0, g_xlo = -3.0, g_xhi = 3.0;
    int g_res = 64;
    grid->add_option("--t-min", g_tlo);
    grid->add_option("--t-max", g_thi);
    grid->add_option("--x-min", g_xlo);
    grid->add_option("--x-max", g_xhi);
    grid->add_option("--resolution", g_res);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (seed) cfg.seed = *seed;
        const fs::path out(out_dir);

        if (*sample) {
            if (s_target) cfg.target_variant = *s_target;
            if (s_schedule) cfg.schedule_kind = *s_schedule;
            if (s_T) cfg.T = *s_T;
            if (s_eps) cfg.eps = *s_eps;
            if (s_delta) cfg.delta = *s_delta;
            if (s_M) cfg.M = *s_M;
            if (s_mode) cfg.mode = *s_mode;
            if (s_n) cfg.n = *s_n;
            validate(cfg);
            const Batch b = run_sample(cfg, threads);
            auto os = open_out(s_traj ? fs::path(*s_traj) : out / "traj.csv");
            write_trajectories_csv(os, b);
            return 0;
        }
        if (*sweep) {
            if (w_axis) cfg.axis = *w_axis;
            if (!w_values.empty()) cfg.values = w_values;
            if (w_reps) cfg.replicates = *w_reps;
            validate(cfg);
            const SweepResult r = run_sweep(sweep_from_config(cfg), threads);
            const std::string stem = "sweep_" + axis_name(r.spec.axis) + "_" + config_hash(cfg);
            open_out(out / (stem + ".csv")) << sweep_csv(r);
            open_out(out / (stem + ".json")) << r.sidecar.dump(2) << '\n';
            const TrendSummary t = summarize(r);
            std::cout << "axis " << axis_name(r.spec.axis) << '\n';
            for (std::size_t i = 0; i < t.values.size(); ++i)
                std::cout << "  " << t.values[i] << "  median W1 " << t.medians[i] << '\n';
            std::cout << "null floor: median " << t.null_median << ", SE " << t.null_se
                      << (t.resolved ? " (trend resolved)" : " (trend within noise)") << '\n';
            return 0;
        }
        if (*verify) {
            vcfg.seed = cfg.seed;
            vcfg.threads = threads;
            const SuiteReport rep = run_all(vcfg);
            auto os = open_out(v_json.empty() ? out / "verify.json" : fs::path(v_json));
            os << rep.to_json().dump(2) << '\n';
            for (const auto& c : rep.checks)
                std::cout << (c.pass() ? "PASS " : "FAIL ") << c.check_id << "  probes " << c.probes
                          << "  violations " << c.violations << (c.error.empty() ? "" : "  error: " + c.error)
                          << '\n';
            return rep.pass() ? 0 : 1;
        }
        if (*bounds) {
            nlohmann::json j;
            j["inputs"] = {{"d", bin.d},     {"diam", bin.diam},   {"beta_bar", bin.beta_bar},
                           {"T", bin.T},     {"eps", bin.eps},     {"delta", bin.delta},
                           {"M", bin.M},     {"Gamma", bin.Gamma}, {"N", bin.N},
                           {"d_M", bin.d_M}};
            j["constants"] = constants(bin);
            auto guarded = [&](const char* key, auto fn) {
                try {
                    j[key] = to_json(fn(bin));
                } catch (const DomainError& e) {
                    j[key] = {{"error", e.what()}};
                }
            };
            guarded("theorem1", theorem1);
            guarded("theorem3", theorem3);
            guarded("prop4", prop4);
            if (b_eta) {
                const Corollary2 c = corollary2(*b_eta, bin.diam, bin.beta_bar, bin.d);
                j["corollary2"] = {{"eta", c.eta}, {"kappa", c.kappa}, {"T", c.T},        {"M", c.M},
                                   {"delta", c.delta}, {"gamma_K", c.gamma_K}, {"bound", c.bound}};
            }
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (*grid) {
            validate(cfg);
            const NoiseSchedule sched = make_schedule(cfg);
            const CompactTarget model = model_target(cfg, derive_seed(cfg.seed, 2));
            const ScoreField f = make_field(cfg, model, sched);
            auto os = open_out(out / "grid.csv");
            emit_grid(os, f, g_tlo, g_thi, g_xlo, g_xhi, g_res);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
