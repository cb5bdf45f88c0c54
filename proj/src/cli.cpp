#include "ddm/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "ddm/errors.hpp"
#include "ddm/rng.hpp"

namespace ddm {

namespace {

const std::set<std::string> kKeys{
    "schedule.kind", "schedule.beta0", "schedule.betaT", "schedule.T", "schedule.eta", "schedule.r",
    "target.variant", "target.p", "target.d", "target.side", "target.radius", "target.atoms_file",
    "target.n_atoms", "target.offset", "run.eps", "run.delta", "run.M", "run.mode", "run.perturb", "run.growth",
    "run.init", "run.n", "run.seed", "sweep.axis", "sweep.values", "sweep.replicates"};

// Nested objects become dotted keys.
void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, nlohmann::json>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object())
            flatten(*it, key, out);
        else
            out[key] = *it;
    }
}

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key " + key + " has the wrong type");
    }
}

std::size_t get_count(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("config key " + key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j, RunConfig c) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    std::map<std::string, nlohmann::json> kv;
    flatten(j, "", kv);
    for (const auto& [k, v] : kv) {
        if (!kKeys.count(k)) throw ConfigError("unknown config key: " + k);
        if (k == "schedule.kind") c.schedule_kind = get_as<std::string>(v, k);
        else if (k == "schedule.beta0") c.beta0 = get_as<double>(v, k);
        else if (k == "schedule.betaT") c.betaT = get_as<double>(v, k);
        else if (k == "schedule.T") c.T = get_as<double>(v, k);
        else if (k == "schedule.eta") c.eta = get_as<double>(v, k);
        else if (k == "schedule.r") c.r = get_as<double>(v, k);
        else if (k == "target.variant") c.target_variant = get_as<std::string>(v, k);
        else if (k == "target.p") c.p = static_cast<int>(get_count(v, k));
        else if (k == "target.d") c.d = static_cast<int>(get_count(v, k));
        else if (k == "target.side") c.side = get_as<double>(v, k);
        else if (k == "target.radius") c.radius = get_as<double>(v, k);
        else if (k == "target.atoms_file") c.atoms_file = get_as<std::string>(v, k);
        else if (k == "target.n_atoms") c.n_atoms = get_count(v, k);
        else if (k == "target.offset") c.offset = get_as<double>(v, k);
        else if (k == "run.eps") c.eps = get_as<double>(v, k);
        else if (k == "run.delta") c.delta = get_as<double>(v, k);
        else if (k == "run.M") c.M = get_as<double>(v, k);
        else if (k == "run.mode") c.mode = get_as<std::string>(v, k);
        else if (k == "run.perturb") c.perturb = get_as<std::string>(v, k);
        else if (k == "run.growth") c.growth = get_as<std::string>(v, k);
        else if (k == "run.init") c.init = get_as<std::string>(v, k);
        else if (k == "run.n") c.n = get_count(v, k);
        else if (k == "run.seed") c.seed = get_as<std::uint64_t>(v, k);
        else if (k == "sweep.axis") c.axis = get_as<std::string>(v, k);
        else if (k == "sweep.values") c.values = get_as<std::vector<double>>(v, k);
        else if (k == "sweep.replicates") c.replicates = get_count(v, k);
    }
    validate(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["schedule"] = {{"kind", c.schedule_kind}, {"beta0", c.beta0}, {"betaT", c.betaT},
                     {"T", c.T},                {"eta", c.eta},     {"r", c.r}};
    j["target"] = {{"variant", c.target_variant}, {"p", c.p},           {"d", c.d},
                   {"side", c.side},              {"radius", c.radius}, {"atoms_file", c.atoms_file},
                   {"n_atoms", c.n_atoms}, {"offset", c.offset}};
    j["run"] = {{"eps", c.eps},         {"delta", c.delta}, {"M", c.M},       {"mode", c.mode},
                {"perturb", c.perturb}, {"growth", c.growth}, {"init", c.init}, {"n", c.n},
                {"seed", c.seed}};
    j["sweep"] = {{"axis", c.axis}, {"values", c.values}, {"replicates", c.replicates}};
    return j;
}

void validate(const RunConfig& c) {
    auto one_of = [](const std::string& v, std::initializer_list<const char*> opts, const char* key) {
        for (const char* o : opts)
            if (v == o) return;
        throw ConfigError(std::string("invalid value for ") + key + ": " + v);
    };
    one_of(c.schedule_kind, {"constant", "linear", "cosine"}, "schedule.kind");
    one_of(c.target_variant, {"dirac", "two_atom", "five_atom", "hypercube", "circle", "atoms"}, "target.variant");
    one_of(c.mode, {"ei", "em", "zero"}, "run.mode");
    one_of(c.perturb, {"fixed", "radial"}, "run.perturb");
    one_of(c.growth, {"affine", "root_quadratic", "flat"}, "run.growth");
    one_of(c.init, {"normal", "forward"}, "run.init");
    if (!(c.T > 0.0)) throw ConfigError("schedule.T must be positive");
    if (!(c.eps > 0.0) || c.eps >= c.T) throw ConfigError("run.eps must lie in (0, schedule.T)");
    if (!(c.delta > 0.0) || c.delta > 0.5) throw ConfigError("run.delta must lie in (0, 1/2]");
    if (c.M < 0.0) throw ConfigError("run.M must be non-negative");
    if (c.n == 0) throw ConfigError("run.n must be positive");
    if (c.d < 1) throw ConfigError("target.d must be positive");
    if (c.target_variant == "atoms" && c.atoms_file.empty())
        throw ConfigError("target.variant atoms needs target.atoms_file");
    if (!c.axis.empty()) parse_axis(c.axis);
}

std::string config_hash(const RunConfig& c) {
    const std::string s = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

NoiseSchedule make_schedule(const RunConfig& c) {
    if (c.schedule_kind == "constant") return NoiseSchedule::constant(c.beta0, c.T);
    if (c.schedule_kind == "linear") return NoiseSchedule::linear(c.beta0, c.betaT, c.T);
    return NoiseSchedule::cosine(c.T, c.eta, c.r);
}

CompactTarget make_target(const RunConfig& c) {
    const int d = c.d;
    if (c.target_variant == "dirac") return CompactTarget::dirac(Eigen::VectorXd::Zero(d));
    if (c.target_variant == "two_atom") {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, 2);
        a(0, 0) = c.offset - c.side / 2.0;
        a(0, 1) = c.offset + c.side / 2.0;
        return CompactTarget::empirical(a);
    }
    if (c.target_variant == "five_atom") {
        if (d < 2) throw ConfigError("five_atom needs target.d >= 2");
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, 5);
        a.topRows(2) << 0.0, 0.4, -0.3, 0.1, -0.2,
                        0.0, 0.1, 0.3, -0.4, -0.2;
        return CompactTarget::empirical(a).recentered();
    }
    if (c.target_variant == "hypercube") return CompactTarget::hypercube(c.p, d, c.side);
    if (c.target_variant == "circle") {
        if (d < 2) throw ConfigError("circle needs target.d >= 2");
        return CompactTarget::circle(c.radius, Eigen::VectorXd::Zero(d));
    }
    return load_atoms_csv(c.atoms_file);
}

CompactTarget model_target(const RunConfig& c, std::uint64_t seed) {
    const CompactTarget t = make_target(c);
    if (std::holds_alternative<Circle>(t.variant())) return t.as_empirical(c.n_atoms, seed);
    return t;
}

ScoreField make_field(const RunConfig& c, const CompactTarget& model, const NoiseSchedule& sched) {
    if (c.mode == "zero") return ScoreField::zero(model.dim(), sched);
    ScoreField f = ScoreField::exact(model, sched);
    if (c.M > 0.0) {
        const ErrorGrowth g = c.growth == "affine"           ? ErrorGrowth::Affine
                              : c.growth == "root_quadratic" ? ErrorGrowth::RootQuadratic
                                                             : ErrorGrowth::Flat;
        if (c.perturb == "fixed")
            f = perturb(f, c.M, PerturbMode::FixedDirection, Eigen::VectorXd::Unit(model.dim(), 0), g);
        else
            f = perturb(f, c.M, PerturbMode::RadialSign, {}, g);
    }
    return f;
}

namespace {

Batch sample_cell(const RunConfig& c, const CompactTarget& model, std::uint64_t seed, int threads,
                  bool keep_paths) {
    const NoiseSchedule sched = make_schedule(c);
    const StepGrid grid = make_stepgrid(sched, c.T, c.eps, c.delta);
    const ScoreField f = make_field(c, model, sched);
    BatchOptions opt;
    opt.scheme = c.mode == "em" ? Scheme::EM : Scheme::EI;
    opt.init = c.init == "forward" ? Init::ForwardLaw : Init::StandardNormal;
    opt.target = &model;
    opt.threads = threads;
    opt.keep_paths = keep_paths;
    return sample_backward(f, grid, c.n, seed, opt);
}

}  // namespace

Batch run_sample(const RunConfig& c, int threads) {
    validate(c);
    const CompactTarget model = model_target(c, derive_seed(c.seed, 2));
    return sample_cell(c, model, derive_seed(c.seed, 0), threads, true);
}

void write_trajectories_csv(std::ostream& os, const Batch& b) {
    if (b.paths.empty()) return;
    const Eigen::Index d = b.paths.front().states.front().size();
    os << "traj_id,k,t_k";
    for (Eigen::Index i = 1; i <= d; ++i) os << ",y_" << i;
    os << '\n';
    for (std::size_t p = 0; p < b.paths.size(); ++p) {
        const Trajectory& tr = b.paths[p];
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
            os << p << ',' << k << ',' << fmt(tr.grid.ts[k]);
            for (Eigen::Index i = 0; i < d; ++i) os << ',' << fmt(tr.states[k][i]);
            os << '\n';
        }
    }
}

SweepAxis parse_axis(const std::string& s) {
    if (s == "eps") return SweepAxis::eps;
    if (s == "delta") return SweepAxis::delta;
    if (s == "M") return SweepAxis::M;
    if (s == "T") return SweepAxis::T;
    if (s == "N_atoms") return SweepAxis::N_atoms;
    throw ConfigError("unknown sweep axis: " + s);
}

std::string axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::eps: return "eps";
        case SweepAxis::delta: return "delta";
        case SweepAxis::M: return "M";
        case SweepAxis::T: return "T";
        case SweepAxis::N_atoms: return "N_atoms";
    }
    return "?";
}

SweepSpec sweep_from_config(const RunConfig& c) {
    if (c.axis.empty()) throw ConfigError("sweep.axis is required for a sweep");
    SweepSpec s;
    s.axis = parse_axis(c.axis);
    s.values = c.values;
    s.replicates = c.replicates;
    s.base_config = c;
    s.seed = c.seed;
    return s;
}

namespace {

void check_spec(const SweepSpec& s) {
    if (s.values.empty()) throw ConfigError("sweep.values is empty");
    if (s.replicates < 1) throw ConfigError("sweep.replicates must be at least 1");
    const bool up = s.values.size() < 2 || s.values[1] > s.values[0];
    for (std::size_t i = 1; i < s.values.size(); ++i)
        if ((up && !(s.values[i] > s.values[i - 1])) || (!up && !(s.values[i] < s.values[i - 1])))
            throw ConfigError("sweep.values must be strictly monotone");
    validate(s.base_config);
}

RunConfig apply_axis(RunConfig c, SweepAxis a, double v) {
    switch (a) {
        case SweepAxis::eps: c.eps = v; break;
        case SweepAxis::delta: c.delta = v; break;
        case SweepAxis::M: c.M = v; break;
        case SweepAxis::T: c.T = v; break;
        case SweepAxis::N_atoms:
            if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("N_atoms values must be positive integers");
            c.n_atoms = static_cast<std::size_t>(v);
            break;
    }
    return c;
}

constexpr std::uint64_t kNullStream = 1000;

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, int threads) {
    check_spec(spec);
    SweepResult res;
    res.spec = spec;
    const std::size_t nv = spec.values.size(), R = spec.replicates;
    const std::size_t cells = nv * R;
    res.rows.resize(cells);
    res.null_w1.resize(R);
    const std::uint64_t axis_id = static_cast<std::uint64_t>(spec.axis);

    // cells first, then the null replicates, all on one work queue
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t job; (job = next++) < cells + R;) {
            if (job >= cells) {
                const std::size_t r = job - cells;
                const std::uint64_t s = derive_seed(spec.seed, kNullStream, r);
                const CompactTarget t = make_target(spec.base_config);
                const Cloud a = t.sample(spec.base_config.n, derive_seed(s, 0));
                const Cloud b = t.sample(spec.base_config.n, derive_seed(s, 1));
                res.null_w1[r] = w1(a, b, derive_seed(s, 3)).value;
                continue;
            }
            const std::size_t vi = job / R, r = job % R;
            SweepRow& row = res.rows[job];
            row.axis_value = spec.values[vi];
            row.replicate = r;
            row.seed = derive_seed(spec.seed, axis_id, r);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const RunConfig c = apply_axis(spec.base_config, spec.axis, spec.values[vi]);
                validate(c);
                const CompactTarget model = model_target(c, derive_seed(row.seed, 2));
                const Batch b = sample_cell(c, model, derive_seed(row.seed, 0), 1, false);
                const Cloud ref = make_target(c).sample(c.n, derive_seed(row.seed, 1));
                const W1Estimate e = w1(b.terminal, ref, derive_seed(row.seed, 3));
                row.w1 = e.value;
                row.method = method_name(e.method);
            } catch (const std::exception& e) {
                row.w1 = std::numeric_limits<double>::quiet_NaN();
                row.method = "skipped";
                row.reason = e.what();
            }
            row.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t w = std::min(cells + R, threads > 0 ? static_cast<std::size_t>(threads) : hw);
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    nlohmann::json sc;
    sc["config"] = to_json(spec.base_config);
    sc["config_hash"] = config_hash(spec.base_config);
    sc["axis"] = axis_name(spec.axis);
    sc["values"] = spec.values;
    sc["replicates"] = R;
    sc["master_seed"] = spec.seed;
    sc["code_version"] = DDM_VERSION;
    sc["seed_rule"] = "cell = derive_seed(master, axis_id, replicate); null = derive_seed(master, 1000, replicate)";
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t r = 0; r < R; ++r) seeds.push_back(derive_seed(spec.seed, axis_id, r));
    sc["replicate_seeds"] = seeds;
    sc["null_w1"] = res.null_w1;
    const TrendSummary ts = summarize(res);
    sc["trend"] = to_json(ts);
    res.sidecar = sc;
    return res;
}

std::string sweep_csv(const SweepResult& r) {
    std::ostringstream os;
    os << "axis_value,replicate,w1,method,runtime\n";
    for (const SweepRow& row : r.rows) {
        os << fmt(row.axis_value) << ',' << row.replicate << ',';
        if (!std::isnan(row.w1)) os << fmt(row.w1);
        os << ',' << row.method;
        if (!row.reason.empty()) {
            std::string reason = row.reason;
            std::replace(reason.begin(), reason.end(), '"', '\'');
            os << ": \"" << reason << '"';
        }
        os << ',' << std::fixed << std::setprecision(6) << row.runtime << std::defaultfloat << '\n';
    }
    return os.str();
}

TrendSummary summarize(const SweepResult& r) {
    TrendSummary s;
    const std::size_t R = r.spec.replicates;
    s.values = r.spec.values;
    for (std::size_t vi = 0; vi < r.spec.values.size(); ++vi) {
        std::vector<double> w;
        for (std::size_t k = 0; k < R; ++k) {
            const double x = r.rows[vi * R + k].w1;
            if (!std::isnan(x)) w.push_back(x);
        }
        s.medians.push_back(median(w));
    }
    s.null_median = median(r.null_w1);
    double mean = 0.0, var = 0.0;
    for (double x : r.null_w1) mean += x;
    mean /= static_cast<double>(r.null_w1.size());
    for (double x : r.null_w1) var += (x - mean) * (x - mean);
    var /= std::max<double>(1.0, static_cast<double>(r.null_w1.size()) - 1.0);
    // asymptotic standard error of a sample median, normal approximation
    s.null_se = 1.2533 * std::sqrt(var / static_cast<double>(R));
    s.total_change = s.medians.back() - s.medians.front();
    s.monotone_up = s.monotone_down = true;
    for (std::size_t i = 1; i < s.medians.size(); ++i) {
        if (!(s.medians[i] >= s.medians[i - 1])) s.monotone_up = false;
        if (!(s.medians[i] <= s.medians[i - 1])) s.monotone_down = false;
    }
    s.resolved = std::abs(s.total_change) > 2.0 * s.null_se;
    return s;
}

nlohmann::json to_json(const TrendSummary& s) {
    return {{"values", s.values},           {"medians", s.medians},
            {"null_median", s.null_median}, {"null_se", s.null_se},
            {"total_change", s.total_change}, {"monotone_non_decreasing", s.monotone_up},
            {"monotone_non_increasing", s.monotone_down}, {"resolved", s.resolved}};
}

void emit_grid(std::ostream& os, const ScoreField& field, double t_lo, double t_hi, double x_lo, double x_hi,
               int resolution) {
    if (resolution < 2) throw ConfigError("grid resolution must be at least 2");
    if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw ConfigError("grid needs 0 < t_lo < t_hi");
    const ScoreField exact = field.unperturbed();
    const bool pert = field.is_perturbed();
    os << "t,x1,norm_score,norm_error\n";
    for (int i = 0; i < resolution; ++i) {
        const double t = t_lo + (t_hi - t_lo) * i / (resolution - 1);
        for (int j = 0; j < resolution; ++j) {
            const double x1 = x_lo + (x_hi - x_lo) * j / (resolution - 1);
            Eigen::VectorXd x = Eigen::VectorXd::Zero(field.dim());
            x[0] = x1;
            const Eigen::VectorXd s = field.score(t, x);
            os << fmt(t) << ',' << fmt(x1) << ',' << fmt(s.norm()) << ',';
            if (pert) os << fmt((s - exact.score(t, x)).norm());
            os << '\n';
        }
    }
}

nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j{{"total", r.total},
                     {"term_disc", r.term_disc},
                     {"term_mixing", r.term_mixing},
                     {"term_noising", r.term_noising},
                     {"headline", r.headline}};
    j["constants"] = r.constants;
    j["caveats"] = r.caveats;
    return j;
}

}  // namespace ddm
