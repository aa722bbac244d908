// Scenario-driven front end: analyze formations, steer them through a clique,
// reproduce mismatch drift, and compute compensating offsets.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "formctl/formation.hpp"
#include "formctl/io.hpp"
#include "formctl/liegroup.hpp"
#include "formctl/orbit.hpp"
#include "formctl/robustness.hpp"
#include "formctl/scenario.hpp"
#include "formctl/sim.hpp"
#include "formctl/steering.hpp"

namespace fs = std::filesystem;
using namespace formctl;

namespace {

// Exit codes: 0 success/verified, 1 usage error, 2 numerical failure, 3 verification failed.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumerical = 2;
constexpr int kUnverified = 3;

struct Options {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> rate;
    std::optional<double> epsilon;
    bool refine = false;
    int jobs = 1;
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

Configuration settle_to_target(const Scenario& sc) {
    FieldFn nominal = [&](const Configuration& p) {
        return vector_field(sc.graph, sc.law, p);
    };
    SettleOptions opt;
    opt.step = sc.integrator.step;
    return settle(nominal, sc.initial, 1e-10, 2000.0, opt).state;
}

OffsetField build_perturbation(const Scenario& sc, const Options& opt) {
    const PerturbationSpec& spec = *sc.perturbation;
    if (!spec.offsets.empty()) {
        OffsetField h = OffsetField::on_graph(sc.graph);
        for (const auto& [i, j, v] : spec.offsets) h.set(i, j, v);
        return h;
    }
    std::uint64_t seed = opt.seed ? *opt.seed : spec.seed.value_or(0);
    return sample_perturbation(sc.graph, *spec.magnitude, seed);
}

std::string json_generator(const SEAlgebraElement& g) {
    JsonObject o;
    o.raw("omega", json_matrix(g.omega));
    o.raw("vel", json_vector(g.vel));
    o.add("norm", g.norm());
    return o.str();
}

std::string json_offsets(const OffsetField& f) {
    JsonArray arr;
    for (const auto& [e, c] : f.entries()) {
        JsonObject o;
        o.add("from", e.first).add("to", e.second).add("value", c);
        arr.raw(o.str());
    }
    return arr.str();
}

std::string json_eigenvalues(const Eigen::VectorXcd& ev) {
    std::vector<std::pair<double, double>> vals;
    for (int i = 0; i < ev.size(); ++i) vals.emplace_back(ev(i).real(), ev(i).imag());
    std::sort(vals.begin(), vals.end());
    JsonArray arr;
    for (const auto& [re, im] : vals) {
        JsonArray pair;
        pair.add(re).add(im);
        arr.raw(pair.str());
    }
    return arr.str();
}

int cmd_analyze(const Scenario& sc, const Options& opt, const std::string& stem,
                std::ostream& log) {
    Configuration q = settle_to_target(sc);
    bool rigid = is_infinitesimally_rigid(sc.graph, q);
    StabilityReport report = classify_orbit(sc.graph, sc.law, q);
    log << "rigid: " << (rigid ? "true" : "false")
        << ", zero eigenvalues: " << report.zero_count
        << ", classification: " << to_string(report.classification) << "\n";
    JsonObject o;
    o.add("scenario", sc.name.empty() ? stem : sc.name);
    o.add("rigid", rigid);
    o.add("zero_count", report.zero_count);
    o.add("classification", to_string(report.classification));
    o.add("zero_tolerance", report.zero_tolerance);
    o.raw("eigenvalues", json_eigenvalues(report.eigenvalues));
    o.raw("settled_configuration", json_matrix(q.points()));
    write_file(fs::path(opt.out_dir) / (stem + "_analyze.json"), o.str() + "\n");
    return kOk;
}

int cmd_steer(const Scenario& sc, const Options& opt, const std::string& stem,
              std::ostream& log) {
    if (!sc.steering || !sc.clique) {
        log << "error: steer needs a steering target and a clique in the scenario\n";
        return kUsage;
    }
    Configuration q = settle_to_target(sc);
    SEElement target = sc.steering->element(sc.dimension);

    double diameter = 0.0;
    for (int i = 0; i < q.count(); ++i)
        for (int j = i + 1; j < q.count(); ++j)
            diameter = std::max(diameter, (q.point(i) - q.point(j)).norm());
    double epsilon = opt.epsilon ? *opt.epsilon : sc.epsilon.value_or(0.1 * diameter);

    SteeringPlan plan;
    SteeringOutcome outcome;
    ControllabilityReport verdict;
    std::optional<double> fixed_rate = opt.rate ? opt.rate : sc.rate;
    if (fixed_rate) {
        plan = plan_steering(sc.graph, sc.law, q, *sc.clique, target, *fixed_rate, opt.refine);
        outcome = execute_steering(sc.graph, sc.law, q, plan);
        verdict = verify_epsilon_controllability(outcome, epsilon);
    } else {
        // Shrink r until the epsilon bound is met.
        double r = 0.1 / std::max(1e-6, se_log(target).norm());
        for (int attempt = 0; attempt < 8; ++attempt, r *= 0.5) {
            plan = plan_steering(sc.graph, sc.law, q, *sc.clique, target, r, opt.refine);
            outcome = execute_steering(sc.graph, sc.law, q, plan);
            verdict = verify_epsilon_controllability(outcome, epsilon);
            if (verdict.verified) break;
        }
    }

    write_file(fs::path(opt.out_dir) / (stem + "_steer_trajectory.csv"),
               trajectory_csv(outcome.trajectory));
    JsonObject o;
    o.add("scenario", sc.name.empty() ? stem : sc.name);
    o.add("rate", plan.rate);
    o.add("duration", plan.duration);
    o.add("epsilon", epsilon);
    o.add("max_orbit_distance", outcome.max_orbit_distance);
    o.add("endpoint_error", outcome.endpoint_error);
    o.add("settled_error", outcome.settled_error);
    o.add("settle_phase_max_orbit_distance", outcome.settle_phase_max_orbit_distance);
    o.add("verified", verdict.verified);
    o.add("orbit_margin", verdict.orbit_margin);
    o.add("endpoint_margin", verdict.endpoint_margin);
    o.add("settled_margin", verdict.settled_margin);
    o.raw("coefficients", json_vector(plan.coefficients));
    o.raw("offsets", json_offsets(plan.offsets));
    o.raw("target_generator", json_generator(plan.target_generator));
    write_file(fs::path(opt.out_dir) / (stem + "_steer_outcome.json"), o.str() + "\n");
    log << "steer: rate " << format_double(plan.rate) << ", max orbit distance "
        << format_double(outcome.max_orbit_distance) << ", settled error "
        << format_double(outcome.settled_error) << ", verified "
        << (verdict.verified ? "true" : "false") << "\n";
    return verdict.verified ? kOk : kUnverified;
}

int cmd_drift(const Scenario& sc, const Options& opt, const std::string& stem,
              std::ostream& log) {
    if (!sc.perturbation) {
        log << "error: drift needs a perturbation spec in the scenario\n";
        return kUsage;
    }
    Configuration q = settle_to_target(sc);
    OffsetField h = build_perturbation(sc, opt);
    DriftResult res = demonstrate_drift(sc.graph, sc.law, q, h);
    write_file(fs::path(opt.out_dir) / (stem + "_drift.csv"), trajectory_csv(res.trajectory));
    JsonObject o;
    o.add("scenario", sc.name.empty() ? stem : sc.name);
    o.raw("generator", json_generator(res.fit.generator));
    o.add("fit_residual", res.fit.residual);
    o.raw("perturbation", json_offsets(h));
    o.raw("limit_state", json_matrix(res.limit_state.points()));
    write_file(fs::path(opt.out_dir) / (stem + "_drift.json"), o.str() + "\n");
    log << "drift: generator norm " << format_double(res.fit.generator.norm())
        << ", fit residual " << format_double(res.fit.residual) << "\n";
    return kOk;
}

int cmd_compensate(const Scenario& sc, const Options& opt, const std::string& stem,
                   std::ostream& log) {
    if (!sc.perturbation || !sc.clique) {
        log << "error: compensate needs a perturbation spec and a clique\n";
        return kUsage;
    }
    Configuration q = settle_to_target(sc);
    OffsetField h = build_perturbation(sc, opt);
    DriftResult before = demonstrate_drift(sc.graph, sc.law, q, h);
    CompensationResult comp = solve_offset(sc.graph, sc.law, q, *sc.clique, h);
    VectorXd compensated_field =
        vector_field(sc.graph, sc.law, comp.equilibrium, &h, &comp.offset);
    RigidFit after = fit_rigid_motion(comp.equilibrium, compensated_field);

    JsonObject o;
    o.add("scenario", sc.name.empty() ? stem : sc.name);
    o.raw("offset", json_offsets(comp.offset));
    o.add("residual", comp.residual);
    o.add("iterations", comp.iterations);
    o.add("classification", to_string(comp.stability.classification));
    o.add("zero_count", comp.stability.zero_count);
    o.add("drift_before", before.fit.generator.norm());
    o.add("drift_after", after.generator.norm());
    o.raw("equilibrium", json_matrix(comp.equilibrium.points()));
    write_file(fs::path(opt.out_dir) / (stem + "_compensate.json"), o.str() + "\n");
    log << "compensate: residual " << format_double(comp.residual) << ", drift before "
        << format_double(before.fit.generator.norm()) << ", after "
        << format_double(after.generator.norm()) << ", "
        << to_string(comp.stability.classification) << "\n";
    return kOk;
}

int cmd_export(const Scenario& sc, const Options& opt, const std::string& stem,
               std::ostream& log) {
    write_file(fs::path(opt.out_dir) / (stem + "_export.yaml"), export_scenario(sc));
    log << "exported " << stem << "_export.yaml\n";
    return kOk;
}

int run_one(const std::string& command, const std::string& file, const Options& opt,
            std::ostream& log) {
    try {
        Scenario sc = load_scenario(file);
        std::string stem = stem_of(file);
        if (command == "analyze") return cmd_analyze(sc, opt, stem, log);
        if (command == "steer") return cmd_steer(sc, opt, stem, log);
        if (command == "drift") return cmd_drift(sc, opt, stem, log);
        if (command == "compensate") return cmd_compensate(sc, opt, stem, log);
        if (command == "export") return cmd_export(sc, opt, stem, log);
        log << "error: unknown command\n";
        return kUsage;
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

int aggregate(const std::vector<int>& codes) {
    for (int wanted : {kUsage, kNumerical, kUnverified})
        if (std::find(codes.begin(), codes.end(), wanted) != codes.end()) return wanted;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"formation steering and robustness toolkit"};
    app.require_subcommand(1);

    Options opt;
    std::vector<std::string> files;
    for (const char* name : {"analyze", "steer", "drift", "compensate", "export"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("scenarios", files, "scenario files")->required();
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", opt.seed, "override the perturbation sampler seed");
        sub->add_option("--rate", opt.rate, "override the steering rate r");
        sub->add_option("--epsilon", opt.epsilon, "override the verification tolerance");
        sub->add_flag("--refine", opt.refine,
                      "refine steering offsets with the numeric omega map");
        sub->add_option("--jobs", opt.jobs, "parallelize across scenario files")
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);

    const std::string command = app.get_subcommands().front()->get_name();
    std::vector<int> codes(files.size(), kOk);
    std::vector<std::string> logs(files.size());

    int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(files.size())));
    if (jobs == 1) {
        for (size_t i = 0; i < files.size(); ++i) {
            std::ostringstream log;
            codes[i] = run_one(command, files[i], opt, log);
            logs[i] = log.str();
        }
    } else {
        std::vector<std::thread> pool;
        std::mutex next_mutex;
        size_t next = 0;
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    size_t i;
                    {
                        std::lock_guard<std::mutex> guard(next_mutex);
                        if (next >= files.size()) return;
                        i = next++;
                    }
                    std::ostringstream log;
                    codes[i] = run_one(command, files[i], opt, log);
                    logs[i] = log.str();
                }
            });
        for (auto& th : pool) th.join();
    }

    for (size_t i = 0; i < files.size(); ++i) {
        if (files.size() > 1 && !logs[i].empty()) std::cout << files[i] << ": ";
        std::cout << logs[i];
    }
    return aggregate(codes);
}
