#ifndef FORMCTL_SCENARIO_HPP
#define FORMCTL_SCENARIO_HPP

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "formctl/errors.hpp"
#include "formctl/formation.hpp"
#include "formctl/io.hpp"
#include "formctl/liegroup.hpp"

namespace formctl {

struct ScenarioError : Error {
    using Error::Error;
};

/// Steering target, kept in the form it was written in so export round-trips.
struct SteeringTargetSpec {
    std::optional<double> rotation_degrees;  // k = 2 shorthand
    std::optional<MatrixXd> rotation;
    VectorXd translation;

    SEElement element(int k) const {
        if (rotation) return SEElement(*rotation, translation);
        double a = *rotation_degrees * std::acos(-1.0) / 180.0;
        MatrixXd rot(2, 2);
        rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        (void)k;
        return SEElement(rot, translation);
    }
};

struct PerturbationSpec {
    std::vector<std::tuple<int, int, double>> offsets;  // explicit directed entries
    std::optional<double> magnitude;                    // sampler
    std::optional<std::uint64_t> seed;
};

struct IntegratorSpec {
    double step = 1e-2;
    int stride = 10;
};

struct Scenario {
    std::string name;
    int dimension = 2;
    FormationGraph graph;
    Configuration initial;
    std::optional<CliqueSpec> clique;
    InteractionLaw law = InteractionLaw::linear();
    double law_gain = 1.0;
    std::optional<SteeringTargetSpec> steering;
    std::optional<double> rate;
    std::optional<double> epsilon;
    std::optional<PerturbationSpec> perturbation;
    IntegratorSpec integrator;
};

namespace detail {

[[noreturn]] inline void scenario_fail(const std::string& file, const YAML::Node& node,
                                       const std::string& msg) {
    throw ScenarioError(file + ":" + std::to_string(node.Mark().line + 1) + ": " + msg);
}

inline const YAML::Node require(const std::string& file, const YAML::Node& parent,
                                const std::string& key) {
    YAML::Node n = parent[key];
    if (!n) scenario_fail(file, parent, "missing required key '" + key + "'");
    return n;
}

template <typename T>
T as_or_fail(const std::string& file, const YAML::Node& node, const std::string& what) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        scenario_fail(file, node, "cannot parse " + what);
    }
}

inline VectorXd parse_vector(const std::string& file, const YAML::Node& node, int k,
                             const std::string& what) {
    if (!node.IsSequence() || static_cast<int>(node.size()) != k)
        scenario_fail(file, node, what + " must be a sequence of " + std::to_string(k) +
                                      " numbers");
    VectorXd v(k);
    for (int i = 0; i < k; ++i) v(i) = as_or_fail<double>(file, node[i], what);
    return v;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& file = "<scenario>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ScenarioError(file + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) throw ScenarioError(file + ":1: scenario must be a key/value document");

    using detail::as_or_fail;
    using detail::require;
    using detail::scenario_fail;

    Scenario sc;
    if (root["name"]) sc.name = as_or_fail<std::string>(file, root["name"], "name");
    sc.dimension = as_or_fail<int>(file, require(file, root, "dimension"), "dimension");
    if (sc.dimension < 1) scenario_fail(file, root["dimension"], "dimension must be >= 1");

    int n = as_or_fail<int>(file, require(file, root, "vertices"), "vertices");
    if (n < 1) scenario_fail(file, root["vertices"], "vertices must be >= 1");
    sc.graph = FormationGraph(n);
    YAML::Node edges = require(file, root, "edges");
    if (!edges.IsSequence()) scenario_fail(file, edges, "edges must be a sequence");
    for (const YAML::Node& e : edges) {
        if (!e.IsSequence() || e.size() != 3)
            scenario_fail(file, e, "edge must be [i, j, target_length]");
        int i = as_or_fail<int>(file, e[0], "edge endpoint");
        int j = as_or_fail<int>(file, e[1], "edge endpoint");
        double d = as_or_fail<double>(file, e[2], "target length");
        try {
            sc.graph.add_edge(i, j, d);
        } catch (const Error& err) {
            scenario_fail(file, e, err.what());
        }
    }

    YAML::Node init = require(file, root, "initial");
    if (!init.IsSequence() || static_cast<int>(init.size()) != n)
        scenario_fail(file, init, "initial must list one point per vertex");
    MatrixXd pts(sc.dimension, n);
    for (int i = 0; i < n; ++i)
        pts.col(i) = detail::parse_vector(file, init[i], sc.dimension, "initial point");
    sc.initial = Configuration(pts);

    if (root["clique"]) {
        CliqueSpec clique;
        for (const YAML::Node& m : root["clique"])
            clique.members.push_back(as_or_fail<int>(file, m, "clique member"));
        try {
            clique.validate_against(sc.graph);
        } catch (const Error& err) {
            scenario_fail(file, root["clique"], err.what());
        }
        sc.clique = std::move(clique);
    }

    if (root["law"]) {
        YAML::Node law = root["law"];
        std::string family = as_or_fail<std::string>(file, require(file, law, "family"), "family");
        if (family != "linear") scenario_fail(file, law["family"], "unknown law family");
        sc.law_gain = law["gain"] ? as_or_fail<double>(file, law["gain"], "gain") : 1.0;
        try {
            sc.law = InteractionLaw::linear(sc.law_gain);
        } catch (const Error& err) {
            scenario_fail(file, law, err.what());
        }
    }

    if (root["steering"]) {
        YAML::Node st = root["steering"];
        SteeringTargetSpec target;
        target.translation =
            detail::parse_vector(file, require(file, st, "translation"), sc.dimension,
                                 "translation");
        if (st["rotation_degrees"]) {
            if (sc.dimension != 2)
                scenario_fail(file, st["rotation_degrees"],
                              "rotation_degrees is only valid for dimension 2");
            target.rotation_degrees =
                as_or_fail<double>(file, st["rotation_degrees"], "rotation_degrees");
        } else {
            YAML::Node rot = require(file, st, "rotation");
            if (!rot.IsSequence() || static_cast<int>(rot.size()) != sc.dimension)
                scenario_fail(file, rot, "rotation must be a k x k matrix");
            MatrixXd r(sc.dimension, sc.dimension);
            for (int i = 0; i < sc.dimension; ++i)
                r.row(i) =
                    detail::parse_vector(file, rot[i], sc.dimension, "rotation row").transpose();
            target.rotation = r;
        }
        sc.steering = std::move(target);
    }

    if (root["rate"]) sc.rate = as_or_fail<double>(file, root["rate"], "rate");
    if (root["epsilon"]) sc.epsilon = as_or_fail<double>(file, root["epsilon"], "epsilon");

    if (root["perturbation"]) {
        YAML::Node pn = root["perturbation"];
        PerturbationSpec spec;
        if (pn["offsets"]) {
            for (const YAML::Node& o : pn["offsets"]) {
                if (!o.IsSequence() || o.size() != 3)
                    scenario_fail(file, o, "offset must be [from, to, value]");
                int i = as_or_fail<int>(file, o[0], "offset endpoint");
                int j = as_or_fail<int>(file, o[1], "offset endpoint");
                if (!sc.graph.has_edge(i, j))
                    scenario_fail(file, o, "offset on a non-edge of the graph");
                spec.offsets.emplace_back(i, j, as_or_fail<double>(file, o[2], "offset value"));
            }
        }
        if (pn["magnitude"])
            spec.magnitude = as_or_fail<double>(file, pn["magnitude"], "magnitude");
        if (pn["seed"]) spec.seed = as_or_fail<std::uint64_t>(file, pn["seed"], "seed");
        if (spec.offsets.empty() && !spec.magnitude)
            scenario_fail(file, pn, "perturbation needs explicit offsets or a magnitude");
        sc.perturbation = std::move(spec);
    }

    if (root["integrator"]) {
        YAML::Node in = root["integrator"];
        if (in["step"]) sc.integrator.step = as_or_fail<double>(file, in["step"], "step");
        if (in["stride"]) sc.integrator.stride = as_or_fail<int>(file, in["stride"], "stride");
        if (!(sc.integrator.step > 0.0)) scenario_fail(file, in, "step must be positive");
        if (sc.integrator.stride < 1) scenario_fail(file, in, "stride must be >= 1");
    }

    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

/// Deterministic re-emission of a parsed scenario; reparsing yields the same structure.
inline std::string export_scenario(const Scenario& sc) {
    std::string out;
    auto num = [](double v) { return format_double(v); };
    if (!sc.name.empty()) out += "name: " + sc.name + "\n";
    out += "dimension: " + std::to_string(sc.dimension) + "\n";
    out += "vertices: " + std::to_string(sc.graph.vertex_count()) + "\n";
    out += "edges:\n";
    for (const auto& [i, j] : sc.graph.edges())
        out += "  - [" + std::to_string(i) + ", " + std::to_string(j) + ", " +
               num(sc.graph.target_length(i, j)) + "]\n";
    out += "initial:\n";
    for (int i = 0; i < sc.initial.count(); ++i) {
        out += "  - [";
        for (int d = 0; d < sc.dimension; ++d)
            out += (d ? ", " : "") + num(sc.initial.point(i)(d));
        out += "]\n";
    }
    if (sc.clique) {
        out += "clique: [";
        for (size_t i = 0; i < sc.clique->members.size(); ++i)
            out += (i ? ", " : "") + std::to_string(sc.clique->members[i]);
        out += "]\n";
    }
    out += "law:\n  family: linear\n  gain: " + num(sc.law_gain) + "\n";
    if (sc.steering) {
        out += "steering:\n";
        if (sc.steering->rotation_degrees)
            out += "  rotation_degrees: " + num(*sc.steering->rotation_degrees) + "\n";
        if (sc.steering->rotation) {
            out += "  rotation:\n";
            for (int r = 0; r < sc.steering->rotation->rows(); ++r) {
                out += "    - [";
                for (int c = 0; c < sc.steering->rotation->cols(); ++c)
                    out += (c ? ", " : "") + num((*sc.steering->rotation)(r, c));
                out += "]\n";
            }
        }
        out += "  translation: [";
        for (int d = 0; d < sc.steering->translation.size(); ++d)
            out += (d ? ", " : "") + num(sc.steering->translation(d));
        out += "]\n";
    }
    if (sc.rate) out += "rate: " + num(*sc.rate) + "\n";
    if (sc.epsilon) out += "epsilon: " + num(*sc.epsilon) + "\n";
    if (sc.perturbation) {
        out += "perturbation:\n";
        if (!sc.perturbation->offsets.empty()) {
            out += "  offsets:\n";
            for (const auto& [i, j, v] : sc.perturbation->offsets)
                out += "    - [" + std::to_string(i) + ", " + std::to_string(j) + ", " + num(v) +
                       "]\n";
        }
        if (sc.perturbation->magnitude)
            out += "  magnitude: " + num(*sc.perturbation->magnitude) + "\n";
        if (sc.perturbation->seed)
            out += "  seed: " + std::to_string(*sc.perturbation->seed) + "\n";
    }
    out += "integrator:\n  step: " + num(sc.integrator.step) +
           "\n  stride: " + std::to_string(sc.integrator.stride) + "\n";
    return out;
}

}  // namespace formctl

#endif  // FORMCTL_SCENARIO_HPP
