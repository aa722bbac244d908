#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "formctl/sim.hpp"
#include "oracles.hpp"

using namespace formctl;

namespace {

FieldFn rigid_flow_field(const SEAlgebraElement& g) {
    return [g](const Configuration& p) { return rigid_field(g, p); };
}

}  // namespace

TEST_CASE("integrator reproduces the closed-form rigid flow") {
    std::mt19937_64 rng(201);
    SEAlgebraElement g(fixtures::random_skew(rng, 2, 1.0), fixtures::random_vector(rng, 2, 1.0));
    Configuration p0 = fixtures::random_config(rng, 2, 4);
    const double T = 2.0;

    Trajectory traj = integrate(rigid_flow_field(g), p0, T);
    Configuration exact = oracles::rigid_flow(g, p0, T);
    REQUIRE((traj.back().state.flatten() - exact.flatten()).norm() < 1e-7);
    REQUIRE(traj.back().t == Catch::Approx(T));
}

TEST_CASE("fixed-step RK4 converges at fourth order") {
    std::mt19937_64 rng(203);
    SEAlgebraElement g(fixtures::random_skew(rng, 2, 1.5), fixtures::random_vector(rng, 2, 1.0));
    Configuration p0 = fixtures::random_config(rng, 2, 4);
    const double T = 1.0;
    Configuration exact = oracles::rigid_flow(g, p0, T);

    std::vector<double> errors;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
        StepControl ctrl;
        ctrl.initial_step = h;
        ctrl.auto_refine = false;
        Trajectory traj = integrate(rigid_flow_field(g), p0, T, ctrl);
        errors.push_back((traj.back().state.flatten() - exact.flatten()).norm());
    }
    for (size_t i = 1; i < errors.size(); ++i) {
        double order = std::log2(errors[i - 1] / errors[i]);
        REQUIRE(order > 3.5);
        REQUIRE(order < 4.5);
    }
}

TEST_CASE("integration is deterministic") {
    std::mt19937_64 rng(207);
    auto graph = fixtures::five_agent_graph();
    auto law = InteractionLaw::linear();
    Configuration p0 = fixtures::random_config(rng, 2, 5);
    FieldFn f = formation_field(graph, law);
    Trajectory a = integrate(f, p0, 1.5);
    Trajectory b = integrate(f, p0, 1.5);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) {
        REQUIRE(a.samples[i].t == b.samples[i].t);
        REQUIRE((a.samples[i].state.points() - b.samples[i].state.points()).norm() == 0.0);
    }
}

TEST_CASE("sampling stride and endpoint") {
    std::mt19937_64 rng(209);
    SEAlgebraElement g(fixtures::random_skew(rng, 2, 0.5), fixtures::random_vector(rng, 2));
    Configuration p0 = fixtures::random_config(rng, 2, 3);
    StepControl ctrl;
    ctrl.initial_step = 1e-2;
    ctrl.auto_refine = false;
    ctrl.sample_stride = 25;
    Trajectory traj = integrate(rigid_flow_field(g), p0, 1.0, ctrl);
    // 100 steps: t=0, every 25th step, and the endpoint.
    REQUIRE(traj.samples.size() == 5);
    REQUIRE(traj.samples[1].t == Catch::Approx(0.25));
    REQUIRE(traj.back().t == Catch::Approx(1.0));
}

TEST_CASE("diagnostics are recorded along the trajectory") {
    auto graph = fixtures::triangle_graph();
    auto law = InteractionLaw::linear();
    Configuration q = fixtures::triangle_config();
    MatrixXd pts = q.points();
    pts(0, 0) += 0.1;
    Configuration p0(pts);

    Diagnostics diag;
    diag.graph = &graph;
    diag.law = &law;
    diag.reference = &q;
    Trajectory traj = integrate(formation_field(graph, law), p0, 2.0, {}, diag);
    REQUIRE(traj.samples.front().potential.has_value());
    REQUIRE(traj.samples.front().orbit_dist.has_value());
    // Gradient flow: the potential is non-increasing between samples.
    for (size_t i = 1; i < traj.samples.size(); ++i)
        REQUIRE(*traj.samples[i].potential <= *traj.samples[i - 1].potential + 1e-12);
    REQUIRE(*traj.back().orbit_dist < *traj.samples.front().orbit_dist);
}

TEST_CASE("divergence is detected") {
    FieldFn repulsive = [](const Configuration& p) { return VectorXd(10.0 * p.flatten()); };
    MatrixXd pts(1, 1);
    pts << 1.0;
    REQUIRE_THROWS_AS(integrate(repulsive, Configuration(pts), 10.0), DivergedState);
}

TEST_CASE("settle reaches the equilibrium of the gradient flow") {
    auto graph = fixtures::triangle_graph();
    auto law = InteractionLaw::linear();
    MatrixXd pts = fixtures::triangle_config().points();
    pts(1, 2) += 0.2;
    SettleOutcome out = settle(formation_field(graph, law), Configuration(pts), 1e-9, 200.0);
    REQUIRE(vector_field(graph, law, out.state).cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE_FALSE(out.shape_stabilized);
    for (const auto& [i, j] : graph.edges())
        REQUIRE((out.state.point(i) - out.state.point(j)).norm() ==
                Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("settle with the shape criterion stops on a drifting orbit") {
    auto graph = fixtures::triangle_graph();
    auto law = InteractionLaw::linear();
    Configuration q = fixtures::triangle_config();
    OffsetField h = OffsetField::on_graph(graph);
    h.set(0, 1, 0.02);
    h.set(1, 0, -0.02);
    FieldFn field = [&](const Configuration& p) { return vector_field(graph, law, p, &h); };
    SettleOptions opt;
    opt.shape_graph = &graph;
    SettleOutcome out = settle(field, q, 1e-9, 300.0, opt);
    REQUIRE(out.shape_stabilized);
    // The field itself does not vanish: the orbit keeps moving rigidly.
    REQUIRE(field(out.state).norm() > 1e-4);
}

TEST_CASE("settle times out with NoConvergence") {
    FieldFn constant = [](const Configuration& p) {
        return VectorXd(VectorXd::Ones(p.flatten().size()));
    };
    MatrixXd pts(2, 2);
    pts << 0.0, 1.0, 0.0, 0.0;
    REQUIRE_THROWS_AS(settle(constant, Configuration(pts), 1e-9, 1.0), NoConvergence);
}
