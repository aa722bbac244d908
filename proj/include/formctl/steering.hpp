#ifndef FORMCTL_STEERING_HPP
#define FORMCTL_STEERING_HPP

#include <vector>

#include "formctl/errors.hpp"
#include "formctl/formation.hpp"
#include "formctl/liegroup.hpp"
#include "formctl/orbit.hpp"
#include "formctl/sim.hpp"

namespace formctl {

/// Constant clique control h_r realizing a desired rigid displacement in time 1/r.
struct SteeringPlan {
    OffsetField offsets;
    double rate = 0.0;      // r
    double duration = 0.0;  // 1/r
    SEAlgebraElement target_generator;
    SEElement target_element;
    VectorXd coefficients;  // over the vertical shifting basis
};

struct SteeringOutcome {
    Trajectory trajectory;  // controlled phase [0, 1/r]
    double max_orbit_distance = 0.0;
    double endpoint_error = 0.0;
    double settled_error = 0.0;
    Configuration endpoint;
    Configuration settled;
    Configuration target_config;                 // q_bar = target . q
    std::vector<double> surrogate_bound;         // ||p(t) - alpha(t).q|| per sample
    double settle_phase_max_orbit_distance = 0.0;
};

/// Solve the linearized inverse of omega over the vertical shifting basis;
/// optionally refine by damped chord-Newton against the numeric omega map.
inline SteeringPlan plan_steering(const FormationGraph& graph, const InteractionLaw& law,
                                  const Configuration& q, const CliqueSpec& clique,
                                  const SEElement& target, double r, bool refine = false) {
    if (!(r > 0.0)) throw Error("plan_steering: rate must be positive");
    clique.validate_against(graph);
    clique.validate_rank(q);
    SEAlgebraElement target_gen = se_log(target);  // BranchSingularity at angle pi

    auto basis = vertical_shift_basis(clique, graph);
    const int m = static_cast<int>(basis.size());
    MatrixXd lin(m, m);
    for (int j = 0; j < m; ++j)
        lin.col(j) = se_algebra_coords(d_omega0(basis[j], graph, law, q));
    Eigen::FullPivLU<MatrixXd> lu(lin);
    if (lu.rank() < m)
        throw SingularLinearization("plan_steering: d_omega0 matrix is rank-deficient");

    VectorXd rhs = r * se_algebra_coords(target_gen);
    VectorXd coeff = lu.solve(rhs);
    auto build = [&](const VectorXd& c) {
        OffsetField h = OffsetField::on_clique(graph, clique);
        for (int j = 0; j < m; ++j) h.add_scaled(basis[j], c(j));
        return h;
    };
    OffsetField h = build(coeff);

    if (refine) {
        auto residual = [&](const OffsetField& field) {
            auto res = rho_omega_numeric(field, graph, law, q);
            return VectorXd(se_algebra_coords(res.omega_fit.generator) - rhs);
        };
        VectorXd f = residual(h);
        bool converged = f.norm() < 1e-7;
        for (int it = 0; it < 25 && !converged; ++it) {
            VectorXd dc = lu.solve(-f);
            double step = 1.0;
            bool accepted = false;
            while (step > 1.0 / 256.0) {
                VectorXd cand = coeff + step * dc;
                VectorXd fc = residual(build(cand));
                if (fc.norm() < f.norm()) {
                    coeff = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) throw NoConvergence("plan_steering: refinement stalled");
            converged = f.norm() < 1e-7;
        }
        if (!converged) throw NoConvergence("plan_steering: refinement did not converge");
        h = build(coeff);
    }

    SteeringPlan plan;
    plan.offsets = std::move(h);
    plan.rate = r;
    plan.duration = 1.0 / r;
    plan.target_generator = target_gen;
    plan.target_element = target;
    plan.coefficients = coeff;
    return plan;
}

/// Run the constant control for 1/r, then release it and settle under the
/// reciprocal field. Distances to O_q are tracked along the way.
inline SteeringOutcome execute_steering(const FormationGraph& graph, const InteractionLaw& law,
                                        const Configuration& q, const SteeringPlan& plan) {
    SteeringOutcome out;
    out.target_config = se_act(plan.target_element, q);

    FieldFn controlled = [&](const Configuration& p) {
        return vector_field(graph, law, p, nullptr, &plan.offsets);
    };
    Diagnostics diag;
    diag.reference = &q;
    StepControl ctrl;
    out.trajectory = integrate(controlled, q, plan.duration, ctrl, diag);

    SEAlgebraElement scaled = plan.target_generator.scaled(plan.rate);
    for (const auto& s : out.trajectory.samples) {
        out.max_orbit_distance = std::max(out.max_orbit_distance, *s.orbit_dist);
        SEElement alpha = se_exp(scaled, s.t);
        out.surrogate_bound.push_back(
            (s.state.flatten() - se_act(alpha, q).flatten()).norm());
    }

    const Configuration& end = out.trajectory.back().state;
    out.endpoint = end;
    out.endpoint_error = (end.flatten() - out.target_config.flatten()).norm();

    FieldFn nominal = [&](const Configuration& p) { return vector_field(graph, law, p); };
    SettleOptions sopt;
    sopt.diag.reference = &q;
    SettleOutcome settled = settle(nominal, end, 1e-8, 500.0, sopt);
    for (const auto& s : settled.trajectory.samples)
        if (s.orbit_dist)
            out.settle_phase_max_orbit_distance =
                std::max(out.settle_phase_max_orbit_distance, *s.orbit_dist);
    out.settled = settled.state;
    out.settled_error = (settled.state.flatten() - out.target_config.flatten()).norm();
    return out;
}

struct ControllabilityReport {
    bool verified = false;
    double epsilon = 0.0;
    double orbit_margin = 0.0;     // epsilon - max_orbit_distance
    double endpoint_margin = 0.0;  // epsilon - endpoint_error
    double settled_margin = 0.0;   // epsilon - settled_error
};

inline ControllabilityReport verify_epsilon_controllability(const SteeringOutcome& outcome,
                                                            double epsilon) {
    ControllabilityReport rep;
    rep.epsilon = epsilon;
    rep.orbit_margin = epsilon - outcome.max_orbit_distance;
    rep.endpoint_margin = epsilon - outcome.endpoint_error;
    rep.settled_margin = epsilon - outcome.settled_error;
    rep.verified = outcome.max_orbit_distance < epsilon && outcome.endpoint_error < epsilon;
    return rep;
}

}  // namespace formctl

#endif  // FORMCTL_STEERING_HPP
