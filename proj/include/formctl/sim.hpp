#ifndef FORMCTL_SIM_HPP
#define FORMCTL_SIM_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "formctl/errors.hpp"
#include "formctl/formation.hpp"
#include "formctl/liegroup.hpp"

namespace formctl {

using FieldFn = std::function<VectorXd(const Configuration&)>;

struct TrajectorySample {
    double t = 0.0;
    Configuration state;
    std::optional<double> potential;
    std::optional<double> orbit_dist;
    std::optional<double> fit_residual;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;

    const TrajectorySample& back() const { return samples.back(); }
};

/// Optional per-sample diagnostics recorded along a trajectory.
struct Diagnostics {
    const FormationGraph* graph = nullptr;  // together with law: potential value
    const InteractionLaw* law = nullptr;
    const Configuration* reference = nullptr;  // orbit distance to O_reference
    std::function<double(const Configuration&)> fit_residual;
};

struct StepControl {
    double initial_step = 1e-2;
    bool auto_refine = true;      // halve the step until the endpoint moves < endpoint_tol
    double endpoint_tol = 1e-8;
    int max_refinements = 12;
    int sample_stride = 10;
    double divergence_bound = 1e6;
};

namespace detail {

inline VectorXd rk4_step(const FieldFn& field, int k, const VectorXd& y, double h) {
    auto eval = [&](const VectorXd& z) { return field(Configuration::from_flat(k, z)); };
    VectorXd k1 = eval(y);
    VectorXd k2 = eval(y + 0.5 * h * k1);
    VectorXd k3 = eval(y + 0.5 * h * k2);
    VectorXd k4 = eval(y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void record_sample(Trajectory& traj, double t, const Configuration& state,
                          const FieldFn& field, const Diagnostics& diag) {
    TrajectorySample s;
    s.t = t;
    s.state = state;
    if (diag.graph && diag.law) s.potential = potential(*diag.graph, *diag.law, state);
    if (diag.reference) s.orbit_dist = orbit_distance(state, *diag.reference).distance;
    if (diag.fit_residual) s.fit_residual = diag.fit_residual(state);
    traj.samples.push_back(std::move(s));
}

inline VectorXd run_endpoint(const FieldFn& field, int k, VectorXd y, long steps, double h,
                             double bound) {
    for (long i = 0; i < steps; ++i) {
        y = rk4_step(field, k, y, h);
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > bound)
            throw DivergedState("integration diverged");
    }
    return y;
}

}  // namespace detail

/// Fixed-step RK4 over [0, duration]. With auto_refine the step is halved until
/// halving again moves the endpoint by less than endpoint_tol.
inline Trajectory integrate(const FieldFn& field, const Configuration& p0, double duration,
                            const StepControl& ctrl = {}, const Diagnostics& diag = {}) {
    if (!(duration > 0.0)) throw Error("integrate: duration must be positive");
    const int k = p0.dimension();
    long steps = std::max(1L, static_cast<long>(std::ceil(duration / ctrl.initial_step)));
    if (ctrl.auto_refine) {
        VectorXd end = detail::run_endpoint(field, k, p0.flatten(), steps, duration / steps,
                                            ctrl.divergence_bound);
        for (int r = 0; r < ctrl.max_refinements; ++r) {
            VectorXd half = detail::run_endpoint(field, k, p0.flatten(), 2 * steps,
                                                 duration / (2 * steps), ctrl.divergence_bound);
            if ((half - end).norm() < ctrl.endpoint_tol) break;
            steps *= 2;
            end = half;
        }
    }
    const double h = duration / steps;
    Trajectory traj;
    VectorXd y = p0.flatten();
    detail::record_sample(traj, 0.0, p0, field, diag);
    for (long i = 0; i < steps; ++i) {
        y = detail::rk4_step(field, k, y, h);
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > ctrl.divergence_bound)
            throw DivergedState("integration diverged");
        if ((i + 1) % ctrl.sample_stride == 0 || i + 1 == steps)
            detail::record_sample(traj, (i + 1) * h, Configuration::from_flat(k, y), field, diag);
    }
    return traj;
}

struct SettleOptions {
    double step = 1e-2;
    const FormationGraph* shape_graph = nullptr;  // enables the shape-stabilized criterion
    double shape_tol = 1e-9;
    int sample_stride = 10;
    double divergence_bound = 1e6;
    Diagnostics diag;
};

struct SettleOutcome {
    Configuration state;
    double time = 0.0;
    Trajectory trajectory;
    bool shape_stabilized = false;  // true when the shape criterion fired, not the field norm
};

namespace detail {

inline bool shape_stationary(const FormationGraph& graph, const Configuration& p,
                             const VectorXd& velocity, double tol) {
    const int k = p.dimension();
    for (const auto& [i, j] : graph.edges()) {
        VectorXd u = p.point(j) - p.point(i);
        double r = u.norm();
        if (r == 0.0) continue;
        double rate = u.dot(velocity.segment(k * j, k) - velocity.segment(k * i, k)) / r;
        if (std::abs(rate) > tol) return false;
    }
    return true;
}

}  // namespace detail

/// Integrates until ||field||_inf < tol or, when a graph is given, until all
/// inter-agent distance derivatives drop below shape_tol.
inline SettleOutcome settle(const FieldFn& field, const Configuration& p0, double tol,
                            double max_duration, const SettleOptions& opt = {}) {
    const int k = p0.dimension();
    VectorXd y = p0.flatten();
    SettleOutcome out;
    detail::record_sample(out.trajectory, 0.0, p0, field, opt.diag);
    long step_count = std::max(1L, static_cast<long>(std::ceil(max_duration / opt.step)));
    const double h = max_duration / step_count;
    for (long i = 0; i <= step_count; ++i) {
        Configuration state = Configuration::from_flat(k, y);
        VectorXd v = field(state);
        bool field_small = v.cwiseAbs().maxCoeff() < tol;
        bool shape_ok = opt.shape_graph &&
                        detail::shape_stationary(*opt.shape_graph, state, v, opt.shape_tol);
        if (field_small || shape_ok) {
            out.state = state;
            out.time = i * h;
            out.shape_stabilized = shape_ok && !field_small;
            if (out.trajectory.back().t < out.time)
                detail::record_sample(out.trajectory, out.time, state, field, opt.diag);
            return out;
        }
        if (i == step_count) break;
        y = detail::rk4_step(field, k, y, h);
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > opt.divergence_bound)
            throw DivergedState("settle diverged");
        if ((i + 1) % opt.sample_stride == 0)
            detail::record_sample(out.trajectory, (i + 1) * h, Configuration::from_flat(k, y),
                                  field, opt.diag);
    }
    throw NoConvergence("settle: criterion not met within max_duration");
}

/// Field closure for the formation dynamics with optional offsets.
inline FieldFn formation_field(const FormationGraph& graph, const InteractionLaw& law,
                               const OffsetField* perturbation = nullptr,
                               const OffsetField* control = nullptr) {
    return [&graph, &law, perturbation, control](const Configuration& p) {
        return vector_field(graph, law, p, perturbation, control);
    };
}

}  // namespace formctl

#endif  // FORMCTL_SIM_HPP
