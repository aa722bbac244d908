#ifndef FORMCTL_ROBUSTNESS_HPP
#define FORMCTL_ROBUSTNESS_HPP

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "formctl/errors.hpp"
#include "formctl/formation.hpp"
#include "formctl/orbit.hpp"
#include "formctl/sim.hpp"

namespace formctl {

/// Uniform c_ij in [-magnitude, magnitude] on every directed edge, seeded.
inline OffsetField sample_perturbation(const FormationGraph& graph, double magnitude,
                                       std::uint64_t seed) {
    if (magnitude < 0.0) throw Error("sample_perturbation: magnitude must be >= 0");
    OffsetField h = OffsetField::on_graph(graph);
    std::mt19937_64 rng(seed);
    // Explicit bit mapping keeps the stream identical across platforms.
    auto uniform = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<Edge> edges = graph.edges();
    std::sort(edges.begin(), edges.end());
    for (const auto& [i, j] : edges) {
        h.set(i, j, (2.0 * uniform() - 1.0) * magnitude);
        h.set(j, i, (2.0 * uniform() - 1.0) * magnitude);
    }
    return h;
}

struct DriftResult {
    RigidFit fit;  // generator of the limiting rigid motion
    Trajectory trajectory;
    Configuration limit_state;
};

/// Integrate f + h until the shape freezes and fit the residual rigid motion.
inline DriftResult demonstrate_drift(const FormationGraph& graph, const InteractionLaw& law,
                                     const Configuration& q, const OffsetField& h,
                                     double horizon = 300.0, double shape_tol = 1e-9) {
    FieldFn field = [&](const Configuration& p) { return vector_field(graph, law, p, &h); };
    SettleOptions opt;
    opt.shape_graph = &graph;
    opt.shape_tol = shape_tol;
    opt.diag.fit_residual = [&](const Configuration& p) {
        return fit_rigid_motion(p, field(p)).residual;
    };
    SettleOutcome settled = settle(field, q, shape_tol, horizon, opt);
    DriftResult res;
    res.fit = fit_rigid_motion(settled.state, field(settled.state));
    res.trajectory = std::move(settled.trajectory);
    res.limit_state = settled.state;
    return res;
}

struct CompensationResult {
    OffsetField offset;          // the compensating clique control u
    Configuration equilibrium;   // p on the approximate slice q + N^s(q)
    double residual = 0.0;       // ||f(p)+h(p)+u(p)||_inf
    StabilityReport stability;   // at the equilibrium, generator none
    int iterations = 0;
};

/// Damped Newton on xi(h,u,p) = f(p)+h(p)+u(p) = 0 over u in the vertical
/// shifting span and p constrained to the affine slice q + N^s(q).
inline CompensationResult solve_offset(const FormationGraph& graph, const InteractionLaw& law,
                                       const Configuration& q, const CliqueSpec& clique,
                                       const OffsetField& h) {
    const double trust = 0.05 * graph.min_target_length();
    if (h.norm() > trust)
        throw NoConvergence("solve_offset: perturbation exceeds the trust region");
    if (vector_field(graph, law, q).norm() >= 1e-8)
        throw NotCritical("solve_offset: q is not critical for the nominal system");
    clique.validate_against(graph);
    clique.validate_rank(q);

    const int k = q.dimension();
    const int kn = k * q.count();
    const int m = k * (k + 1) / 2;

    // Orthonormal basis of N^s(q), the complement of T_q O_q.
    auto tangent = tangent_basis(q);
    MatrixXd tmat(kn, m);
    for (int j = 0; j < m; ++j) tmat.col(j) = tangent[j];
    Eigen::HouseholderQR<MatrixXd> qr(tmat);
    MatrixXd full_q = qr.householderQ() * MatrixXd::Identity(kn, kn);
    MatrixXd slice = full_q.rightCols(kn - m);

    auto basis = vertical_shift_basis(clique, graph);
    auto build_u = [&](const VectorXd& c) {
        OffsetField u = OffsetField::on_clique(graph, clique);
        for (int j = 0; j < m; ++j) u.add_scaled(basis[j], c(j));
        return u;
    };
    auto config_at = [&](const VectorXd& s) {
        return Configuration::from_flat(k, VectorXd(q.flatten() + slice * s));
    };

    VectorXd c = VectorXd::Zero(m);
    VectorXd s = VectorXd::Zero(kn - m);
    OffsetField u = build_u(c);
    Configuration p = config_at(s);
    VectorXd resid = vector_field(graph, law, p, &h, &u);

    CompensationResult result;
    for (int it = 0; it < 50; ++it) {
        if (resid.cwiseAbs().maxCoeff() < 1e-10) {
            result.offset = std::move(u);
            result.equilibrium = p;
            result.residual = resid.cwiseAbs().maxCoeff();
            result.iterations = it;
            result.stability =
                classify_orbit(graph, law, result.equilibrium, std::nullopt, &h, &result.offset);
            return result;
        }
        MatrixXd jac(kn, kn);
        for (int j = 0; j < m; ++j) jac.col(j) = offset_only_field(graph, basis[j], p);
        jac.rightCols(kn - m) = field_jacobian(graph, law, p, &h, &u) * slice;
        Eigen::FullPivLU<MatrixXd> lu(jac);
        if (lu.rank() < kn)
            throw SingularJacobian("solve_offset: Newton matrix is rank-deficient");
        VectorXd dx = lu.solve(-resid);
        double step = 1.0;
        bool accepted = false;
        while (step > 1.0 / 1024.0) {
            VectorXd c2 = c + step * dx.head(m);
            VectorXd s2 = s + step * dx.tail(kn - m);
            OffsetField u2 = build_u(c2);
            Configuration p2 = config_at(s2);
            VectorXd r2 = vector_field(graph, law, p2, &h, &u2);
            if (r2.norm() < resid.norm()) {
                c = c2;
                s = s2;
                u = std::move(u2);
                p = p2;
                resid = r2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) throw NoConvergence("solve_offset: backtracking stalled");
    }
    throw NoConvergence("solve_offset: Newton did not converge in 50 iterations");
}

}  // namespace formctl

#endif  // FORMCTL_ROBUSTNESS_HPP
