#ifndef FORMCTL_ORBIT_HPP
#define FORMCTL_ORBIT_HPP

#include <Eigen/Dense>
#include <vector>

#include "formctl/errors.hpp"
#include "formctl/formation.hpp"
#include "formctl/liegroup.hpp"
#include "formctl/sim.hpp"

namespace formctl {

using SkewMatrixK1 = MatrixXd;  // (k+1)x(k+1), skew by construction

/// Least-squares rigid generator of a field at p, with the unexplained norm.
struct RigidFit {
    SEAlgebraElement generator;
    double residual = 0.0;
};

inline RigidFit fit_rigid_motion(const Configuration& p, const VectorXd& field) {
    const int k = p.dimension();
    if (field.size() != static_cast<long>(k) * p.count())
        throw DimensionMismatch("fit_rigid_motion: field size disagrees");
    if (config_rank(p) != k)
        throw RankDeficient("fit_rigid_motion: configuration not of full rank");
    auto gens = se_algebra_basis(k);
    MatrixXd a(field.size(), gens.size());
    for (size_t j = 0; j < gens.size(); ++j) a.col(j) = rigid_field(gens[j], p);
    VectorXd coords = a.colPivHouseholderQr().solve(field);
    RigidFit fit;
    fit.generator = se_algebra_from_coords(k, coords);
    fit.residual = (field - a * coords).norm();
    return fit;
}

/// The field contributed by constant offsets alone: sum_j c_ij (x_j - x_i).
inline VectorXd offset_only_field(const FormationGraph& graph, const OffsetField& offset,
                                  const Configuration& p) {
    detail::check_config(graph, p);
    const int k = p.dimension();
    MatrixXd f = MatrixXd::Zero(k, p.count());
    for (const auto& [e, c] : offset.entries()) {
        if (!graph.has_edge(e.first, e.second))
            throw SupportViolation("offset on a non-edge of the graph");
        f.col(e.first) += c * (p.point(e.second) - p.point(e.first));
    }
    return Eigen::Map<const VectorXd>(f.data(), f.size());
}

/// A_ab = (c_ij - c_ji)/2 over clique index pairs; diagonal zero, skew exactly.
inline SkewMatrixK1 eta(const OffsetField& h, const CliqueSpec& clique,
                        const FormationGraph& graph) {
    clique.validate_against(graph);
    std::set<DirectedEdge> allowed;
    for (const auto& [i, j] : clique.edges()) {
        allowed.insert({i, j});
        allowed.insert({j, i});
    }
    for (const auto& [e, c] : h.entries())
        if (!allowed.count(e))
            throw SupportViolation("eta: offset supported outside the clique");
    const int m = static_cast<int>(clique.members.size());
    SkewMatrixK1 a = MatrixXd::Zero(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = r + 1; c < m; ++c) {
            int i = clique.members[r], j = clique.members[c];
            double val = 0.5 * (h.get(i, j) - h.get(j, i));
            a(r, c) = val;
            a(c, r) = -val;
        }
    return a;
}

/// One antisymmetric unit offset [e] per clique edge e = (i,j), i < j.
inline std::vector<OffsetField> vertical_shift_basis(const CliqueSpec& clique,
                                                     const FormationGraph& graph) {
    std::vector<OffsetField> basis;
    for (const auto& [i, j] : clique.edges()) {
        OffsetField f = OffsetField::on_clique(graph, clique);
        f.set(i, j, 1.0);
        f.set(j, i, -1.0);
        basis.push_back(std::move(f));
    }
    return basis;
}

/// First derivative at h = 0 of the generator map: project h(q) onto T_q O_q
/// and read off the rigid generator. Valid at critical q since the Hessian part
/// of the decomposition is orthogonal to the tangent space.
inline SEAlgebraElement d_omega0(const OffsetField& h, const FormationGraph& graph,
                                 const InteractionLaw& law, const Configuration& q) {
    if (vector_field(graph, law, q).norm() >= 1e-8)
        throw NotCritical("d_omega0: q is not a critical configuration");
    VectorXd hq = offset_only_field(graph, h, q);
    VectorXd proj = VectorXd::Zero(hq.size());
    for (const VectorXd& t : tangent_basis(q)) proj += t.dot(hq) * t;
    return fit_rigid_motion(q, proj).generator;
}

struct RhoOmegaResult {
    Configuration rho_approx;
    RigidFit omega_fit;  // generator transported to rho_approx; residual certifies convergence
    double settle_time = 0.0;
};

/// Numerical evaluation of rho and omega: integrate the perturbed flow from q
/// until the shape freezes, align the limit back toward q, and transport the
/// fitted generator along the aligner. The shape-rate floor of fixed-step RK4
/// can sit above tol for strong offsets, so the step is quartered and the run
/// retried before giving up.
inline RhoOmegaResult rho_omega_numeric(const OffsetField& h, const FormationGraph& graph,
                                        const InteractionLaw& law, const Configuration& q,
                                        double horizon = 200.0, double tol = 1e-9,
                                        double step = 1e-2) {
    FieldFn field = [&](const Configuration& p) { return vector_field(graph, law, p, &h); };
    SettleOutcome settled;
    for (int attempt = 0;; ++attempt) {
        SettleOptions opt;
        opt.step = step;
        opt.shape_graph = &graph;
        opt.shape_tol = tol;
        try {
            settled = settle(field, q, tol, horizon, opt);
            break;
        } catch (const NoConvergence&) {
            if (attempt >= 2) throw;
            step *= 0.25;
        }
    }
    RigidFit fit = fit_rigid_motion(settled.state, field(settled.state));
    SEElement aligner = orbit_distance(q, settled.state).aligner;
    RhoOmegaResult res;
    res.rho_approx = se_act(aligner, settled.state);
    res.omega_fit = {transport_generator(fit.generator, aligner), fit.residual};
    res.settle_time = settled.time;
    return res;
}

}  // namespace formctl

#endif  // FORMCTL_ORBIT_HPP
