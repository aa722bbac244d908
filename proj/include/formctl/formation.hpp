#ifndef FORMCTL_FORMATION_HPP
#define FORMCTL_FORMATION_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "formctl/errors.hpp"
#include "formctl/liegroup.hpp"

namespace formctl {

using Edge = std::pair<int, int>;  // undirected, stored with first < second
using DirectedEdge = std::pair<int, int>;

inline Edge make_edge(int i, int j) {
    if (i == j) throw Error("self-loop edge");
    return i < j ? Edge{i, j} : Edge{j, i};
}

/// Undirected graph with a positive target length per edge.
class FormationGraph {
  public:
    FormationGraph() = default;
    explicit FormationGraph(int n) : n_(n) {
        if (n < 1) throw Error("graph needs at least one vertex");
    }

    void add_edge(int i, int j, double target_length) {
        check_vertex(i);
        check_vertex(j);
        Edge e = make_edge(i, j);
        if (lengths_.count(e)) throw Error("duplicate edge");
        if (!(target_length > 0.0)) throw Error("target length must be positive");
        edges_.push_back(e);
        lengths_[e] = target_length;
    }

    int vertex_count() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_edge(int i, int j) const { return lengths_.count(make_edge(i, j)) > 0; }

    double target_length(int i, int j) const {
        auto it = lengths_.find(make_edge(i, j));
        if (it == lengths_.end()) throw Error("no such edge");
        return it->second;
    }

    double min_target_length() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& [e, d] : lengths_) m = std::min(m, d);
        return m;
    }

  private:
    void check_vertex(int i) const {
        if (i < 0 || i >= n_) throw Error("vertex index out of range");
    }

    int n_ = 0;
    std::vector<Edge> edges_;
    std::map<Edge, double> lengths_;
};

/// Ordered (k+1)-tuple of vertices forming a complete subgraph.
struct CliqueSpec {
    std::vector<int> members;

    void validate_against(const FormationGraph& graph) const {
        std::set<int> seen;
        for (int m : members) {
            if (m < 0 || m >= graph.vertex_count())
                throw Error("clique member out of range");
            if (!seen.insert(m).second) throw Error("duplicate clique member");
        }
        for (size_t a = 0; a < members.size(); ++a)
            for (size_t b = a + 1; b < members.size(); ++b)
                if (!graph.has_edge(members[a], members[b]))
                    throw Error("clique not complete: missing edge (" +
                                std::to_string(members[a]) + "," +
                                std::to_string(members[b]) + ")");
    }

    // The sub-configuration must span R^k, i.e. be a nondegenerate k-simplex.
    void validate_rank(const Configuration& p) const {
        const int k = p.dimension();
        if (static_cast<int>(members.size()) != k + 1)
            throw Error("clique must have k+1 members");
        MatrixXd sub(k, members.size());
        for (size_t a = 0; a < members.size(); ++a) sub.col(a) = p.point(members[a]);
        if (config_rank(Configuration(sub)) != k)
            throw RankDeficient("clique sub-configuration is degenerate");
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> es;
        for (size_t a = 0; a < members.size(); ++a)
            for (size_t b = a + 1; b < members.size(); ++b)
                es.push_back(make_edge(members[a], members[b]));
        std::sort(es.begin(), es.end());
        return es;
    }
};

/// Scalar interaction law f_ij(x); the default family is gain * (x - dbar).
struct InteractionLaw {
    enum class Family { Linear, Custom };

    Family family = Family::Linear;
    double gain = 1.0;
    std::function<double(double dist, double dbar)> custom;

    static InteractionLaw linear(double gain = 1.0) {
        if (!(gain > 0.0)) throw Error("linear law needs gain > 0");
        InteractionLaw law;
        law.family = Family::Linear;
        law.gain = gain;
        return law;
    }

    static InteractionLaw custom_law(std::function<double(double, double)> fn) {
        InteractionLaw law;
        law.family = Family::Custom;
        law.custom = std::move(fn);
        return law;
    }

    double value(double dist, double dbar) const {
        if (family == Family::Linear) return gain * (dist - dbar);
        return custom(dist, dbar);
    }
};

/// Constant per-directed-edge shifts c_ij with a declared edge support.
class OffsetField {
  public:
    OffsetField() = default;

    static OffsetField on_graph(const FormationGraph& graph) {
        OffsetField f;
        for (const auto& [i, j] : graph.edges()) {
            f.allowed_.insert({i, j});
            f.allowed_.insert({j, i});
        }
        return f;
    }

    static OffsetField on_clique(const FormationGraph& graph, const CliqueSpec& clique) {
        clique.validate_against(graph);
        OffsetField f;
        for (const auto& [i, j] : clique.edges()) {
            f.allowed_.insert({i, j});
            f.allowed_.insert({j, i});
        }
        return f;
    }

    void set(int i, int j, double c) {
        if (!allowed_.count({i, j}))
            throw SupportViolation("offset on edge outside declared support");
        if (c == 0.0)
            values_.erase({i, j});
        else
            values_[{i, j}] = c;
    }

    double get(int i, int j) const {
        auto it = values_.find({i, j});
        return it == values_.end() ? 0.0 : it->second;
    }

    double norm() const {
        double m = 0.0;
        for (const auto& [e, c] : values_) m = std::max(m, std::abs(c));
        return m;
    }

    bool is_reciprocal(double tol = 0.0) const {
        for (const auto& [e, c] : values_)
            if (std::abs(c - get(e.second, e.first)) > tol) return false;
        return true;
    }

    bool same_support(const OffsetField& o) const { return allowed_ == o.allowed_; }

    OffsetField scaled(double s) const {
        OffsetField f;
        f.allowed_ = allowed_;
        for (const auto& [e, c] : values_) f.values_[e] = s * c;
        return f;
    }

    void add_scaled(const OffsetField& o, double s) {
        if (!same_support(o)) throw SupportViolation("offset supports disagree");
        for (const auto& [e, c] : o.values_) set(e.first, e.second, get(e.first, e.second) + s * c);
    }

    const std::map<DirectedEdge, double>& entries() const { return values_; }
    const std::set<DirectedEdge>& support() const { return allowed_; }

  private:
    std::map<DirectedEdge, double> values_;
    std::set<DirectedEdge> allowed_;
};

namespace detail {

inline void check_config(const FormationGraph& graph, const Configuration& p) {
    if (p.count() != graph.vertex_count())
        throw DimensionMismatch("configuration size does not match graph");
}

inline void check_offset(const FormationGraph& graph, const OffsetField* o) {
    if (!o) return;
    for (const auto& [e, c] : o->entries())
        if (!graph.has_edge(e.first, e.second))
            throw SupportViolation("offset on a non-edge of the graph");
}

}  // namespace detail

/// The formation field f_i = sum_j [f_ij(||x_j-x_i||) + c_ij] (x_j - x_i), stacked.
inline VectorXd vector_field(const FormationGraph& graph, const InteractionLaw& law,
                             const Configuration& p,
                             const OffsetField* perturbation = nullptr,
                             const OffsetField* control = nullptr) {
    detail::check_config(graph, p);
    detail::check_offset(graph, perturbation);
    detail::check_offset(graph, control);
    const int k = p.dimension();
    MatrixXd f = MatrixXd::Zero(k, p.count());
    for (const auto& [i, j] : graph.edges()) {
        VectorXd u = p.point(j) - p.point(i);
        double r = u.norm();
        double base = law.value(r, graph.target_length(i, j));
        double cij = base, cji = base;
        if (perturbation) {
            cij += perturbation->get(i, j);
            cji += perturbation->get(j, i);
        }
        if (control) {
            cij += control->get(i, j);
            cji += control->get(j, i);
        }
        f.col(i) += cij * u;
        f.col(j) -= cji * u;
    }
    return Eigen::Map<const VectorXd>(f.data(), f.size());
}

/// Potential whose negative gradient is the reciprocal field. An optional
/// reciprocal offset shifts each law by a constant; non-reciprocal offsets are rejected.
inline double potential(const FormationGraph& graph, const InteractionLaw& law,
                        const Configuration& p, const OffsetField* offset = nullptr) {
    detail::check_config(graph, p);
    detail::check_offset(graph, offset);
    if (offset && !offset->is_reciprocal(1e-15))
        throw NonReciprocal("potential undefined for non-reciprocal offsets");
    double phi = 0.0;
    for (const auto& [i, j] : graph.edges()) {
        double s = (p.point(j) - p.point(i)).norm();
        double dbar = graph.target_length(i, j);
        if (law.family == InteractionLaw::Family::Linear) {
            phi += law.gain * ((s * s * s - 1.0) / 3.0 - dbar * (s * s - 1.0) / 2.0);
        } else {
            auto integrand = [&](double x) { return x * law.value(x, dbar); };
            phi += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
                integrand, 1.0, s, 10, 1e-12);
        }
        if (offset) phi += offset->get(i, j) * (s * s - 1.0) / 2.0;
    }
    return phi;
}

/// Row per edge: (x_i - x_j)^T in block i, (x_j - x_i)^T in block j.
inline MatrixXd rigidity_matrix(const FormationGraph& graph, const Configuration& p) {
    detail::check_config(graph, p);
    const int k = p.dimension();
    if (config_rank(p) != k)
        throw RankDeficient("rigidity_matrix: configuration not of full rank");
    MatrixXd r = MatrixXd::Zero(graph.edges().size(), k * p.count());
    int row = 0;
    for (const auto& [i, j] : graph.edges()) {
        VectorXd u = p.point(j) - p.point(i);
        r.block(row, k * i, 1, k) = -u.transpose();
        r.block(row, k * j, 1, k) = u.transpose();
        ++row;
    }
    return r;
}

inline bool is_infinitesimally_rigid(const FormationGraph& graph, const Configuration& p) {
    MatrixXd r = rigidity_matrix(graph, p);
    Eigen::JacobiSVD<MatrixXd> svd(r);
    const auto& sv = svd.singularValues();
    int rank = 0;
    if (sv.size() > 0 && sv(0) > 0.0) {
        double thresh = sv(0) * std::max(r.rows(), r.cols()) * 1e-10;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > thresh) ++rank;
    }
    const int k = p.dimension();
    return rank == k * p.count() - k * (k + 1) / 2;
}

/// Jacobian of the (possibly offset) field with respect to p.
inline MatrixXd field_jacobian(const FormationGraph& graph, const InteractionLaw& law,
                               const Configuration& p,
                               const OffsetField* perturbation = nullptr,
                               const OffsetField* control = nullptr) {
    detail::check_config(graph, p);
    const int k = p.dimension();
    const int n = p.count();
    if (law.family != InteractionLaw::Family::Linear) {
        // Central differences for generic laws.
        const double step = 1e-6 * (1.0 + p.points().cwiseAbs().maxCoeff());
        MatrixXd jac(k * n, k * n);
        VectorXd flat = p.flatten();
        for (int c = 0; c < k * n; ++c) {
            VectorXd fp = flat, fm = flat;
            fp(c) += step;
            fm(c) -= step;
            jac.col(c) = (vector_field(graph, law, Configuration::from_flat(k, fp),
                                       perturbation, control) -
                          vector_field(graph, law, Configuration::from_flat(k, fm),
                                       perturbation, control)) /
                         (2.0 * step);
        }
        return jac;
    }
    MatrixXd jac = MatrixXd::Zero(k * n, k * n);
    auto offset_sum = [&](int a, int b) {
        double c = 0.0;
        if (perturbation) c += perturbation->get(a, b);
        if (control) c += control->get(a, b);
        return c;
    };
    for (const auto& [i, j] : graph.edges()) {
        VectorXd u = p.point(j) - p.point(i);
        double r = u.norm();
        double base = law.value(r, graph.target_length(i, j));
        MatrixXd outer = r > 1e-300 ? MatrixXd(law.gain * (u * u.transpose()) / r)
                                    : MatrixXd(MatrixXd::Zero(k, k));
        MatrixXd bij = (base + offset_sum(i, j)) * MatrixXd::Identity(k, k) + outer;
        MatrixXd bji = (base + offset_sum(j, i)) * MatrixXd::Identity(k, k) + outer;
        jac.block(k * i, k * j, k, k) += bij;
        jac.block(k * i, k * i, k, k) -= bij;
        jac.block(k * j, k * i, k, k) += bji;
        jac.block(k * j, k * j, k, k) -= bji;
    }
    return jac;
}

/// -d(f - h_aux)/dp where h_aux is the rigid field of the supplied generator.
/// With no generator this is -df/dp, the Hessian of the potential for reciprocal laws.
inline MatrixXd hessian(const FormationGraph& graph, const InteractionLaw& law,
                        const Configuration& p,
                        const std::optional<SEAlgebraElement>& generator = std::nullopt,
                        const OffsetField* perturbation = nullptr,
                        const OffsetField* control = nullptr) {
    MatrixXd jac = field_jacobian(graph, law, p, perturbation, control);
    if (generator) {
        const int k = p.dimension();
        if (generator->dimension() != k)
            throw DimensionMismatch("hessian: generator dimension disagrees");
        for (int i = 0; i < p.count(); ++i)
            jac.block(k * i, k * i, k, k) -= generator->omega;
    }
    return -jac;
}

enum class OrbitClass { ExponentiallyStable, Degenerate, Unstable };

inline const char* to_string(OrbitClass c) {
    switch (c) {
        case OrbitClass::ExponentiallyStable: return "ExponentiallyStable";
        case OrbitClass::Degenerate: return "Degenerate";
        case OrbitClass::Unstable: return "Unstable";
    }
    return "?";
}

struct StabilityReport {
    Eigen::VectorXcd eigenvalues;
    int zero_count = 0;
    OrbitClass classification = OrbitClass::Degenerate;
    double zero_tolerance = 0.0;
};

/// Spectrum of the orbit Hessian with the k(k+1)/2 zero-mode count check.
inline StabilityReport classify_orbit(const FormationGraph& graph, const InteractionLaw& law,
                                      const Configuration& p,
                                      const std::optional<SEAlgebraElement>& generator = std::nullopt,
                                      const OffsetField* perturbation = nullptr,
                                      const OffsetField* control = nullptr) {
    MatrixXd h = hessian(graph, law, p, generator, perturbation, control);
    Eigen::EigenSolver<MatrixXd> es(h);
    StabilityReport report;
    report.eigenvalues = es.eigenvalues();
    double maxmod = 0.0;
    for (int i = 0; i < report.eigenvalues.size(); ++i)
        maxmod = std::max(maxmod, std::abs(report.eigenvalues(i)));
    report.zero_tolerance = std::max(1e-8, 1e-7 * maxmod);
    bool all_positive = true;
    for (int i = 0; i < report.eigenvalues.size(); ++i) {
        if (std::abs(report.eigenvalues(i)) < report.zero_tolerance)
            ++report.zero_count;
        else if (report.eigenvalues(i).real() <= report.zero_tolerance)
            all_positive = false;
    }
    const int k = p.dimension();
    if (report.zero_count != k * (k + 1) / 2)
        report.classification = OrbitClass::Degenerate;
    else
        report.classification =
            all_positive ? OrbitClass::ExponentiallyStable : OrbitClass::Unstable;
    return report;
}

}  // namespace formctl

#endif  // FORMCTL_FORMATION_HPP
