#ifndef FORMCTL_TESTS_FIXTURES_HPP
#define FORMCTL_TESTS_FIXTURES_HPP

#include <random>

#include "formctl/formation.hpp"
#include "formctl/liegroup.hpp"

namespace fixtures {

using formctl::CliqueSpec;
using formctl::Configuration;
using formctl::FormationGraph;
using formctl::MatrixXd;
using formctl::VectorXd;

// Equilateral triangle with unit sides; K3 is minimally rigid in the plane.
inline Configuration triangle_config() {
    MatrixXd pts(2, 3);
    pts << 0.0, 1.0, 0.5, 0.0, 0.0, std::sqrt(3.0) / 2.0;
    return Configuration(pts);
}

inline FormationGraph triangle_graph() {
    FormationGraph g(3);
    g.add_edge(0, 1, 1.0);
    g.add_edge(0, 2, 1.0);
    g.add_edge(1, 2, 1.0);
    return g;
}

// Unit square on a 4-cycle: flexible, so the zero eigenspace is too big.
inline Configuration square_config() {
    MatrixXd pts(2, 4);
    pts << 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0;
    return Configuration(pts);
}

inline FormationGraph cycle_graph() {
    FormationGraph g(4);
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 2, 1.0);
    g.add_edge(2, 3, 1.0);
    g.add_edge(0, 3, 1.0);
    return g;
}

// Five agents, seven edges, minimally rigid, with the triangle {0,1,2}
// forming the controlled clique. Target lengths equal the realized distances,
// so the configuration is an equilibrium of the nominal dynamics.
inline Configuration five_agent_config() {
    MatrixXd pts(2, 5);
    pts << 0.0, 0.50551999999999997, 1.0110399999999999, -0.50551999999999997,
        1.4952000000000001,
        0.0, -0.71199999999999997, 0.0, -0.71199999999999997, -0.71199999999999997;
    return Configuration(pts);
}

inline FormationGraph five_agent_graph() {
    Configuration q = five_agent_config();
    FormationGraph g(5);
    for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {1, 4}, {2, 4}})
        g.add_edge(i, j, (q.point(i) - q.point(j)).norm());
    return g;
}

inline CliqueSpec five_agent_clique() { return CliqueSpec{{0, 1, 2}}; }

// Deterministic random helpers built on a caller-owned engine.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

inline Configuration random_config(std::mt19937_64& rng, int k, int n, double span = 2.0) {
    MatrixXd pts(k, n);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < n; ++c) pts(r, c) = uniform(rng, -span, span);
    return Configuration(pts);
}

inline MatrixXd random_skew(std::mt19937_64& rng, int k, double scale = 1.0) {
    MatrixXd w = MatrixXd::Zero(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
            double v = uniform(rng, -scale, scale);
            w(a, b) = v;
            w(b, a) = -v;
        }
    return w;
}

inline VectorXd random_vector(std::mt19937_64& rng, int k, double scale = 1.0) {
    VectorXd v(k);
    for (int i = 0; i < k; ++i) v(i) = uniform(rng, -scale, scale);
    return v;
}

// Random group element whose rotation angle stays clear of the log branch cut.
inline formctl::SEElement random_group_element(std::mt19937_64& rng, int k,
                                               double max_angle = std::acos(-1.0) - 0.1) {
    // Scale a random generator so its rotation part stays below max_angle.
    MatrixXd w = random_skew(rng, k);
    double nrm = w.norm();
    if (nrm > 0.0) {
        // For k = 2,3 the Frobenius norm is sqrt(2) |angle|.
        double angle = nrm / std::sqrt(2.0);
        double cap = uniform(rng, 0.0, max_angle);
        w *= cap / std::max(angle, 1e-12);
    }
    formctl::SEAlgebraElement g(w, random_vector(rng, k));
    return formctl::se_exp(g);
}

}  // namespace fixtures

#endif  // FORMCTL_TESTS_FIXTURES_HPP
