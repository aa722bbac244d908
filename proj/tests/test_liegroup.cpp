#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "formctl/liegroup.hpp"
#include "oracles.hpp"

using namespace formctl;

TEST_CASE("group composition and inverse") {
    std::mt19937_64 rng(11);
    for (int k : {2, 3}) {
        SEElement a = fixtures::random_group_element(rng, k);
        SEElement b = fixtures::random_group_element(rng, k);
        Configuration p = fixtures::random_config(rng, k, 4);

        // (a b) . p == a . (b . p)
        Configuration lhs = se_act(se_compose(a, b), p);
        Configuration rhs = se_act(a, se_act(b, p));
        REQUIRE((lhs.points() - rhs.points()).norm() < 1e-12);

        SEElement e = se_compose(a, a.inverse());
        REQUIRE((e.rotation - MatrixXd::Identity(k, k)).norm() < 1e-12);
        REQUIRE(e.translation.norm() < 1e-12);

        Configuration back = se_act(a.inverse(), se_act(a, p));
        REQUIRE((back.points() - p.points()).norm() < 1e-12);
    }
}

TEST_CASE("se_exp matches the dense homogeneous exponential") {
    std::mt19937_64 rng(23);
    for (int k : {2, 3, 4}) {
        for (int trial = 0; trial < 50; ++trial) {
            SEAlgebraElement g(fixtures::random_skew(rng, k, 2.0),
                               fixtures::random_vector(rng, k, 2.0));
            for (double t : {0.0, 0.3, 1.0, -1.7, 5.0}) {
                SEElement got = se_exp(g, t);
                SEElement want = oracles::se_exp_expm(g, t);
                REQUIRE((got.rotation - want.rotation).norm() < 1e-10);
                REQUIRE((got.translation - want.translation).norm() < 1e-10);
            }
        }
    }
}

TEST_CASE("phi_series is total, including zero and near-zero rotation") {
    std::mt19937_64 rng(31);
    for (int k : {2, 3}) {
        MatrixXd zero = MatrixXd::Zero(k, k);
        REQUIRE((phi_series(zero, 1.0) - MatrixXd::Identity(k, k)).norm() < 1e-14);
        REQUIRE(phi_series(zero, 0.0).norm() < 1e-14);
        for (double scale : {1e-12, 1e-6, 1e-2, 1.0, 3.0}) {
            MatrixXd w = fixtures::random_skew(rng, k, scale);
            for (double t : {0.0, 0.5, 1.0, 10.0}) {
                REQUIRE((phi_series(w, t) - oracles::phi_expm(w, t)).norm() < 1e-10);
            }
        }
    }
    // Rank-deficient skew part in odd dimension (rotation axis).
    MatrixXd w = MatrixXd::Zero(3, 3);
    w(0, 1) = 1.5;
    w(1, 0) = -1.5;
    REQUIRE((phi_series(w, 1.0) - oracles::phi_expm(w, 1.0)).norm() < 1e-10);
}

TEST_CASE("exp/log roundtrip away from the branch cut") {
    std::mt19937_64 rng(47);
    const double pi = std::acos(-1.0);
    for (int trial = 0; trial < 300; ++trial) {
        int k = 2 + static_cast<int>(rng() % 2);
        MatrixXd w = fixtures::random_skew(rng, k);
        if (w.norm() > 0.0) w *= fixtures::uniform(rng, 0.0, pi - 0.1) / (w.norm() / std::sqrt(2.0));
        SEAlgebraElement g(w, fixtures::random_vector(rng, k, 3.0));
        SEAlgebraElement back = se_log(se_exp(g));
        REQUIRE((back.omega - g.omega).norm() < 1e-9);
        REQUIRE((back.vel - g.vel).norm() < 1e-9);
    }
}

TEST_CASE("se_log rejects rotations at the branch singularity") {
    MatrixXd half_turn(2, 2);
    half_turn << -1.0, 0.0, 0.0, -1.0;
    REQUIRE_THROWS_AS(se_log(SEElement(half_turn, VectorXd::Zero(2))), BranchSingularity);

    // k = 3 rotation by pi about the z axis.
    MatrixXd rot = MatrixXd::Identity(3, 3);
    rot(0, 0) = -1.0;
    rot(1, 1) = -1.0;
    REQUIRE_THROWS_AS(se_log(SEElement(rot, VectorXd::Zero(3))), BranchSingularity);
}

TEST_CASE("se_log rejects non-orthogonal input") {
    MatrixXd bad(2, 2);
    bad << 1.0, 0.2, 0.0, 1.0;
    REQUIRE_THROWS_AS(se_log(SEElement(bad, VectorXd::Zero(2))), NonOrthogonal);
    MatrixXd reflect(2, 2);
    reflect << 1.0, 0.0, 0.0, -1.0;
    REQUIRE_THROWS_AS(se_log(SEElement(reflect, VectorXd::Zero(2))), NonOrthogonal);
}

TEST_CASE("orbit_distance agrees with brute-force search in the plane") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 20; ++trial) {
        Configuration p = fixtures::random_config(rng, 2, 5);
        Configuration q = fixtures::random_config(rng, 2, 5);
        double got = orbit_distance(p, q).distance;
        double want = oracles::orbit_distance_search(p, q);
        REQUIRE(got == Catch::Approx(want).margin(1e-8));
        REQUIRE(got <= want + 1e-10);
    }
}

TEST_CASE("orbit_distance vanishes on the orbit and is invariant") {
    std::mt19937_64 rng(61);
    Configuration q = fixtures::random_config(rng, 2, 5);
    SEElement a = fixtures::random_group_element(rng, 2);
    auto res = orbit_distance(se_act(a, q), q);
    REQUIRE(res.distance < 1e-12);
    REQUIRE((res.aligner.rotation - a.rotation).norm() < 1e-10);

    Configuration p = fixtures::random_config(rng, 2, 5);
    double d0 = orbit_distance(p, q).distance;
    double d1 = orbit_distance(se_act(a, p), se_act(a, q)).distance;
    REQUIRE(d0 == Catch::Approx(d1).margin(1e-10));
}

TEST_CASE("aligner achieves the reported distance") {
    std::mt19937_64 rng(67);
    Configuration p = fixtures::random_config(rng, 2, 6);
    Configuration q = fixtures::random_config(rng, 2, 6);
    auto res = orbit_distance(p, q);
    double realized = (p.points() - se_act(res.aligner, q).points()).norm();
    REQUIRE(realized == Catch::Approx(res.distance).margin(1e-12));
    REQUIRE(res.aligner.orthogonality_defect() < 1e-12);
    REQUIRE(res.aligner.rotation.determinant() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("algebra coordinates roundtrip") {
    std::mt19937_64 rng(71);
    for (int k : {2, 3, 4}) {
        SEAlgebraElement g(fixtures::random_skew(rng, k), fixtures::random_vector(rng, k));
        SEAlgebraElement back = se_algebra_from_coords(k, se_algebra_coords(g));
        REQUIRE((back.omega - g.omega).norm() < 1e-15);
        REQUIRE((back.vel - g.vel).norm() < 1e-15);
        REQUIRE(static_cast<int>(se_algebra_basis(k).size()) == k * (k + 1) / 2);
    }
}

TEST_CASE("tangent basis is orthonormal and spans the rigid fields") {
    std::mt19937_64 rng(73);
    Configuration q = fixtures::five_agent_config();
    auto basis = tangent_basis(q);
    REQUIRE(basis.size() == 3);
    for (size_t a = 0; a < basis.size(); ++a)
        for (size_t b = 0; b < basis.size(); ++b)
            REQUIRE(basis[a].dot(basis[b]) == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-12));

    // Every rigid field at q lies in the span.
    SEAlgebraElement g(fixtures::random_skew(rng, 2), fixtures::random_vector(rng, 2));
    VectorXd field = rigid_field(g, q);
    VectorXd proj = VectorXd::Zero(field.size());
    for (const auto& t : basis) proj += t.dot(field) * t;
    REQUIRE((field - proj).norm() < 1e-10);
}

TEST_CASE("tangent basis rejects degenerate configurations") {
    MatrixXd collinear(2, 3);
    collinear << 0.0, 1.0, 2.0, 0.0, 0.0, 0.0;
    REQUIRE_THROWS_AS(tangent_basis(Configuration(collinear)), RankDeficient);
}

TEST_CASE("transported generator reproduces the moved field") {
    std::mt19937_64 rng(79);
    Configuration p = fixtures::random_config(rng, 2, 5);
    SEAlgebraElement g(fixtures::random_skew(rng, 2), fixtures::random_vector(rng, 2));
    SEElement a = fixtures::random_group_element(rng, 2);
    SEAlgebraElement gt = transport_generator(g, a);

    // Pushing the field forward by a equals evaluating the transported
    // generator at the moved configuration.
    VectorXd f = rigid_field(g, p);
    Configuration moved = se_act(a, p);
    VectorXd pushed(f.size());
    for (int i = 0; i < p.count(); ++i)
        pushed.segment(2 * i, 2) = a.rotation * f.segment(2 * i, 2);
    REQUIRE((rigid_field(gt, moved) - pushed).norm() < 1e-12);
}

TEST_CASE("config_rank on degenerate and generic inputs") {
    MatrixXd single(2, 1);
    single << 0.5, -0.5;
    REQUIRE(config_rank(Configuration(single)) == 0);
    MatrixXd line(2, 4);
    line << 0, 1, 2, 3, 0, 0, 0, 0;
    REQUIRE(config_rank(Configuration(line)) == 1);
    REQUIRE(config_rank(fixtures::five_agent_config()) == 2);
}
