#ifndef FORMCTL_LIEGROUP_HPP
#define FORMCTL_LIEGROUP_HPP

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "formctl/errors.hpp"

namespace formctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Stacked positions of n agents in R^k, stored column-wise (column i is agent i).
class Configuration {
  public:
    Configuration() = default;

    explicit Configuration(MatrixXd pts) : points_(std::move(pts)) {
        if (points_.rows() < 1 || points_.cols() < 1)
            throw DimensionMismatch("configuration needs k >= 1 and n >= 1");
        if (!points_.allFinite())
            throw Error("configuration has non-finite coordinates");
    }

    static Configuration from_flat(int k, const VectorXd& flat) {
        if (k < 1 || flat.size() % k != 0)
            throw DimensionMismatch("flat vector length not a multiple of k");
        MatrixXd pts = Eigen::Map<const MatrixXd>(flat.data(), k, flat.size() / k);
        return Configuration(pts);
    }

    int dimension() const { return static_cast<int>(points_.rows()); }
    int count() const { return static_cast<int>(points_.cols()); }

    Eigen::Ref<const VectorXd> point(int i) const { return points_.col(i); }
    const MatrixXd& points() const { return points_; }

    VectorXd flatten() const {
        return Eigen::Map<const VectorXd>(points_.data(), points_.size());
    }

  private:
    MatrixXd points_;
};

/// Group element (theta, b) of SE(k).
struct SEElement {
    MatrixXd rotation;
    VectorXd translation;

    SEElement() = default;
    SEElement(MatrixXd theta, VectorXd b)
        : rotation(std::move(theta)), translation(std::move(b)) {
        if (rotation.rows() != rotation.cols() || rotation.rows() != translation.size())
            throw DimensionMismatch("SEElement dimensions disagree");
    }

    static SEElement identity(int k) {
        return SEElement(MatrixXd::Identity(k, k), VectorXd::Zero(k));
    }

    int dimension() const { return static_cast<int>(translation.size()); }

    SEElement inverse() const {
        MatrixXd rt = rotation.transpose();
        return SEElement(rt, -(rt * translation));
    }

    double orthogonality_defect() const {
        int k = dimension();
        return (rotation.transpose() * rotation - MatrixXd::Identity(k, k))
            .cwiseAbs()
            .maxCoeff();
    }
};

/// Generator (Omega, v) of se(k). Storage keeps Omega exactly skew.
struct SEAlgebraElement {
    SEAlgebraElement() = default;
    SEAlgebraElement(const MatrixXd& omega_in, VectorXd v) : vel(std::move(v)) {
        if (omega_in.rows() != omega_in.cols() || omega_in.rows() != vel.size())
            throw DimensionMismatch("SEAlgebraElement dimensions disagree");
        omega = 0.5 * (omega_in - omega_in.transpose());
    }

    static SEAlgebraElement zero(int k) {
        return SEAlgebraElement(MatrixXd::Zero(k, k), VectorXd::Zero(k));
    }

    int dimension() const { return static_cast<int>(vel.size()); }

    double norm() const { return std::sqrt(omega.squaredNorm() + vel.squaredNorm()); }

    SEAlgebraElement scaled(double s) const { return SEAlgebraElement(s * omega, s * vel); }

    SEAlgebraElement plus(const SEAlgebraElement& o) const {
        return SEAlgebraElement(omega + o.omega, vel + o.vel);
    }

    MatrixXd omega;
    VectorXd vel;
};

inline SEElement se_compose(const SEElement& a, const SEElement& b) {
    if (a.dimension() != b.dimension())
        throw DimensionMismatch("se_compose: mixed dimensions");
    return SEElement(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
}

inline Configuration se_act(const SEElement& a, const Configuration& p) {
    if (a.dimension() != p.dimension())
        throw DimensionMismatch("se_act: mixed dimensions");
    MatrixXd out = a.rotation * p.points();
    out.colwise() += a.translation;
    return Configuration(out);
}

namespace detail {

// exp(W) and phi(W,1) = (exp(W)-I)/W for small-norm W by truncated series.
inline std::pair<MatrixXd, MatrixXd> exp_phi_series(const MatrixXd& w) {
    const int k = static_cast<int>(w.rows());
    MatrixXd term = MatrixXd::Identity(k, k);
    MatrixXd e = term;
    MatrixXd phi = term;
    double scale = std::max(1.0, e.norm());
    for (int m = 1; m < 64; ++m) {
        term = (term * w) / static_cast<double>(m);
        e += term;
        phi += term / static_cast<double>(m + 1);
        if (term.norm() < 1e-16 * scale) break;
        scale = std::max(scale, e.norm());
    }
    return {e, phi};
}

}  // namespace detail

/// Matrix exponential of a skew matrix, via scaled series and repeated squaring.
inline MatrixXd skew_exp(const MatrixXd& omega, double t = 1.0) {
    MatrixXd w = omega * t;
    int squarings = 0;
    double nrm = w.norm();
    while (nrm > 0.5) {
        w *= 0.5;
        nrm *= 0.5;
        ++squarings;
    }
    MatrixXd e = detail::exp_phi_series(w).first;
    for (int s = 0; s < squarings; ++s) e = e * e;
    return e;
}

/// (exp(Omega t) - I)/Omega, total on skew inputs including Omega = 0.
inline MatrixXd phi_series(const MatrixXd& omega, double t) {
    const int k = static_cast<int>(omega.rows());
    Eigen::JacobiSVD<MatrixXd> svd(omega);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(k - 1);
    if (smin > 1e-3 * smax && smax * std::abs(t) > 0.5) {
        // Omega invertible and the angle large enough that exp - I does not cancel.
        MatrixXd num = skew_exp(omega, t) - MatrixXd::Identity(k, k);
        return omega.fullPivLu().solve(num);
    }
    // Truncated series with squaring: phi(2t) = (exp(Omega t) + I) phi(t).
    MatrixXd w = omega * t;
    double scale = 1.0;
    int squarings = 0;
    while (w.norm() > 0.5) {
        w *= 0.5;
        scale *= 0.5;
        ++squarings;
    }
    auto [e, phi] = detail::exp_phi_series(w);
    phi *= t * scale;
    for (int s = 0; s < squarings; ++s) {
        phi = (e + MatrixXd::Identity(k, k)) * phi;
        e = e * e;
    }
    return phi;
}

/// exp((Omega, v) t) as a group element; matches the (k+1)x(k+1) homogeneous exponential.
inline SEElement se_exp(const SEAlgebraElement& g, double t = 1.0) {
    return SEElement(skew_exp(g.omega, t), phi_series(g.omega, t) * g.vel);
}

/// Principal logarithm. Rejects rotations with an angle within tol of pi.
inline SEAlgebraElement se_log(const SEElement& a, double branch_tol = 1e-6) {
    const int k = a.dimension();
    if (a.orthogonality_defect() > 1e-8 || a.rotation.determinant() < 0.0)
        throw NonOrthogonal("se_log: rotation is not special orthogonal");

    // Real Schur of a rotation is block diagonal: 2x2 rotation blocks and +-1 entries.
    Eigen::RealSchur<MatrixXd> schur(a.rotation);
    const MatrixXd& tmat = schur.matrixT();
    const MatrixXd& u = schur.matrixU();
    MatrixXd logblocks = MatrixXd::Zero(k, k);
    const double pi = std::acos(-1.0);
    for (int i = 0; i < k;) {
        if (i + 1 < k && std::abs(tmat(i + 1, i)) > 1e-10) {
            double angle = std::atan2(tmat(i + 1, i), tmat(i, i));
            if (std::abs(angle) > pi - branch_tol)
                throw BranchSingularity("se_log: rotation angle at pi");
            logblocks(i, i + 1) = -angle;
            logblocks(i + 1, i) = angle;
            i += 2;
        } else {
            if (tmat(i, i) < 0.0)
                throw BranchSingularity("se_log: eigenvalue -1 (angle pi)");
            i += 1;
        }
    }
    MatrixXd omega = u * logblocks * u.transpose();
    VectorXd v = phi_series(omega, 1.0).fullPivLu().solve(a.translation);
    return SEAlgebraElement(omega, v);
}

/// Dimension of the span of {x_2 - x_1, ..., x_n - x_1}.
inline int config_rank(const Configuration& p) {
    const int n = p.count();
    if (n == 1) return 0;
    MatrixXd diffs(p.dimension(), n - 1);
    for (int i = 1; i < n; ++i) diffs.col(i - 1) = p.point(i) - p.point(0);
    Eigen::JacobiSVD<MatrixXd> svd(diffs);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double thresh = sv(0) * n * 1e-10;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > thresh) ++rank;
    return rank;
}

struct OrbitDistanceResult {
    double distance = 0.0;
    SEElement aligner;  // argmin over alpha of ||p - alpha . q||
};

/// min over alpha in SE(k) of ||p - alpha . q||, by Kabsch with det +1 enforced.
inline OrbitDistanceResult orbit_distance(const Configuration& p, const Configuration& q) {
    if (p.dimension() != q.dimension() || p.count() != q.count())
        throw DimensionMismatch("orbit_distance: shapes disagree");
    const int k = p.dimension();
    VectorXd pc = p.points().rowwise().mean();
    VectorXd qc = q.points().rowwise().mean();
    MatrixXd pm = p.points().colwise() - pc;
    MatrixXd qm = q.points().colwise() - qc;
    MatrixXd h = pm * qm.transpose();
    Eigen::JacobiSVD<MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    VectorXd d = VectorXd::Ones(k);
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(k - 1) = -1.0;
    MatrixXd theta = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    SEElement aligner(theta, pc - theta * qc);
    double dist = (p.points() - se_act(aligner, q).points()).norm();
    return {dist, aligner};
}

/// Basis {(Omega_ab, 0)} u {(0, e_j)} of se(k), in a fixed order (rotations first).
inline std::vector<SEAlgebraElement> se_algebra_basis(int k) {
    std::vector<SEAlgebraElement> basis;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
            MatrixXd w = MatrixXd::Zero(k, k);
            w(a, b) = 1.0;
            w(b, a) = -1.0;
            basis.emplace_back(w, VectorXd::Zero(k));
        }
    for (int j = 0; j < k; ++j) {
        VectorXd v = VectorXd::Zero(k);
        v(j) = 1.0;
        basis.emplace_back(MatrixXd::Zero(k, k), v);
    }
    return basis;
}

/// Coordinates of g in the se_algebra_basis ordering.
inline VectorXd se_algebra_coords(const SEAlgebraElement& g) {
    const int k = g.dimension();
    VectorXd c(k * (k + 1) / 2);
    int idx = 0;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) c(idx++) = g.omega(a, b);
    for (int j = 0; j < k; ++j) c(idx++) = g.vel(j);
    return c;
}

inline SEAlgebraElement se_algebra_from_coords(int k, const VectorXd& c) {
    if (c.size() != k * (k + 1) / 2)
        throw DimensionMismatch("se_algebra_from_coords: wrong coordinate count");
    MatrixXd w = MatrixXd::Zero(k, k);
    VectorXd v(k);
    int idx = 0;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
            w(a, b) = c(idx);
            w(b, a) = -c(idx);
            ++idx;
        }
    for (int j = 0; j < k; ++j) v(j) = c(idx++);
    return SEAlgebraElement(w, v);
}

/// The field (Omega x_1 + v, ..., Omega x_n + v) stacked as a kn-vector.
inline VectorXd rigid_field(const SEAlgebraElement& g, const Configuration& p) {
    if (g.dimension() != p.dimension())
        throw DimensionMismatch("rigid_field: mixed dimensions");
    MatrixXd f = g.omega * p.points();
    f.colwise() += g.vel;
    return Eigen::Map<const VectorXd>(f.data(), f.size());
}

/// Orthonormal basis of T_q O_q, the span of the rigid fields at q.
inline std::vector<VectorXd> tangent_basis(const Configuration& q) {
    const int k = q.dimension();
    if (config_rank(q) != k)
        throw RankDeficient("tangent_basis: configuration not of full rank");
    auto gens = se_algebra_basis(k);
    const int m = static_cast<int>(gens.size());
    MatrixXd cols(k * q.count(), m);
    for (int j = 0; j < m; ++j) cols.col(j) = rigid_field(gens[j], q);
    Eigen::HouseholderQR<MatrixXd> qr(cols);
    MatrixXd thin_q = qr.householderQ() * MatrixXd::Identity(cols.rows(), m);
    std::vector<VectorXd> basis;
    basis.reserve(m);
    for (int j = 0; j < m; ++j) basis.push_back(thin_q.col(j));
    return basis;
}

/// Generator of the same invariant field seen at alpha . p (Prop. transport rule).
inline SEAlgebraElement transport_generator(const SEAlgebraElement& g, const SEElement& a) {
    if (g.dimension() != a.dimension())
        throw DimensionMismatch("transport_generator: mixed dimensions");
    MatrixXd w = a.rotation * g.omega * a.rotation.transpose();
    return SEAlgebraElement(w, a.rotation * g.vel - w * a.translation);
}

}  // namespace formctl

#endif  // FORMCTL_LIEGROUP_HPP
