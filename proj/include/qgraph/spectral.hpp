#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/detail/numerics.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/tolerances.hpp"

namespace qgraph {

struct BasisValues {
    double u = 0.0;
    double du = 0.0;
    double v = 0.0;
    double dv = 0.0;
};

/// Fundamental solutions of -y'' + W y = lambda y on one edge, normalised by
/// u(0) = 1, u'(0) = 0 and v(0) = 0, v'(0) = 1.
///
/// Constant potentials use the closed forms in mu = lambda - q, continued
/// through mu = 0 (u = 1, v = x) to the hyperbolic branch for mu < 0, so the
/// basis is analytic in lambda. Sampled potentials are integrated with
/// classical RK4 and evaluated between nodes by cubic Hermite interpolation
/// of (y, y') and (y', y'').
class EdgeBasis {
public:
    static EdgeBasis solve(const Edge& edge, double lambda) {
        EdgeBasis b;
        b.length_ = edge.length;
        b.lambda_ = lambda;
        if (const auto* c = std::get_if<ConstantPotential>(&edge.potential)) {
            b.q_ = c->value;
            b.end_ = b.closed_form(edge.length);
            return b;
        }
        b.sampled_ = std::get<SampledPotential>(edge.potential);
        b.integrate();
        return b;
    }

    [[nodiscard]] BasisValues at(double x) const {
        if (sampled_.x.empty()) return closed_form(x);
        return interpolate(x);
    }

    [[nodiscard]] const BasisValues& end() const { return end_; }
    [[nodiscard]] double length() const { return length_; }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] bool is_closed_form() const { return sampled_.x.empty(); }
    [[nodiscard]] std::span<const double> nodes() const { return nodes_; }

    /// W(x) - lambda, so that y'' = curvature_factor(x) * y.
    [[nodiscard]] double curvature_factor(double x) const {
        return (sampled_.x.empty() ? q_ : sampled_(x)) - lambda_;
    }

    [[nodiscard]] double min_potential() const {
        return sampled_.x.empty() ? q_ : sampled_.min_value();
    }

    /// Dirichlet eigenvalues of the edge below lambda, i.e. zeros of v in (0, l).
    [[nodiscard]] std::size_t dirichlet_count() const {
        if (sampled_.x.empty()) {
            const double mu = lambda_ - q_;
            if (mu <= 0.0) return 0;
            const double turns = std::sqrt(mu) * length_ / std::numbers::pi;
            auto n = static_cast<std::size_t>(std::floor(turns));
            // keep the count consistent with the sign of v(l) right at a multiple of pi
            const bool v_positive = end_.v > 0.0;
            if (v_positive != (n % 2 == 0)) n = turns - static_cast<double>(n) > 0.5 ? n + 1 : (n > 0 ? n - 1 : 0);
            return n;
        }
        std::size_t n = 0;
        for (std::size_t i = 2; i < v_.size(); ++i) n += (v_[i] > 0.0) != (v_[i - 1] > 0.0);
        return n;
    }

    /// max |u v' - u' v - 1| over the integration nodes (or a uniform grid
    /// for closed forms).
    [[nodiscard]] double wronskian_defect(std::size_t samples = 257) const {
        double worst = 0.0;
        auto check = [&](const BasisValues& b) {
            worst = std::max(worst, std::abs(b.u * b.dv - b.du * b.v - 1.0));
        };
        if (sampled_.x.empty()) {
            for (std::size_t i = 0; i < samples; ++i) {
                check(closed_form(length_ * static_cast<double>(i) / static_cast<double>(samples - 1)));
            }
        } else {
            for (std::size_t i = 0; i < nodes_.size(); ++i) check({u_[i], du_[i], v_[i], dv_[i]});
        }
        return worst;
    }

private:
    [[nodiscard]] BasisValues closed_form(double x) const {
        const double mu = lambda_ - q_;
        if (mu > 0.0) {
            const double s = std::sqrt(mu);
            const double c = std::cos(s * x);
            const double sn = std::sin(s * x);
            return {c, -s * sn, sn / s, c};
        }
        if (mu < 0.0) {
            const double s = std::sqrt(-mu);
            const double c = std::cosh(s * x);
            const double sn = std::sinh(s * x);
            return {c, s * sn, sn / s, c};
        }
        return {1.0, 0.0, x, 1.0};
    }

    void integrate() {
        const double scale = std::sqrt(std::abs(lambda_) + sampled_.max_abs() + 1.0);
        auto steps = static_cast<std::size_t>(std::ceil(length_ * scale / 0.02));
        steps = std::max<std::size_t>(steps, 256);
        steps += steps % 2;
        const double h = length_ / static_cast<double>(steps);
        nodes_.resize(steps + 1);
        u_.resize(steps + 1);
        du_.resize(steps + 1);
        v_.resize(steps + 1);
        dv_.resize(steps + 1);
        q_nodes_.resize(steps + 1);
        std::array<double, 4> y{1.0, 0.0, 0.0, 1.0};  // u, u', v, v'
        auto rhs = [&](double x, const std::array<double, 4>& s) {
            const double k = sampled_(x) - lambda_;
            return std::array<double, 4>{s[1], k * s[0], s[3], k * s[2]};
        };
        for (std::size_t i = 0; i <= steps; ++i) {
            const double x = h * static_cast<double>(i);
            nodes_[i] = x;
            u_[i] = y[0];
            du_[i] = y[1];
            v_[i] = y[2];
            dv_[i] = y[3];
            q_nodes_[i] = sampled_(x) - lambda_;
            if (i == steps) break;
            const auto k1 = rhs(x, y);
            std::array<double, 4> t{};
            for (int j = 0; j < 4; ++j) t[j] = y[j] + 0.5 * h * k1[j];
            const auto k2 = rhs(x + 0.5 * h, t);
            for (int j = 0; j < 4; ++j) t[j] = y[j] + 0.5 * h * k2[j];
            const auto k3 = rhs(x + 0.5 * h, t);
            for (int j = 0; j < 4; ++j) t[j] = y[j] + h * k3[j];
            const auto k4 = rhs(x + h, t);
            for (int j = 0; j < 4; ++j) y[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        }
        end_ = {u_.back(), du_.back(), v_.back(), dv_.back()};
    }

    [[nodiscard]] BasisValues interpolate(double x) const {
        const std::size_t n = nodes_.size() - 1;
        const double h = length_ / static_cast<double>(n);
        auto i = static_cast<std::size_t>(std::clamp(x / h, 0.0, static_cast<double>(n)));
        i = std::min(i, n - 1);
        const double t = (x - nodes_[i]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        auto herm = [&](double y0, double d0, double y1, double d1) {
            return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        };
        const double k0 = q_nodes_[i];
        const double k1 = q_nodes_[i + 1];
        return {herm(u_[i], du_[i], u_[i + 1], du_[i + 1]),
                herm(du_[i], k0 * u_[i], du_[i + 1], k1 * u_[i + 1]),
                herm(v_[i], dv_[i], v_[i + 1], dv_[i + 1]),
                herm(dv_[i], k0 * v_[i], dv_[i + 1], k1 * v_[i + 1])};
    }

    double length_ = 0.0;
    double lambda_ = 0.0;
    double q_ = 0.0;
    SampledPotential sampled_;
    std::vector<double> nodes_, u_, du_, v_, dv_, q_nodes_;
    BasisValues end_;
};

inline EdgeBasis edge_fundamental_solutions(const Edge& edge, double lambda) {
    return EdgeBasis::solve(edge, lambda);
}

/// Vertex-condition matrix in the fundamental basis. Unknowns are (c_u, c_v)
/// per edge; the c_v columns carry a smooth positive factor `v_scale` to
/// balance magnitudes, and every row is scaled to unit max-norm.
struct SecularSystem {
    Eigen::MatrixXd matrix;
    std::vector<EdgeBasis> bases;
    double v_scale = 1.0;
};

namespace detail {

inline SecularSystem build_secular(const MetricGraph& g, double lambda) {
    SecularSystem sys;
    const std::size_t ne = g.edges.size();
    sys.bases.reserve(ne);
    for (const auto& e : g.edges) sys.bases.push_back(EdgeBasis::solve(e, lambda));
    sys.v_scale = std::sqrt(1.0 + std::abs(lambda));
    sys.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * ne), static_cast<Eigen::Index>(2 * ne));
    const double vs = sys.v_scale;

    auto value_row = [&](const EdgeEnd& end) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(2 * ne));
        const auto c = static_cast<Eigen::Index>(2 * end.edge);
        if (end.side == 0) {
            r(c) = 1.0;
        } else {
            const auto& b = sys.bases[end.edge].end();
            r(c) = b.u;
            r(c + 1) = b.v * vs;
        }
        return r;
    };
    auto derivative_row = [&](const EdgeEnd& end) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(2 * ne));
        const auto c = static_cast<Eigen::Index>(2 * end.edge);
        if (end.side == 0) {
            r(c + 1) = vs;
        } else {
            const auto& b = sys.bases[end.edge].end();
            r(c) = -b.du;
            r(c + 1) = -b.dv * vs;
        }
        return r;
    };

    Eigen::Index row = 0;
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const auto ends = g.incident_ends(v);
        if (ends.empty()) continue;
        if (ends.size() == 1) {
            sys.matrix.row(row++) = g.condition(v) == BoundaryCondition::dirichlet
                                        ? value_row(ends[0])
                                        : derivative_row(ends[0]);
            continue;
        }
        for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
            sys.matrix.row(row++) = value_row(ends[i]) - value_row(ends[i + 1]);
        }
        Eigen::RowVectorXd kirchhoff = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(2 * ne));
        for (const auto& end : ends) kirchhoff += derivative_row(end);
        sys.matrix.row(row++) = kirchhoff;
    }
    for (Eigen::Index r = 0; r < sys.matrix.rows(); ++r) {
        const double m = sys.matrix.row(r).cwiseAbs().maxCoeff();
        if (m > 0.0) sys.matrix.row(r) /= m;
    }
    return sys;
}

inline double secular_det(const MetricGraph& g, double lambda) {
    return build_secular(g, lambda).matrix.partialPivLu().determinant();
}

inline void require_valid(const MetricGraph& g) {
    const auto r = validate(g);
    if (!r.valid) throw InvalidGraph(r.issues.front());
}

/// Relative smallest singular value of the secular matrix.
inline double secular_sigma_ratio(const MetricGraph& g, double lambda) {
    const auto sys = build_secular(g, lambda);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix);
    const auto& s = svd.singularValues();
    return s(s.size() - 1) / s(0);
}

inline std::size_t secular_nullity(const MetricGraph& g, double lambda, double rel) {
    const auto sys = build_secular(g, lambda);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix);
    const auto& s = svd.singularValues();
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) n += s(i) <= rel * s(0);
    return n;
}

/// Simpson node count (intervals, even) dense enough for eigenfunctions up
/// to `lambda` on an edge: 64 points per half-wavelength, at least 128.
inline std::size_t quadrature_intervals(double length, double lambda, double min_w) {
    const double k = std::sqrt(std::max(lambda - min_w, 0.0));
    auto n = static_cast<std::size_t>(std::ceil(64.0 * length * k / std::numbers::pi));
    n = std::max<std::size_t>(n, 128);
    return n + n % 2;
}

}  // namespace detail

inline SecularSystem secular_system(const MetricGraph& g, double lambda) {
    detail::require_valid(g);
    return detail::build_secular(g, lambda);
}

/// Determinant of the row-normalised vertex-condition matrix; continuous in
/// lambda and zero exactly on the spectrum.
inline double secular_value(const MetricGraph& g, double lambda) {
    detail::require_valid(g);
    return detail::secular_det(g, lambda);
}

/// One eigenfunction: per-edge coefficients in the fundamental basis at
/// `lambda`, normalised to unit L2 norm. `l2_norm` is the norm before
/// normalisation.
struct Eigenpair {
    double lambda = 0.0;
    std::size_t index = 0;         // 1-based position in the spectrum
    std::size_t multiplicity = 1;  // of the eigenvalue this pair belongs to
    double l2_norm = 1.0;
    std::vector<std::array<double, 2>> coeffs;
    std::shared_ptr<const std::vector<EdgeBasis>> bases;

    [[nodiscard]] double value(std::size_t e, double x) const {
        const auto b = (*bases)[e].at(x);
        return coeffs[e][0] * b.u + coeffs[e][1] * b.v;
    }
    [[nodiscard]] double derivative(std::size_t e, double x) const {
        const auto b = (*bases)[e].at(x);
        return coeffs[e][0] * b.du + coeffs[e][1] * b.dv;
    }
    [[nodiscard]] double second_derivative(std::size_t e, double x) const {
        return (*bases)[e].curvature_factor(x) * value(e, x);
    }
    [[nodiscard]] double end_value(const EdgeEnd& end) const {
        if (end.side == 0) return coeffs[end.edge][0];
        const auto& b = (*bases)[end.edge].end();
        return coeffs[end.edge][0] * b.u + coeffs[end.edge][1] * b.v;
    }
    [[nodiscard]] double outward_derivative(const EdgeEnd& end) const {
        if (end.side == 0) return coeffs[end.edge][1];
        const auto& b = (*bases)[end.edge].end();
        return -(coeffs[end.edge][0] * b.du + coeffs[end.edge][1] * b.dv);
    }
    [[nodiscard]] double length(std::size_t e) const { return (*bases)[e].length(); }
};

inline double vertex_value(const MetricGraph& g, const Eigenpair& f, std::size_t v) {
    const auto ends = g.incident_ends(v);
    double s = 0.0;
    for (const auto& end : ends) s += f.end_value(end);
    return ends.empty() ? 0.0 : s / static_cast<double>(ends.size());
}

/// L2 inner product by composite Simpson on a uniform per-edge grid, dense
/// enough for the larger of the two eigenvalues.
inline double inner_product(const MetricGraph& g, const Eigenpair& a, const Eigenpair& b) {
    double total = 0.0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const double l = g.edges[e].length;
        const auto n = detail::quadrature_intervals(l, std::max(a.lambda, b.lambda),
                                                    potential_min(g.edges[e].potential));
        const double h = l / static_cast<double>(n);
        std::vector<double> vals(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            const double x = h * static_cast<double>(i);
            vals[i] = a.value(e, x) * b.value(e, x);
        }
        total += detail::simpson(vals, h);
    }
    return total;
}

/// max |f| over a dense grid of every edge (vertex values included).
inline double sup_norm(const MetricGraph& g, const Eigenpair& f) {
    double m = 0.0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const double l = g.edges[e].length;
        const auto n = detail::quadrature_intervals(l, f.lambda, potential_min(g.edges[e].potential));
        for (std::size_t i = 0; i <= n; ++i) {
            m = std::max(m, std::abs(f.value(e, l * static_cast<double>(i) / static_cast<double>(n))));
        }
    }
    return m;
}

struct ConditionResiduals {
    double continuity = 0.0;  // relative to |f|_inf
    double kirchhoff = 0.0;   // relative to |f|_inf * sqrt(|lambda| + 1)
    double boundary = 0.0;    // Dirichlet values / Neumann derivatives, relative
};

inline ConditionResiduals condition_residuals(const MetricGraph& g, const Eigenpair& f) {
    ConditionResiduals r;
    const double fs = sup_norm(g, f);
    const double ds = fs * std::sqrt(std::abs(f.lambda) + 1.0);
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const auto ends = g.incident_ends(v);
        if (ends.size() == 1) {
            const double res = g.condition(v) == BoundaryCondition::dirichlet
                                   ? std::abs(f.end_value(ends[0])) / fs
                                   : std::abs(f.outward_derivative(ends[0])) / ds;
            r.boundary = std::max(r.boundary, res);
            continue;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < ends.size(); ++i) {
            sum += f.outward_derivative(ends[i]);
            if (i + 1 < ends.size()) {
                r.continuity = std::max(
                    r.continuity, std::abs(f.end_value(ends[i]) - f.end_value(ends[i + 1])) / fs);
            }
        }
        r.kirchhoff = std::max(r.kirchhoff, std::abs(sum) / ds);
    }
    return r;
}

namespace detail {

/// Recovers `count` orthonormal eigenfunctions from the `count` smallest
/// right singular vectors of the secular matrix at lambda.
inline std::vector<Eigenpair> recover_pairs(const MetricGraph& g, double lambda, std::size_t count) {
    auto sys = build_secular(g, lambda);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix, Eigen::ComputeFullV);
    const auto& V = svd.matrixV();
    const Eigen::Index n = V.cols();
    const std::size_t ne = g.edges.size();
    auto bases = std::make_shared<const std::vector<EdgeBasis>>(std::move(sys.bases));

    // Per-edge Gram blocks of (u, v) by Simpson on the basis grid.
    std::vector<std::array<double, 3>> gram(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& b = (*bases)[e];
        std::vector<double> x;
        if (!b.is_closed_form()) {
            x.assign(b.nodes().begin(), b.nodes().end());
        } else {
            const auto m = quadrature_intervals(b.length(), lambda, b.min_potential());
            x.resize(m + 1);
            for (std::size_t i = 0; i <= m; ++i) x[i] = b.length() * static_cast<double>(i) / static_cast<double>(m);
        }
        std::vector<double> uu(x.size()), uv(x.size()), vv(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto s = b.at(x[i]);
            uu[i] = s.u * s.u;
            uv[i] = s.u * s.v;
            vv[i] = s.v * s.v;
        }
        const double h = b.length() / static_cast<double>(x.size() - 1);
        gram[e] = {simpson(uu, h), simpson(uv, h), simpson(vv, h)};
    }
    auto dot = [&](const std::vector<std::array<double, 2>>& a, const std::vector<std::array<double, 2>>& c) {
        double s = 0.0;
        for (std::size_t e = 0; e < ne; ++e) {
            s += a[e][0] * c[e][0] * gram[e][0] + (a[e][0] * c[e][1] + a[e][1] * c[e][0]) * gram[e][1] +
                 a[e][1] * c[e][1] * gram[e][2];
        }
        return s;
    };

    std::vector<Eigenpair> out;
    for (std::size_t j = 0; j < count; ++j) {
        Eigen::VectorXd z = V.col(n - 1 - static_cast<Eigen::Index>(j));
        Eigen::Index imax = 0;
        z.cwiseAbs().maxCoeff(&imax);
        if (z(imax) < 0) z = -z;
        Eigenpair p;
        p.lambda = lambda;
        p.multiplicity = count;
        p.bases = bases;
        p.coeffs.resize(ne);
        for (std::size_t e = 0; e < ne; ++e) {
            p.coeffs[e] = {z(static_cast<Eigen::Index>(2 * e)), z(static_cast<Eigen::Index>(2 * e + 1)) * sys.v_scale};
        }
        // Boundary conditions hold only to the SVD residual; pin them exactly
        // so combinations with large cancelling coefficients stay clean there.
        for (auto v : g.boundary_vertices()) {
            const auto end = g.incident_ends(v).front();
            auto& c = p.coeffs[end.edge];
            const bool dir = g.condition(v) == BoundaryCondition::dirichlet;
            if (end.side == 0) {
                c[dir ? 0 : 1] = 0.0;
                continue;
            }
            const auto& b = (*bases)[end.edge].end();
            const double r0 = dir ? b.u : b.du;
            const double r1 = dir ? b.v : b.dv;
            const double t = (c[0] * r0 + c[1] * r1) / (r0 * r0 + r1 * r1);
            c[0] -= t * r0;
            c[1] -= t * r1;
        }
        // Modified Gram-Schmidt against the pairs already accepted.
        for (const auto& q : out) {
            const double c = dot(p.coeffs, q.coeffs);
            for (std::size_t e = 0; e < ne; ++e) {
                p.coeffs[e][0] -= c * q.coeffs[e][0];
                p.coeffs[e][1] -= c * q.coeffs[e][1];
            }
        }
        const double norm = std::sqrt(dot(p.coeffs, p.coeffs));
        if (!(norm > 0.0)) throw SpectralError("eigenfunction recovery produced a zero vector");
        for (auto& c : p.coeffs) {
            c[0] /= norm;
            c[1] /= norm;
        }
        p.l2_norm = norm;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace detail

/// Eigenfunctions at an eigenvalue: one per singular value of the secular
/// matrix below nullity_rel times the largest.
inline std::vector<Eigenpair> eigenfunction_recover(const MetricGraph& g, double lambda,
                                                    const Tolerances& tol = {}) {
    detail::require_valid(g);
    const auto nullity = detail::secular_nullity(g, lambda, tol.nullity_rel);
    if (nullity == 0) {
        throw SpectralError("lambda = " + std::to_string(lambda) + " is not within tolerance of an eigenvalue");
    }
    return detail::recover_pairs(g, lambda, nullity);
}

struct Spectrum {
    std::shared_ptr<const MetricGraph> graph;
    std::vector<Eigenpair> pairs;  // increasing, repeated by multiplicity
    double lambda_start = 0.0;     // lower end of the scanned window
    double lambda_end = 0.0;       // where the scan stopped

    [[nodiscard]] std::size_t size() const { return pairs.size(); }
    /// k is 1-based.
    [[nodiscard]] const Eigenpair& at(std::size_t k) const {
        if (k == 0 || k > pairs.size()) {
            throw InvalidArgument("eigenfunction index " + std::to_string(k) + " outside computed spectrum of size " +
                                  std::to_string(pairs.size()));
        }
        return pairs[k - 1];
    }
    [[nodiscard]] std::vector<double> eigenvalues() const {
        std::vector<double> out;
        for (const auto& p : pairs) out.push_back(p.lambda);
        return out;
    }
};

namespace detail {

struct Root {
    double lambda = 0.0;
    std::size_t multiplicity = 1;
};

/// Number of eigenvalues strictly below lambda: Dirichlet eigenvalues of the
/// decoupled edges plus the positive inertia of the vertex Dirichlet-to-Neumann
/// matrix (sum of derivatives into the edges, Dirichlet vertices eliminated).
/// Exact away from eigenvalues and edge Dirichlet eigenvalues.
inline std::size_t eigenvalue_count(const MetricGraph& g, double lambda) {
    std::vector<long> slot(g.vertices.size(), -1);
    long n = 0;
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        if (!(g.degree(v) == 1 && g.condition(v) == BoundaryCondition::dirichlet)) slot[v] = n++;
    }
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    std::size_t count = 0;
    for (const auto& e : g.edges) {
        const auto basis = EdgeBasis::solve(e, lambda);
        count += basis.dirichlet_count();
        const auto& b = basis.end();
        const long a = slot[e.from];
        const long c = slot[e.to];
        if (a >= 0) K(a, a) -= b.u / b.v;
        if (c >= 0) K(c, c) -= b.dv / b.v;
        if (a >= 0 && c >= 0) {
            K(a, c) += 1.0 / b.v;
            K(c, a) += 1.0 / b.v;
        }
    }
    if (n > 0) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
        for (long i = 0; i < n; ++i) count += es.eigenvalues()(i) > 0.0;
    }
    return count;
}

struct Scanner {
    const MetricGraph& g;
    const Tolerances& tol;
    std::vector<Root> roots;

    [[nodiscard]] double det(double lambda) const { return secular_det(g, lambda); }

    [[nodiscard]] double x_tol(double a, double b) const {
        return std::max(tol.root_rel * std::max(std::abs(a), std::abs(b)), 1e-15);
    }

    /// Splits [a, b] on the eigenvalue count until each piece holds one
    /// simple root bracketed by a determinant sign change, or a cluster
    /// narrower than the root tolerance.
    void isolate(double a, double b, std::size_t na, std::size_t nb) {
        if (nb <= na) return;
        const std::size_t m = nb - na;
        if (m == 1) {
            const double fa = det(a);
            const double fb = det(b);
            if (fa != 0.0 && fb != 0.0 && sign_of(fa) != sign_of(fb)) {
                roots.push_back({bisect_sign([&](double l) { return det(l); }, a, b, fa, x_tol(a, b)), 1});
                return;
            }
        }
        if (b - a <= x_tol(a, b)) {
            roots.push_back({0.5 * (a + b), m});
            return;
        }
        const double mid = 0.5 * (a + b);
        const std::size_t nm = std::clamp(eigenvalue_count(g, mid), na, nb);
        isolate(a, mid, na, nm);
        isolate(mid, b, nm, nb);
    }
};

}  // namespace detail

/// Lowest `count` eigenvalues (with multiplicity) and their eigenfunctions.
///
/// The scan runs in t = sqrt(lambda - lambda_ref) with step pi / (8 |Gamma|).
/// Each step is bracketed by the exact eigenvalue count, so close pairs that
/// leave the secular determinant's sign unchanged are still found; brackets
/// holding one root are refined by bisection on the determinant, clusters by
/// bisection on the count down to the root tolerance.
inline Spectrum scan_spectrum(const MetricGraph& g, std::size_t count, const Tolerances& tol = {}) {
    detail::require_valid(g);
    if (count == 0) throw InvalidArgument("scan_spectrum needs count >= 1");
    const double min_w = g.min_potential();
    bool has_dirichlet = false;
    for (auto v : g.boundary_vertices()) has_dirichlet |= g.condition(v) == BoundaryCondition::dirichlet;
    const bool negative_window = min_w < 0.0 || g.has_neumann() || !has_dirichlet;
    const double lambda_ref = negative_window ? std::min(min_w, 0.0) - 1.0 : std::max(min_w, 0.0);
    const double total = g.total_length();
    const double dt = std::numbers::pi / (8.0 * total);
    const double weyl_k = 2.0 * std::numbers::pi *
                          static_cast<double>(count + g.vertices.size() + g.edges.size() + 2) / total;
    const double t_max = std::sqrt(weyl_k * weyl_k + g.max_abs_potential() - min_w + 1.0);

    detail::Scanner sc{g, tol, {}};
    auto lam = [&](double t) { return lambda_ref + t * t; };
    // grid offset by an irrational fraction of the step so that grid points
    // avoid the commensurate values where eigenvalues and edge poles sit
    constexpr double phase = 0.3819660112501051;
    double t_prev = phase * dt;
    std::size_t n_prev = detail::eigenvalue_count(g, lam(t_prev));
    if (n_prev > 0) sc.isolate(lambda_ref, lam(t_prev), 0, n_prev);
    double t = t_prev;
    while (n_prev < count) {
        t += dt;
        if (t > t_max) {
            throw SpectralError("found " + std::to_string(n_prev) + " of " + std::to_string(count) +
                                " eigenvalues in window [" + std::to_string(lambda_ref) + ", " +
                                std::to_string(lam(t_max)) + "]");
        }
        const std::size_t n = std::max(detail::eigenvalue_count(g, lam(t)), n_prev);
        sc.isolate(lam(t_prev), lam(t), n_prev, n);
        t_prev = t;
        n_prev = n;
    }

    Spectrum spec;
    spec.graph = std::make_shared<const MetricGraph>(g);
    spec.lambda_start = lambda_ref;
    spec.lambda_end = lam(t);
    for (const auto& r : sc.roots) {
        for (auto& p : detail::recover_pairs(g, r.lambda, r.multiplicity)) {
            if (spec.pairs.size() == count) break;
            p.index = spec.pairs.size() + 1;
            spec.pairs.push_back(std::move(p));
        }
    }
    return spec;
}

struct PairGenericity {
    std::size_t index = 0;
    double lambda = 0.0;
    std::optional<double> min_inner_ratio;  // empty when there are no inner vertices
    std::optional<double> gap_next;
};

struct GenericityReport {
    std::vector<PairGenericity> pairs;
    std::optional<double> min_inner_ratio;
    std::optional<double> min_gap;
    double tol_ratio = 0.0;
    double tol_gap = 0.0;
    bool generic = false;
    bool neumann_present = false;  // outside the proven setting of the nodal bounds
};

/// Genericity diagnostics for the pairs of a computed spectrum. The gap of
/// the last pair is only known if the spectrum holds one more eigenvalue.
inline GenericityReport genericity_check(const Spectrum& spec, std::size_t count, const Tolerances& tol = {}) {
    const auto& g = *spec.graph;
    count = std::min(count, spec.size());
    GenericityReport rep;
    rep.neumann_present = g.has_neumann();
    rep.tol_ratio = tol.generic_ratio;
    const double lambda_m = count ? spec.pairs[count - 1].lambda : 0.0;
    rep.tol_gap = tol.generic_gap_rel * std::max(std::abs(lambda_m), 1.0);
    const auto inner = g.inner_vertices();
    bool ok = true;
    for (std::size_t i = 0; i < count; ++i) {
        const auto& p = spec.pairs[i];
        PairGenericity pg;
        pg.index = p.index;
        pg.lambda = p.lambda;
        if (!inner.empty()) {
            const double fs = sup_norm(g, p);
            double r = std::numeric_limits<double>::infinity();
            for (auto v : inner) r = std::min(r, std::abs(vertex_value(g, p, v)) / fs);
            pg.min_inner_ratio = r;
            rep.min_inner_ratio = std::min(rep.min_inner_ratio.value_or(r), r);
            ok &= r > rep.tol_ratio;
        }
        if (i + 1 < spec.size()) {
            const double gap = spec.pairs[i + 1].lambda - p.lambda;
            pg.gap_next = gap;
            rep.min_gap = std::min(rep.min_gap.value_or(gap), gap);
            ok &= gap > rep.tol_gap;
        }
        rep.pairs.push_back(pg);
    }
    rep.generic = ok;
    return rep;
}

/// Computes count + 1 eigenvalues so that the gap above lambda_M is checked too.
inline GenericityReport genericity_check(const MetricGraph& g, std::size_t count, const Tolerances& tol = {}) {
    const auto spec = scan_spectrum(g, count + 1, tol);
    return genericity_check(spec, count, tol);
}

}  // namespace qgraph
