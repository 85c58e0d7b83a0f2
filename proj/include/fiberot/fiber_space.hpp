#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fiberot/errors.hpp"

namespace fiberot {

// A fiber point. Interpretation depends on the fiber space kind:
// Real1D -> size 1, EuclideanD -> size d, ExplicitMatrix -> size 1 holding an integer site index.
using Point = std::vector<double>;

enum class FiberKind { Real1D, EuclideanD, ExplicitMatrix };

inline Point real_point(double t) { return Point{t}; }
inline Point site_point(std::size_t i) { return Point{static_cast<double>(i)}; }

// Metric structure of the fiber Y together with the basepoint y0.
// Immutable after construction; construction validates the metric axioms
// for explicit distance matrices.
class FiberSpace {
  public:
    static FiberSpace real1d(double y0 = 0.0) {
        FiberSpace s;
        s.kind_ = FiberKind::Real1D;
        s.dim_ = 1;
        s.y0_ = Point{y0};
        return s;
    }

    static FiberSpace euclidean(std::size_t dim, Point y0) {
        if (dim == 0) throw ValidationError("euclidean fiber space needs dimension >= 1");
        if (y0.size() != dim) throw DimensionMismatch(dim, y0.size());
        FiberSpace s;
        s.kind_ = FiberKind::EuclideanD;
        s.dim_ = dim;
        s.y0_ = std::move(y0);
        s.check_point(s.y0_);
        return s;
    }

    static FiberSpace matrix(std::vector<std::vector<double>> distances, std::size_t y0_index) {
        const std::size_t n = distances.size();
        if (n == 0) throw ValidationError("distance matrix is empty");
        for (const auto& row : distances)
            if (row.size() != n) throw ValidationError("distance matrix is not square");
        for (std::size_t i = 0; i < n; ++i) {
            if (distances[i][i] != 0.0) throw ValidationError("distance matrix has nonzero diagonal entry");
            for (std::size_t j = 0; j < n; ++j) {
                const double d = distances[i][j];
                if (!std::isfinite(d) || d < 0.0) throw ValidationError("distance matrix entry is negative or not finite");
                if (distances[j][i] != d) throw ValidationError("distance matrix is not symmetric");
            }
        }
        // Triangle inequality with a small slack for user-entered rounded values.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    if (distances[i][j] > distances[i][k] + distances[k][j] + 1e-12)
                        throw ValidationError("distance matrix violates the triangle inequality at (" +
                                              std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k) + ")");
        if (y0_index >= n) throw ValidationError("basepoint index out of range");
        FiberSpace s;
        s.kind_ = FiberKind::ExplicitMatrix;
        s.dim_ = 1;
        s.dist_ = std::move(distances);
        s.y0_ = site_point(y0_index);
        return s;
    }

    FiberKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    const Point& basepoint() const { return y0_; }
    std::size_t site_count() const { return dist_.size(); }
    const std::vector<std::vector<double>>& distance_matrix() const { return dist_; }

    // Throws DimensionMismatch / ValidationError if p is not a point of this space.
    void check_point(const Point& p) const {
        switch (kind_) {
            case FiberKind::Real1D:
                if (p.size() != 1) throw DimensionMismatch(1, p.size());
                break;
            case FiberKind::EuclideanD:
                if (p.size() != dim_) throw DimensionMismatch(dim_, p.size());
                break;
            case FiberKind::ExplicitMatrix: {
                if (p.size() != 1) throw DimensionMismatch(1, p.size());
                const double v = p[0];
                if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(dist_.size()))
                    throw ValidationError("site index " + std::to_string(v) + " is not a vertex of the distance matrix");
                break;
            }
        }
        for (double c : p)
            if (!std::isfinite(c)) throw ValidationError("point has a non-finite coordinate");
    }

    double distance(const Point& a, const Point& b) const {
        switch (kind_) {
            case FiberKind::Real1D:
                return std::abs(a[0] - b[0]);
            case FiberKind::EuclideanD: {
                double acc = 0.0;
                for (std::size_t i = 0; i < dim_; ++i) {
                    const double d = a[i] - b[i];
                    acc += d * d;
                }
                return std::sqrt(acc);
            }
            case FiberKind::ExplicitMatrix:
                return dist_[static_cast<std::size_t>(a[0])][static_cast<std::size_t>(b[0])];
        }
        return 0.0; // unreachable
    }

    bool same_structure(const FiberSpace& other) const {
        return kind_ == other.kind_ && dim_ == other.dim_ && dist_ == other.dist_ && y0_ == other.y0_;
    }

  private:
    FiberSpace() = default;
    FiberKind kind_ = FiberKind::Real1D;
    std::size_t dim_ = 1;
    std::vector<std::vector<double>> dist_;
    Point y0_;
};

inline double pow_p(double base, double p) {
    if (p == 1.0) return base;
    if (p == 2.0) return base * base;
    return std::pow(base, p);
}

// An isometry of a fiber space, one per base atom in a ChartAtlas.
// Real1D: t -> sign*(t - center) + center with sign in {-1,+1}.
// EuclideanD: x -> Q x with Q orthogonal.
// ExplicitMatrix: a distance-preserving permutation of sites.
class FiberIsometry {
  public:
    static FiberIsometry identity() {
        FiberIsometry m;
        m.kind_ = Kind::Identity;
        return m;
    }

    static FiberIsometry reflection(double center, int sign) {
        if (sign != 1 && sign != -1) throw ValidationError("reflection sign must be +1 or -1");
        FiberIsometry m;
        m.kind_ = Kind::Reflect;
        m.center_ = center;
        m.sign_ = sign;
        return m;
    }

    static FiberIsometry orthogonal(std::vector<std::vector<double>> q) {
        const std::size_t d = q.size();
        for (const auto& row : q)
            if (row.size() != d) throw ValidationError("isometry matrix is not square");
        // Q^T Q = I within 1e-12; rotation matrices built from cos/sin carry rounding.
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += q[k][i] * q[k][j];
                const double want = (i == j) ? 1.0 : 0.0;
                if (std::abs(acc - want) > 1e-12)
                    throw ValidationError("isometry matrix is not orthogonal");
            }
        FiberIsometry m;
        m.kind_ = Kind::Orthogonal;
        m.matrix_ = std::move(q);
        return m;
    }

    static FiberIsometry permutation(std::vector<std::size_t> perm, const FiberSpace& space) {
        if (space.kind() != FiberKind::ExplicitMatrix)
            throw ValidationError("permutation isometries apply to explicit-matrix fiber spaces only");
        const std::size_t n = space.site_count();
        if (perm.size() != n) throw ValidationError("permutation size does not match the distance matrix");
        std::vector<bool> seen(n, false);
        for (std::size_t v : perm) {
            if (v >= n || seen[v]) throw ValidationError("not a permutation of the site set");
            seen[v] = true;
        }
        const auto& d = space.distance_matrix();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (d[perm[i]][perm[j]] != d[i][j])
                    throw ValidationError("permutation does not preserve the distance matrix");
        FiberIsometry m;
        m.kind_ = Kind::Permute;
        m.perm_ = std::move(perm);
        return m;
    }

    Point apply(const Point& p) const {
        switch (kind_) {
            case Kind::Identity:
                return p;
            case Kind::Reflect:
                return Point{sign_ * (p[0] - center_) + center_};
            case Kind::Orthogonal: {
                const std::size_t d = matrix_.size();
                Point out(d, 0.0);
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j) out[i] += matrix_[i][j] * p[j];
                return out;
            }
            case Kind::Permute:
                return site_point(perm_[static_cast<std::size_t>(p[0])]);
        }
        return p; // unreachable
    }

    // Matching check: an isometry built for one space kind must not be applied to another.
    bool fits(const FiberSpace& space) const {
        switch (kind_) {
            case Kind::Identity: return true;
            case Kind::Reflect: return space.kind() == FiberKind::Real1D;
            case Kind::Orthogonal: return space.kind() == FiberKind::EuclideanD && matrix_.size() == space.dim();
            case Kind::Permute: return space.kind() == FiberKind::ExplicitMatrix && perm_.size() == space.site_count();
        }
        return false;
    }

  private:
    enum class Kind { Identity, Reflect, Orthogonal, Permute };
    FiberIsometry() = default;
    Kind kind_ = Kind::Identity;
    double center_ = 0.0;
    int sign_ = 1;
    std::vector<std::vector<double>> matrix_;
    std::vector<std::size_t> perm_;
};

} // namespace fiberot
