#pragma once

// Sliced distances on Euclidean point clouds: project both measures onto a
// finite set of directions, transport on each line, and aggregate the line
// distances. slice_embed realizes the same data as a fibered measure over the
// direction set, and the two computations agree; see sliced_mk.
//
// A finite direction set can miss differences between distinct measures, so
// the sliced distance is a pseudometric only.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fiberot/errors.hpp"
#include "fiberot/measure.hpp"
#include "fiberot/metric.hpp"
#include "fiberot/parallel.hpp"
#include "fiberot/transport.hpp"

namespace fiberot {

class DirectionSet {
public:
    static DirectionSet make(std::vector<Point> directions, std::vector<double> weights) {
        if (directions.empty()) throw ValidationError("a direction set needs at least one direction");
        if (weights.size() != directions.size())
            throw ValidationError("direction and weight counts differ");
        const std::size_t d = directions.front().size();
        if (d == 0) throw ValidationError("directions must have positive dimension");
        long double total = 0.0L;
        for (std::size_t j = 0; j < directions.size(); ++j) {
            if (directions[j].size() != d) throw DimensionMismatch(d, directions[j].size());
            long double sq = 0.0L;
            for (double c : directions[j]) sq += (long double)c * (long double)c;
            if (std::abs((double)sq - 1.0) > 2e-12)
                throw ValidationError("direction " + std::to_string(j) + " is not a unit vector");
            if (!(weights[j] > 0.0) || !std::isfinite(weights[j]))
                throw ValidationError("direction weights must be positive");
            total += (long double)weights[j];
        }
        if (std::abs((double)total - 1.0) > 1e-12)
            throw ValidationError("direction weights must sum to one");
        return DirectionSet(std::move(directions), std::move(weights));
    }

    const std::vector<Point>& directions() const { return dirs_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return dirs_.size(); }
    std::size_t dim() const { return dirs_.front().size(); }

private:
    DirectionSet(std::vector<Point> dirs, std::vector<double> weights)
        : dirs_(std::move(dirs)), weights_(std::move(weights)) {}

    std::vector<Point> dirs_;
    std::vector<double> weights_;
};

inline DirectionSet uniform_circle_directions(std::size_t count) {
    if (count == 0) throw ValidationError("a direction set needs at least one direction");
    std::vector<Point> dirs;
    std::vector<double> weights(count, 1.0 / (double)count);
    for (std::size_t j = 0; j < count; ++j) {
        const double theta = 2.0 * M_PI * (double)j / (double)count;
        dirs.push_back({std::cos(theta), std::sin(theta)});
    }
    return DirectionSet::make(std::move(dirs), std::move(weights));
}

// Gaussian sampling normalized to the sphere. The uniform variates and the
// Box-Muller transform are spelled out so a seed pins the set bit for bit.
inline DirectionSet random_sphere_directions(std::size_t dim, std::size_t count,
                                             std::uint64_t seed) {
    if (dim == 0) throw ValidationError("directions must have positive dimension");
    if (count == 0) throw ValidationError("a direction set needs at least one direction");
    std::mt19937_64 rng(seed);
    const auto unit_open = [&rng]() {
        return ((double)(rng() >> 11) + 1.0) * 0x1.0p-53; // in (0, 1]
    };
    const auto gaussian = [&]() {
        const double u = unit_open();
        const double v = unit_open();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
    };
    std::vector<Point> dirs;
    std::vector<double> weights(count, 1.0 / (double)count);
    while (dirs.size() < count) {
        Point w(dim);
        long double sq = 0.0L;
        for (auto& c : w) {
            c = gaussian();
            sq += (long double)c * (long double)c;
        }
        const double norm = std::sqrt((double)sq);
        if (norm < 1e-9) continue;
        for (auto& c : w) c /= norm;
        dirs.push_back(std::move(w));
    }
    return DirectionSet::make(std::move(dirs), std::move(weights));
}

namespace detail {

inline void check_sliceable(const FiberSpace& space, const DirectionSet& dirs) {
    if (space.kind() != FiberKind::EuclideanD)
        throw UnsupportedFiberKind("slicing projects Euclidean point clouds only");
    if (space.dim() != dirs.dim()) throw DimensionMismatch(dirs.dim(), space.dim());
}

inline DiscreteMeasure project_line(const DiscreteMeasure& mu, const Point& omega) {
    std::vector<Point> pts;
    pts.reserve(mu.size());
    for (const auto& x : mu.points()) {
        if (x.size() != omega.size()) throw DimensionMismatch(omega.size(), x.size());
        long double dot = 0.0L;
        for (std::size_t c = 0; c < omega.size(); ++c)
            dot += (long double)x[c] * (long double)omega[c];
        pts.push_back(real_point((double)dot));
    }
    return make_measure(FiberSpace::real1d(), std::move(pts), mu.weights());
}

} // namespace detail

inline FiberedMeasure slice_embed(const DiscreteMeasure& mu, const FiberSpace& space,
                                  const DirectionSet& dirs) {
    detail::check_sliceable(space, dirs);
    std::vector<std::string> labels;
    labels.reserve(dirs.size());
    for (std::size_t j = 0; j < dirs.size(); ++j) labels.push_back("dir" + std::to_string(j));
    auto base = BaseMeasure::make(std::move(labels), dirs.weights());
    std::vector<DiscreteMeasure> fibers;
    fibers.reserve(dirs.size());
    for (const auto& omega : dirs.directions())
        fibers.push_back(detail::project_line(mu, omega));
    return FiberedMeasure::make(std::move(base), FiberSpace::real1d(), std::move(fibers));
}

// Line-by-line transport aggregated directly, sharing only the 1D transport
// primitive with the fibered path; cross-checked against
// fibered_distance(slice_embed(mu), slice_embed(nu)) in the tests.
inline double sliced_mk(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                        const FiberSpace& space, double p, double q, const DirectionSet& dirs,
                        int threads = 0) {
    detail::check_sliceable(space, dirs);
    check_exponent(p);
    check_q(q);
    std::vector<double> line(dirs.size());
    parallel_for(
        dirs.size(),
        [&](std::size_t j) {
            line[j] = std::pow(transport_cost_1d(detail::project_line(mu, dirs.directions()[j]),
                                                 detail::project_line(nu, dirs.directions()[j]), p),
                               1.0 / p);
        },
        threads);
    if (q == kInfiniteQ) {
        double worst = 0.0;
        for (double v : line) worst = std::max(worst, v);
        return worst;
    }
    long double acc = 0.0L;
    for (std::size_t j = 0; j < dirs.size(); ++j)
        acc += (long double)dirs.weights()[j] * (long double)std::pow(line[j], q);
    return std::pow((double)acc, 1.0 / q);
}

} // namespace fiberot
