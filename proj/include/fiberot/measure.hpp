#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fiberot/errors.hpp"
#include "fiberot/fiber_space.hpp"

namespace fiberot {

// Orders points by the bit patterns of their coordinates. Used for duplicate
// detection: merging happens at exact bit equality only, never for nearby points.
struct PointBitLess {
    bool operator()(const Point& a, const Point& b) const {
        if (a.size() != b.size()) return a.size() < b.size();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto x = std::bit_cast<std::uint64_t>(a[i]);
            const auto y = std::bit_cast<std::uint64_t>(b[i]);
            if (x != y) return x < y;
        }
        return false;
    }
};

// Finitely supported probability measure on a fiber space. Weights sum to 1
// within 1e-12 and every stored weight is strictly positive.
class DiscreteMeasure {
  public:
    const std::vector<Point>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return points_.size(); }
    const Point& point(std::size_t i) const { return points_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }

    bool operator==(const DiscreteMeasure& other) const {
        return points_ == other.points_ && weights_ == other.weights_;
    }

    // Trusts that weights already sum to 1 and points are distinct; checks the
    // cheap invariants only. For normalizing, merging construction use
    // make_measure below.
    static DiscreteMeasure assemble(std::vector<Point> points, std::vector<double> weights) {
        if (points.size() != weights.size())
            throw ValidationError("points and weights have different lengths");
        long double total = 0.0L;
        for (double w : weights) {
            if (!(w > 0.0)) throw ValidationError("assembled measure has a non-positive weight");
            total += w;
        }
        if (points.empty()) throw EmptySupport();
        if (std::abs(static_cast<double>(total) - 1.0) > 1e-12)
            throw ValidationError("assembled weights sum to " + std::to_string(static_cast<double>(total)) + ", expected 1");
        DiscreteMeasure m;
        m.points_ = std::move(points);
        m.weights_ = std::move(weights);
        return m;
    }

  private:
    DiscreteMeasure() = default;
    friend DiscreteMeasure make_measure(const FiberSpace&, std::vector<Point>, std::vector<double>);
    std::vector<Point> points_;
    std::vector<double> weights_;
};

// Builds a DiscreteMeasure from raw input: validates points against the space,
// merges bit-identical duplicates (first-occurrence order), drops zero weights,
// renormalizes to total mass 1.
inline DiscreteMeasure make_measure(const FiberSpace& space, std::vector<Point> points,
                                    std::vector<double> weights) {
    if (points.size() != weights.size())
        throw ValidationError("points and weights have different lengths");
    for (const auto& p : points) space.check_point(p);
    for (double w : weights) {
        if (!std::isfinite(w)) throw ValidationError("weight is not finite");
        if (w < 0.0) throw ValidationError("weight is negative");
    }

    std::map<Point, std::size_t, PointBitLess> seen;
    std::vector<Point> merged_points;
    std::vector<double> merged_weights;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto [it, inserted] = seen.try_emplace(points[i], merged_points.size());
        if (inserted) {
            merged_points.push_back(points[i]);
            merged_weights.push_back(weights[i]);
        } else {
            merged_weights[it->second] += weights[i];
        }
    }

    std::vector<Point> final_points;
    std::vector<double> final_weights;
    long double total = 0.0L;
    for (std::size_t i = 0; i < merged_points.size(); ++i) {
        if (merged_weights[i] > 0.0) {
            final_points.push_back(std::move(merged_points[i]));
            final_weights.push_back(merged_weights[i]);
            total += merged_weights[i];
        }
    }
    if (final_points.empty() || !(total > 0.0L)) throw EmptySupport();
    for (double& w : final_weights) w = static_cast<double>(w / total);

    DiscreteMeasure m;
    m.points_ = std::move(final_points);
    m.weights_ = std::move(final_weights);
    return m;
}

// Convenience for Real1D supports.
inline DiscreteMeasure measure_1d(std::vector<double> positions, std::vector<double> weights) {
    std::vector<Point> pts;
    pts.reserve(positions.size());
    for (double t : positions) pts.push_back(real_point(t));
    return make_measure(FiberSpace::real1d(), std::move(pts), std::move(weights));
}

inline DiscreteMeasure dirac(const FiberSpace& space, Point at) {
    return make_measure(space, {std::move(at)}, {1.0});
}

// The base: atom labels with strictly positive weights sigma summing to 1.
class BaseMeasure {
  public:
    static BaseMeasure make(std::vector<std::string> atoms, std::vector<double> weights) {
        if (atoms.size() != weights.size())
            throw ValidationError("base atoms and weights have different lengths");
        if (atoms.empty()) throw ValidationError("base measure is empty");
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (!index.try_emplace(atoms[i], i).second)
                throw ValidationError("base atom label '" + atoms[i] + "' appears twice");
        long double total = 0.0L;
        for (double w : weights) {
            if (!std::isfinite(w) || w <= 0.0)
                throw ValidationError("base weights must be strictly positive");
            total += w;
        }
        BaseMeasure b;
        b.atoms_ = std::move(atoms);
        b.weights_ = std::move(weights);
        for (double& w : b.weights_) w = static_cast<double>(w / total);
        b.index_ = std::move(index);
        return b;
    }

    const std::vector<std::string>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return atoms_.size(); }
    double sigma(std::size_t i) const { return weights_[i]; }

    std::size_t index_of(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) throw UnknownBaseLabel(label);
        return it->second;
    }

    bool operator==(const BaseMeasure& other) const {
        return atoms_ == other.atoms_ && weights_ == other.weights_;
    }

  private:
    BaseMeasure() = default;
    std::vector<std::string> atoms_;
    std::vector<double> weights_;
    std::map<std::string, std::size_t> index_;
};

inline BaseMeasure uniform_base(std::size_t n, const std::string& prefix = "w") {
    std::vector<std::string> atoms;
    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) atoms.push_back(prefix + std::to_string(i));
    return BaseMeasure::make(std::move(atoms), std::move(weights));
}

// A disintegrated measure: base marginal sigma plus one fiber conditional per
// base atom, all fibers living in one FiberSpace. chart_id names the chart the
// fiber coordinates are expressed in.
class FiberedMeasure {
  public:
    static FiberedMeasure make(BaseMeasure base, FiberSpace space,
                               std::vector<DiscreteMeasure> fibers,
                               std::string chart_id = "default") {
        if (fibers.size() != base.size())
            throw ValidationError("fiber count " + std::to_string(fibers.size()) +
                                  " does not match base atom count " + std::to_string(base.size()));
        for (const auto& f : fibers)
            for (const auto& p : f.points()) space.check_point(p);
        return FiberedMeasure(std::move(base), std::move(space), std::move(fibers), std::move(chart_id));
    }

    const BaseMeasure& base() const { return base_; }
    const FiberSpace& space() const { return space_; }
    const std::vector<DiscreteMeasure>& fibers() const { return fibers_; }
    const DiscreteMeasure& fiber(std::size_t i) const { return fibers_[i]; }
    std::size_t fiber_count() const { return fibers_.size(); }
    const std::string& chart_id() const { return chart_id_; }

  private:
    FiberedMeasure(BaseMeasure base, FiberSpace space, std::vector<DiscreteMeasure> fibers,
                   std::string chart_id)
        : base_(std::move(base)), space_(std::move(space)), fibers_(std::move(fibers)),
          chart_id_(std::move(chart_id)) {}
    BaseMeasure base_;
    FiberSpace space_;
    std::vector<DiscreteMeasure> fibers_;
    std::string chart_id_;
};

struct FlatRecord {
    std::string label;
    Point point;
    double mass = 0.0;
};

// Groups flat (label, point, mass) records into per-atom conditionals. The
// grouped masses must reproduce sigma within 1e-9; per-atom measures are then
// normalized to probability measures.
inline FiberedMeasure build_fibered(const BaseMeasure& base, const FiberSpace& space,
                                    const std::vector<FlatRecord>& records,
                                    std::string chart_id = "default") {
    std::vector<std::vector<Point>> pts(base.size());
    std::vector<std::vector<double>> wts(base.size());
    std::vector<long double> mass(base.size(), 0.0L);
    for (const auto& rec : records) {
        const std::size_t i = base.index_of(rec.label);
        if (!std::isfinite(rec.mass) || rec.mass < 0.0)
            throw ValidationError("record mass must be finite and nonnegative");
        pts[i].push_back(rec.point);
        wts[i].push_back(rec.mass);
        mass[i] += rec.mass;
    }
    std::vector<DiscreteMeasure> fibers;
    fibers.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double got = static_cast<double>(mass[i]);
        if (std::abs(got - base.sigma(i)) > 1e-9)
            throw MarginalMismatch(base.atoms()[i], base.sigma(i), got);
        fibers.push_back(make_measure(space, std::move(pts[i]), std::move(wts[i])));
    }
    return FiberedMeasure::make(base, space, std::move(fibers), std::move(chart_id));
}

// Inverse of build_fibered up to atom merging: per-atom weights scaled by sigma.
inline std::vector<FlatRecord> flatten(const FiberedMeasure& m) {
    std::vector<FlatRecord> records;
    for (std::size_t i = 0; i < m.fiber_count(); ++i) {
        const auto& f = m.fiber(i);
        for (std::size_t j = 0; j < f.size(); ++j)
            records.push_back({m.base().atoms()[i], f.point(j), m.base().sigma(i) * f.weight(j)});
    }
    return records;
}

// One isometry per base atom label.
using ChartAtlas = std::map<std::string, FiberIsometry>;

inline ChartAtlas identity_atlas(const BaseMeasure& base) {
    ChartAtlas atlas;
    for (const auto& a : base.atoms()) atlas.emplace(a, FiberIsometry::identity());
    return atlas;
}

// Pushes every fiber through its atom's isometry; weights are untouched.
// Distances between measures transformed by one atlas are unchanged.
inline FiberedMeasure apply_chart_change(const FiberedMeasure& m, const ChartAtlas& atlas,
                                         std::string new_chart_id) {
    std::vector<DiscreteMeasure> fibers;
    fibers.reserve(m.fiber_count());
    for (std::size_t i = 0; i < m.fiber_count(); ++i) {
        auto it = atlas.find(m.base().atoms()[i]);
        if (it == atlas.end()) throw MissingChartEntry(m.base().atoms()[i]);
        if (!it->second.fits(m.space()))
            throw ValidationError("atlas entry for '" + m.base().atoms()[i] + "' does not act on this fiber space");
        const auto& f = m.fiber(i);
        std::vector<Point> mapped;
        mapped.reserve(f.size());
        for (const auto& p : f.points()) mapped.push_back(it->second.apply(p));
        fibers.push_back(DiscreteMeasure::assemble(std::move(mapped), f.weights()));
    }
    return FiberedMeasure::make(m.base(), m.space(), std::move(fibers), std::move(new_chart_id));
}

// The reference disintegration: every fiber is the Dirac mass at the basepoint.
inline FiberedMeasure reference_measure(const BaseMeasure& base, const FiberSpace& space) {
    std::vector<DiscreteMeasure> fibers(base.size(), dirac(space, space.basepoint()));
    return FiberedMeasure::make(base, space, std::move(fibers));
}

// Entry i is the p-th moment of fiber i about the basepoint y0.
inline std::vector<double> moment_p(const FiberedMeasure& m, double p) {
    if (p < 1.0) throw ValidationError("moment order p must be >= 1");
    std::vector<double> out;
    out.reserve(m.fiber_count());
    for (const auto& f : m.fibers()) {
        double acc = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j)
            acc += f.weight(j) * pow_p(m.space().distance(m.space().basepoint(), f.point(j)), p);
        out.push_back(acc);
    }
    return out;
}

} // namespace fiberot
