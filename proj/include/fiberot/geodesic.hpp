#pragma once

// Constant-speed interpolation between fibered measures sharing a base.
//
// For p > 1 each fiber is interpolated by displacement: every atom (t, s, mass)
// of an optimal plan contributes mass at t + tau * (s - t). This needs convex
// combinations of fiber points, so it is restricted to Real1D and EuclideanD
// fibers. For p = 1 the linear mixture (1 - tau) m0 + tau m1 is itself a
// minimal geodesic on any fiber space, so no plan is needed.

#include <cstddef>
#include <utility>
#include <vector>

#include "fiberot/errors.hpp"
#include "fiberot/measure.hpp"
#include "fiberot/metric.hpp"
#include "fiberot/transport.hpp"

namespace fiberot {

class GeodesicPath {
  public:
    // Solves the per-fiber couplings once (p > 1 only) so that repeated
    // evaluation does not re-run the transport solver.
    static GeodesicPath make(FiberedMeasure m0, FiberedMeasure m1, double p,
                             std::size_t entry_cap = kDefaultEntryCap) {
        check_exponent(p);
        check_shared_base(m0, m1);
        GeodesicPath path(std::move(m0), std::move(m1), p);
        if (p > 1.0) {
            if (path.m0_.space().kind() == FiberKind::ExplicitMatrix)
                throw NonGeodesicFiberSpace();
            for (std::size_t i = 0; i < path.m0_.fiber_count(); ++i) {
                if (path.m0_.space().kind() == FiberKind::Real1D) {
                    path.plans_.push_back(transport_1d(path.m0_.fiber(i), path.m1_.fiber(i), p).second);
                } else {
                    path.plans_.push_back(
                        transport_lp(path.m0_.fiber(i), path.m1_.fiber(i), path.m0_.space(), p, entry_cap).plan);
                }
            }
        }
        return path;
    }

    const FiberedMeasure& start() const { return m0_; }
    const FiberedMeasure& end() const { return m1_; }
    double exponent() const { return p_; }

    // Empty when p = 1: mixtures do not consult a coupling.
    const std::vector<TransportPlan>& plans() const { return plans_; }

    FiberedMeasure at(double tau) const {
        if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("interpolation time must lie in [0, 1]");
        if (tau == 0.0) return m0_;
        if (tau == 1.0) return m1_;
        std::vector<DiscreteMeasure> fibers;
        fibers.reserve(m0_.fiber_count());
        for (std::size_t i = 0; i < m0_.fiber_count(); ++i) {
            if (p_ == 1.0) {
                std::vector<Point> pts;
                std::vector<double> wts;
                for (std::size_t a = 0; a < m0_.fiber(i).size(); ++a) {
                    pts.push_back(m0_.fiber(i).point(a));
                    wts.push_back((1.0 - tau) * m0_.fiber(i).weight(a));
                }
                for (std::size_t a = 0; a < m1_.fiber(i).size(); ++a) {
                    pts.push_back(m1_.fiber(i).point(a));
                    wts.push_back(tau * m1_.fiber(i).weight(a));
                }
                fibers.push_back(make_measure(m0_.space(), std::move(pts), std::move(wts)));
            } else {
                const auto& plan = plans_[i];
                std::vector<Point> pts;
                std::vector<double> wts;
                for (const auto& e : plan.entries) {
                    const Point& t = plan.row_points[e.row];
                    const Point& s = plan.col_points[e.col];
                    Point moved(t.size());
                    // t + tau (s - t): keeps atoms with t == s exactly in place
                    for (std::size_t c = 0; c < t.size(); ++c) moved[c] = t[c] + tau * (s[c] - t[c]);
                    pts.push_back(std::move(moved));
                    wts.push_back(e.mass);
                }
                fibers.push_back(make_measure(m0_.space(), std::move(pts), std::move(wts)));
            }
        }
        return FiberedMeasure::make(m0_.base(), m0_.space(), std::move(fibers), m0_.chart_id());
    }

  private:
    GeodesicPath(FiberedMeasure m0, FiberedMeasure m1, double p)
        : m0_(std::move(m0)), m1_(std::move(m1)), p_(p) {}

    FiberedMeasure m0_;
    FiberedMeasure m1_;
    double p_;
    std::vector<TransportPlan> plans_;
};

inline FiberedMeasure geodesic_point(const FiberedMeasure& m0, const FiberedMeasure& m1, double tau,
                                     double p, std::size_t entry_cap = kDefaultEntryCap) {
    return GeodesicPath::make(m0, m1, p, entry_cap).at(tau);
}

// Max over time pairs of | d(rho_t1, rho_t2) - |t1 - t2| d(m0, m1) |. Zero up
// to solver tolerance exactly when the path moves at constant speed.
inline double verify_geodesic(const FiberedMeasure& m0, const FiberedMeasure& m1,
                              const std::vector<double>& taus, double p, double q,
                              std::size_t entry_cap = kDefaultEntryCap) {
    auto path = GeodesicPath::make(m0, m1, p, entry_cap);
    const double total = fibered_distance(m0, m1, p, q, entry_cap).value;
    std::vector<FiberedMeasure> snapshots;
    snapshots.reserve(taus.size());
    for (double tau : taus) snapshots.push_back(path.at(tau));
    double worst = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i)
        for (std::size_t j = i + 1; j < taus.size(); ++j) {
            const double d = fibered_distance(snapshots[i], snapshots[j], p, q, entry_cap).value;
            const double expected = std::abs(taus[i] - taus[j]) * total;
            worst = std::max(worst, std::abs(d - expected));
        }
    return worst;
}

} // namespace fiberot
