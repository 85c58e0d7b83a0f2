#pragma once

// Single-fiber optimal transport: the closed-form monotone solver on the line,
// the exact LP solver with dual potentials for arbitrary fiber spaces, and
// c-transforms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <tuple>
#include <vector>

#include "fiberot/errors.hpp"
#include "fiberot/measure.hpp"
#include "fiberot/network_simplex.hpp"

namespace fiberot {

struct PlanEntry {
    std::size_t row;
    std::size_t col;
    double mass;
};

// Coupling between two discrete measures together with its p-cost.
struct TransportPlan {
    std::vector<Point> row_points;
    std::vector<Point> col_points;
    std::vector<PlanEntry> entries;
    double cost = 0.0;

    // Marginal and cost-consistency checks; both tolerances are part of the
    // type's contract.
    void validate(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FiberSpace& space,
                  double p) const {
        std::vector<long double> row_sum(row_points.size(), 0.0L);
        std::vector<long double> col_sum(col_points.size(), 0.0L);
        long double total = 0.0L;
        for (const auto& e : entries) {
            if (e.mass < 0.0) throw ValidationError("transport plan has a negative mass entry");
            row_sum[e.row] += e.mass;
            col_sum[e.col] += e.mass;
            total += (long double)e.mass * pow_p(space.distance(row_points[e.row], col_points[e.col]), p);
        }
        for (std::size_t i = 0; i < row_sum.size(); ++i)
            if (std::abs((double)row_sum[i] - mu.weight(i)) > 1e-10)
                throw ValidationError("transport plan row marginal differs from mu");
        for (std::size_t j = 0; j < col_sum.size(); ++j)
            if (std::abs((double)col_sum[j] - nu.weight(j)) > 1e-10)
                throw ValidationError("transport plan column marginal differs from nu");
        if (std::abs((double)total - cost) > 1e-10)
            throw ValidationError("transport plan cost is inconsistent with its entries");
    }
};

// Dual potentials in the sign convention -phi(t) - psi(s) <= d(t,s)^p.
struct DualPair {
    std::vector<double> phi; // on mu's support
    std::vector<double> psi; // on nu's support

    double max_violation(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         const FiberSpace& space, double p) const {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mu.size(); ++i)
            for (std::size_t j = 0; j < nu.size(); ++j)
                worst = std::max(worst, -phi[i] - psi[j] - pow_p(space.distance(mu.point(i), nu.point(j)), p));
        return worst;
    }

    double value(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < mu.size(); ++i) acc -= (long double)mu.weight(i) * phi[i];
        for (std::size_t j = 0; j < nu.size(); ++j) acc -= (long double)nu.weight(j) * psi[j];
        return static_cast<double>(acc);
    }
};

inline void check_exponent(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw ValidationError("exponent p must be a finite real >= 1");
}

namespace detail {

// Indices of the support sorted by position, ties kept in input order.
inline std::vector<std::size_t> sorted_order_1d(const DiscreteMeasure& mu) {
    std::vector<std::size_t> idx(mu.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return mu.point(a)[0] < mu.point(b)[0]; });
    return idx;
}

// North-west-corner sweep over the sorted supports. The monotone coupling it
// produces is optimal on the line for costs |t-s|^p with p >= 1.
template <bool WantPlan>
inline std::pair<double, std::vector<PlanEntry>> monotone_sweep(const DiscreteMeasure& mu,
                                                                const DiscreteMeasure& nu, double p) {
    const auto oi = sorted_order_1d(mu);
    const auto oj = sorted_order_1d(nu);
    std::vector<PlanEntry> entries;
    if constexpr (WantPlan) entries.reserve(mu.size() + nu.size());
    long double cost = 0.0L;
    std::size_t i = 0, j = 0;
    double ra = mu.weight(oi[0]);
    double rb = nu.weight(oj[0]);
    for (;;) {
        const double step = std::min(ra, rb);
        if (step > 0.0) {
            cost += (long double)step * pow_p(std::abs(mu.point(oi[i])[0] - nu.point(oj[j])[0]), p);
            if constexpr (WantPlan) entries.push_back({oi[i], oj[j], step});
        }
        ra -= step;
        rb -= step;
        const bool more_i = i + 1 < mu.size();
        const bool more_j = j + 1 < nu.size();
        if (ra <= rb && more_i) {
            ra = mu.weight(oi[++i]);
        } else if (more_j) {
            rb = nu.weight(oj[++j]);
        } else if (more_i) {
            ra = mu.weight(oi[++i]);
        } else {
            break;
        }
    }
    return {static_cast<double>(cost), std::move(entries)};
}

} // namespace detail

// Optimal p-cost between 1D measures without materializing the plan.
inline double transport_cost_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    check_exponent(p);
    return detail::monotone_sweep<false>(mu, nu, p).first;
}

// Monotone optimal coupling on the line. Returns the p-cost (not the distance).
inline std::pair<double, TransportPlan> transport_1d(const DiscreteMeasure& mu,
                                                     const DiscreteMeasure& nu, double p) {
    check_exponent(p);
    auto [cost, entries] = detail::monotone_sweep<true>(mu, nu, p);
    TransportPlan plan;
    plan.row_points = mu.points();
    plan.col_points = nu.points();
    plan.entries = std::move(entries);
    plan.cost = cost;
    return {cost, std::move(plan)};
}

inline constexpr std::size_t kDefaultEntryCap = 1000000;

struct LpSolution {
    double cost = 0.0;
    TransportPlan plan;
    DualPair duals;
};

// Exact optimal coupling plus optimal dual potentials for a general fiber
// space. Primal and dual values agree to rounding; duals are shifted so that
// psi vanishes at nu's first support point.
inline LpSolution transport_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const FiberSpace& space, double p,
                               std::size_t entry_cap = kDefaultEntryCap) {
    check_exponent(p);
    const std::size_t m = mu.size();
    const std::size_t n = nu.size();
    if (m * n > entry_cap) throw SizeCapExceeded(m, n, entry_cap);

    std::vector<FlowArc> arcs;
    arcs.reserve(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            arcs.push_back({(std::uint32_t)i, (std::uint32_t)j,
                            pow_p(space.distance(mu.point(i), nu.point(j)), p)});
    FlowResult flow = solve_transport(mu.weights(), nu.weights(), arcs);

    LpSolution out;
    out.cost = flow.cost;
    out.plan.row_points = mu.points();
    out.plan.col_points = nu.points();
    out.plan.cost = flow.cost;
    for (std::size_t e = 0; e < arcs.size(); ++e)
        if (flow.flow[e] > 0.0)
            out.plan.entries.push_back({arcs[e].row, arcs[e].col, flow.flow[e]});

    // classical potentials u+v <= c become (phi, psi) = (-u, -v)
    out.duals.phi.resize(m);
    out.duals.psi.resize(n);
    const double shift = -flow.v[0];
    for (std::size_t i = 0; i < m; ++i) out.duals.phi[i] = -flow.u[i] + shift;
    for (std::size_t j = 0; j < n; ++j) out.duals.psi[j] = -flow.v[j] - shift;
    return out;
}

// (S_{lambda,p} phi)(s) = max over t in the source support of
// -lambda*d(t,s)^p - phi(t), evaluated on the target support.
inline std::vector<double> c_transform(const std::vector<double>& phi,
                                       const std::vector<Point>& source,
                                       const std::vector<Point>& target, const FiberSpace& space,
                                       double p, double lambda = 1.0) {
    check_exponent(p);
    if (!(lambda > 0.0) || lambda > 1.0) throw ValidationError("transform scale lambda must lie in (0,1]");
    if (phi.size() != source.size()) throw ValidationError("transform table does not match the source support");
    std::vector<double> out(target.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < target.size(); ++s)
        for (std::size_t t = 0; t < source.size(); ++t)
            out[s] = std::max(out[s], -lambda * pow_p(space.distance(source[t], target[s]), p) - phi[t]);
    return out;
}

namespace detail {

// Deterministic total order on measures (bit patterns of support then weights).
// The optimal cost is symmetric in its arguments; evaluating every pair in a
// canonical orientation makes the computed float symmetric too.
inline bool canonical_before(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    PointBitLess less;
    const std::size_t k = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < k; ++i) {
        if (less(a.point(i), b.point(i))) return true;
        if (less(b.point(i), a.point(i))) return false;
        if (a.weight(i) != b.weight(i)) return a.weight(i) < b.weight(i);
    }
    return a.size() < b.size();
}

} // namespace detail

// mk_p distance between two measures on one fiber. Dispatches to the monotone
// solver on the line and to the LP elsewhere.
inline double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                          const FiberSpace& space, double p,
                          std::size_t entry_cap = kDefaultEntryCap) {
    check_exponent(p);
    double cost;
    if (space.kind() == FiberKind::Real1D) {
        cost = transport_cost_1d(mu, nu, p);
    } else if (detail::canonical_before(nu, mu)) {
        cost = transport_lp(nu, mu, space, p, entry_cap).cost;
    } else {
        cost = transport_lp(mu, nu, space, p, entry_cap).cost;
    }
    return std::pow(cost, 1.0 / p);
}

} // namespace fiberot
