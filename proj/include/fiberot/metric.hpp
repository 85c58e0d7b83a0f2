#pragma once

// The disintegrated (p,q) transport metric: per-fiber distances reduced in
// L^q(sigma), the joint coupling cost over the total space, and dual
// certificates (base reweighting zeta plus fiberwise potential pairs).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "fiberot/measure.hpp"
#include "fiberot/parallel.hpp"
#include "fiberot/transport.hpp"

namespace fiberot {

inline constexpr double kInfiniteQ = std::numeric_limits<double>::infinity();

inline void check_q(double q) {
    if (std::isnan(q) || q < 1.0) throw ValidationError("exponent q must be >= 1 or infinite");
}

// L^q(sigma) norm of a per-atom vector; q = infinity takes the max over atoms
// of positive sigma weight (essential supremum).
inline double lq_norm(const std::vector<double>& values, const std::vector<double>& sigma, double q) {
    check_q(q);
    if (std::isinf(q)) {
        double best = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (sigma[i] > 0.0) best = std::max(best, values[i]);
        return best;
    }
    long double acc = 0.0L;
    for (std::size_t i = 0; i < values.size(); ++i)
        acc += (long double)sigma[i] * std::pow((long double)values[i], (long double)q);
    return static_cast<double>(std::pow(acc, 1.0L / (long double)q));
}

struct DistanceReport {
    std::vector<double> per_fiber; // mk_p between matching fiber conditionals
    double value = 0.0;            // L^q(sigma) reduction of per_fiber
    double p = 1.0;
    double q = 1.0;
};

inline void check_shared_base(const FiberedMeasure& m, const FiberedMeasure& n) {
    if (!(m.base() == n.base()))
        throw BaseMismatch("measures live over different bases");
    if (!m.space().same_structure(n.space()))
        throw BaseMismatch("measures have different fiber spaces");
}

// The disintegrated distance between two measures over one base. Fiber solves
// run in parallel; the reduction is a fixed-order sum, so the result does not
// depend on the thread count.
inline DistanceReport fibered_distance(const FiberedMeasure& m, const FiberedMeasure& n, double p,
                                       double q, std::size_t entry_cap = kDefaultEntryCap,
                                       int threads = 0) {
    check_exponent(p);
    check_q(q);
    check_shared_base(m, n);
    DistanceReport report;
    report.p = p;
    report.q = q;
    report.per_fiber.assign(m.fiber_count(), 0.0);
    parallel_for(
        m.fiber_count(),
        [&](std::size_t i) {
            report.per_fiber[i] = wasserstein(m.fiber(i), n.fiber(i), m.space(), p, entry_cap);
        },
        threads);
    report.value = lq_norm(report.per_fiber, m.base().weights(), q);
    return report;
}

// One mass movement inside the joint coupling: fiber index plus atom indices
// into the two fiber supports.
struct JointEntry {
    std::size_t fiber;
    std::size_t row;
    std::size_t col;
    double mass;
};

struct JointPlan {
    std::vector<JointEntry> entries;
    double cost = 0.0;
};

// Minimal cost of a single coupling of the two flattened measures where mass
// may move only within a fiber; off-fiber pairs are simply not arcs of the
// problem (their formal cost is infinite). Equals the q=p disintegrated
// distance raised to p.
inline JointPlan coupling_cost(const FiberedMeasure& m, const FiberedMeasure& n, double p,
                               std::size_t entry_cap = kDefaultEntryCap) {
    check_exponent(p);
    check_shared_base(m, n);

    std::size_t arc_count = 0;
    for (std::size_t i = 0; i < m.fiber_count(); ++i)
        arc_count += m.fiber(i).size() * n.fiber(i).size();
    std::size_t rows = 0, cols = 0;
    for (std::size_t i = 0; i < m.fiber_count(); ++i) {
        rows += m.fiber(i).size();
        cols += n.fiber(i).size();
    }
    if (arc_count > entry_cap) throw SizeCapExceeded(rows, cols, entry_cap);

    std::vector<double> supply, demand;
    std::vector<std::size_t> row_fiber, row_atom, col_fiber, col_atom;
    std::vector<std::size_t> row_base(m.fiber_count()), col_base(m.fiber_count());
    for (std::size_t i = 0; i < m.fiber_count(); ++i) {
        row_base[i] = supply.size();
        const double sigma = m.base().sigma(i);
        for (std::size_t a = 0; a < m.fiber(i).size(); ++a) {
            supply.push_back(sigma * m.fiber(i).weight(a));
            row_fiber.push_back(i);
            row_atom.push_back(a);
        }
        col_base[i] = demand.size();
        for (std::size_t b = 0; b < n.fiber(i).size(); ++b) {
            demand.push_back(sigma * n.fiber(i).weight(b));
            col_fiber.push_back(i);
            col_atom.push_back(b);
        }
    }
    std::vector<FlowArc> arcs;
    arcs.reserve(arc_count);
    for (std::size_t i = 0; i < m.fiber_count(); ++i)
        for (std::size_t a = 0; a < m.fiber(i).size(); ++a)
            for (std::size_t b = 0; b < n.fiber(i).size(); ++b)
                arcs.push_back({static_cast<std::uint32_t>(row_base[i] + a),
                                static_cast<std::uint32_t>(col_base[i] + b),
                                pow_p(m.space().distance(m.fiber(i).point(a), n.fiber(i).point(b)), p)});

    FlowResult flow = solve_transport(supply, demand, arcs);
    JointPlan plan;
    plan.cost = flow.cost;
    for (std::size_t e = 0; e < arcs.size(); ++e)
        if (flow.flow[e] > 0.0)
            plan.entries.push_back({row_fiber[arcs[e].row], row_atom[arcs[e].row],
                                    col_atom[arcs[e].col], flow.flow[e]});
    return plan;
}

// The Hoelder-equality reweighting for a nonnegative per-atom cost vector f:
// r = 1 gives the constant 1, finite r > 1 gives (f_i/||f||_{L^r(sigma)})^(r-1),
// r = infinity concentrates on the (first) argmax atom, scaled by 1/sigma there.
// By construction ||zeta||_{L^{r'}(sigma)} <= 1 and sum_i sigma_i zeta_i f_i
// equals ||f||_{L^r(sigma)}.
inline std::vector<double> norming_weights(const std::vector<double>& f,
                                           const std::vector<double>& sigma, double r) {
    if (!(r >= 1.0)) throw ValidationError("norm exponent r must be >= 1");
    for (double v : f)
        if (v < 0.0) throw ValidationError("norming weights need a nonnegative cost vector");
    std::vector<double> zeta(f.size(), 1.0);
    if (r == 1.0) return zeta;
    bool all_zero = true;
    for (double v : f)
        if (v > 0.0) all_zero = false;
    if (all_zero) return zeta;
    if (std::isinf(r)) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < f.size(); ++i)
            if (f[i] > f[best]) best = i;
        std::fill(zeta.begin(), zeta.end(), 0.0);
        zeta[best] = 1.0 / sigma[best];
        return zeta;
    }
    const double norm = lq_norm(f, sigma, r);
    for (std::size_t i = 0; i < f.size(); ++i) zeta[i] = std::pow(f[i] / norm, r - 1.0);
    return zeta;
}

// Certificate for the dual of the disintegrated distance: a base reweighting
// zeta in the L^{r'}(sigma) unit ball (r = q/p, r' its conjugate; strict
// positivity relaxed to zeta >= 0, which reaches the same supremum) and one
// admissible potential pair per fiber.
struct DualCertificate {
    double q = 1.0;
    std::vector<double> zeta;
    std::vector<std::vector<double>> phi; // tables on m's fiber supports
    std::vector<std::vector<double>> psi; // tables on n's fiber supports
};

inline double conjugate_exponent(double r) {
    if (r == 1.0) return kInfiniteQ;
    if (std::isinf(r)) return 1.0;
    return r / (r - 1.0);
}

inline constexpr double kAdmissibilityTol = 1e-9;

// Validates a certificate and evaluates its dual objective
// -sum_i sigma_i zeta_i (int phi_i dm^i + int psi_i dn^i),
// a lower bound for the distance raised to p (weak duality).
inline double certificate_value(const FiberedMeasure& m, const FiberedMeasure& n,
                                const DualCertificate& cert, double p) {
    check_exponent(p);
    check_q(cert.q);
    if (cert.q < p) throw ValidationError("dual certificates need p <= q");
    check_shared_base(m, n);
    const std::size_t fibers = m.fiber_count();
    if (cert.zeta.size() != fibers || cert.phi.size() != fibers || cert.psi.size() != fibers)
        throw ValidationError("certificate tables do not match the base");

    // worst admissibility violation across all same-fiber support pairs
    double worst = 0.0;
    std::size_t worst_fiber = 0, worst_row = 0, worst_col = 0;
    for (std::size_t i = 0; i < fibers; ++i) {
        const auto& fm = m.fiber(i);
        const auto& fn = n.fiber(i);
        if (cert.phi[i].size() != fm.size() || cert.psi[i].size() != fn.size())
            throw ValidationError("certificate table size does not match a fiber support");
        for (std::size_t a = 0; a < fm.size(); ++a)
            for (std::size_t b = 0; b < fn.size(); ++b) {
                const double gap = -cert.phi[i][a] - cert.psi[i][b] -
                                   pow_p(m.space().distance(fm.point(a), fn.point(b)), p);
                if (gap > worst) {
                    worst = gap;
                    worst_fiber = i;
                    worst_row = a;
                    worst_col = b;
                }
            }
    }
    if (worst > kAdmissibilityTol)
        throw InadmissibleCertificate(worst_fiber, worst_row, worst_col, worst);

    for (double z : cert.zeta)
        if (z < 0.0) throw ValidationError("certificate zeta must be nonnegative");
    const double rprime = conjugate_exponent(cert.q / p);
    if (lq_norm(cert.zeta, m.base().weights(), rprime) > 1.0 + 1e-12)
        throw ValidationError("certificate zeta exceeds the dual norm ball");

    long double value = 0.0L;
    for (std::size_t i = 0; i < fibers; ++i) {
        long double inner = 0.0L;
        for (std::size_t a = 0; a < m.fiber(i).size(); ++a)
            inner += (long double)m.fiber(i).weight(a) * cert.phi[i][a];
        for (std::size_t b = 0; b < n.fiber(i).size(); ++b)
            inner += (long double)n.fiber(i).weight(b) * cert.psi[i][b];
        value -= (long double)m.base().sigma(i) * cert.zeta[i] * inner;
    }
    return static_cast<double>(value);
}

// Builds the strong-duality certificate: optimal potentials of every fiber
// LP combined with the Hoelder-equality zeta of the per-fiber costs. For
// q = infinity the same construction is exposed but the duality theory behind
// it is only stated for finite q; treat those certificates as heuristic.
inline DualCertificate assemble_certificate(const FiberedMeasure& m, const FiberedMeasure& n,
                                            double p, double q,
                                            std::size_t entry_cap = kDefaultEntryCap) {
    check_exponent(p);
    check_q(q);
    if (q < p) throw ValidationError("dual certificates need p <= q");
    check_shared_base(m, n);
    const std::size_t fibers = m.fiber_count();
    DualCertificate cert;
    cert.q = q;
    cert.phi.resize(fibers);
    cert.psi.resize(fibers);
    std::vector<double> costs(fibers);
    for (std::size_t i = 0; i < fibers; ++i) {
        auto sol = transport_lp(m.fiber(i), n.fiber(i), m.space(), p, entry_cap);
        costs[i] = sol.cost;
        cert.phi[i] = std::move(sol.duals.phi);
        cert.psi[i] = std::move(sol.duals.psi);
    }
    cert.zeta = norming_weights(costs, m.base().weights(), std::isinf(q) ? kInfiniteQ : q / p);
    return cert;
}

} // namespace fiberot
