#pragma once

// Weighted barycenters of fibered measures.
//
// objective        evaluates the weighted power-distance sum for any candidate.
// solve_fiberwise  exact solver for q = p, kappa = p: the objective decouples
//                  into independent per-fiber problems. Real1D fibers are
//                  solved in closed form level by level on the merged quantile
//                  staircase; other fiber kinds need a caller-supplied support
//                  grid and are solved by one equality-form linear program per
//                  fiber.
// solve_general_q  projected subgradient over fixed per-fiber support grids
//                  for p <= q < infinity; returns the best iterate, its exact
//                  objective, and a duality-gap bound from an assembled
//                  certificate.
// dual_objective   weak-duality bound for the fibered problem from (zeta, xi)
//                  tables tied by the pointwise constraint sum_k zeta_k xi_k = 0.
// classical_dual   the analogous bound for plain measures on one fiber space,
//                  from potentials with sum_k phi_k = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fiberot/errors.hpp"
#include "fiberot/linprog.hpp"
#include "fiberot/measure.hpp"
#include "fiberot/metric.hpp"
#include "fiberot/network_simplex.hpp"
#include "fiberot/transport.hpp"

namespace fiberot {

inline constexpr double kBarycenterConstraintTol = 1e-10;

// LP vertex weights below this are numerical residue, not support atoms.
inline constexpr double kSolverWeightFloor = 1e-12;

class NotConverged : public Error {
  public:
    NotConverged(FiberedMeasure best_iterate, double best_value, double gap_bound)
        : Error("subgradient solver stopped above the requested duality gap"),
          best(std::move(best_iterate)), value(best_value), gap(gap_bound) {}

    FiberedMeasure best;
    double value;
    double gap;
};

struct BarycenterProblem {
    std::vector<FiberedMeasure> inputs;
    std::vector<double> lambdas;
    double p;
    double q;
    double kappa;

    static BarycenterProblem make(std::vector<FiberedMeasure> inputs, std::vector<double> lambdas,
                                  double p, double q, double kappa) {
        BarycenterProblem prob{std::move(inputs), std::move(lambdas), p, q, kappa};
        validate_problem(prob);
        return prob;
    }

    std::size_t count() const { return inputs.size(); }
    std::size_t fiber_count() const { return inputs.front().fiber_count(); }

    static void validate_problem(const BarycenterProblem& prob) {
        if (prob.inputs.size() < 2) throw ValidationError("barycenter needs at least two inputs");
        if (prob.lambdas.size() != prob.inputs.size())
            throw ValidationError("one mixing weight per input measure is required");
        long double total = 0.0L;
        for (double l : prob.lambdas) {
            if (!(l > 0.0)) throw ValidationError("mixing weights must be strictly positive");
            total += (long double)l;
        }
        if (std::abs((double)(total - 1.0L)) > 1e-12)
            throw ValidationError("mixing weights must sum to one");
        check_exponent(prob.p);
        check_q(prob.q);
        if (!(prob.kappa >= 0.0) || std::isinf(prob.kappa))
            throw ValidationError("outer exponent must be finite and nonnegative");
        for (std::size_t k = 1; k < prob.inputs.size(); ++k)
            check_shared_base(prob.inputs.front(), prob.inputs[k]);
    }
};

inline double objective(const BarycenterProblem& prob, const FiberedMeasure& candidate,
                        std::size_t entry_cap = kDefaultEntryCap) {
    BarycenterProblem::validate_problem(prob);
    check_shared_base(prob.inputs.front(), candidate);
    long double total = 0.0L;
    for (std::size_t k = 0; k < prob.count(); ++k) {
        const double d = fibered_distance(prob.inputs[k], candidate, prob.p, prob.q, entry_cap).value;
        // 0^0 := 0, so coinciding measures never contribute
        const double term = (d == 0.0 && prob.kappa == 0.0) ? 0.0 : std::pow(d, prob.kappa);
        total += (long double)prob.lambdas[k] * (long double)term;
    }
    return (double)total;
}

// Candidate support per fiber for the grid-based solvers.
using SupportGrid = std::vector<std::vector<Point>>;

namespace detail {

inline void validate_grid(const BarycenterProblem& prob, const SupportGrid& grids) {
    if (grids.size() != prob.fiber_count())
        throw ValidationError("one support grid per fiber is required");
    const auto& space = prob.inputs.front().space();
    for (const auto& grid : grids) {
        if (grid.empty()) throw ValidationError("support grids must be nonempty");
        for (const auto& pt : grid) space.check_point(pt);
    }
}

struct QuantileStair {
    std::vector<double> pos; // ascending
    std::vector<double> cum; // increasing partial masses, last ~1
};

inline QuantileStair stair_of(const DiscreteMeasure& f) {
    std::vector<std::size_t> order(f.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return f.point(a)[0] < f.point(b)[0]; });
    QuantileStair s;
    long double acc = 0.0L;
    for (std::size_t idx : order) {
        acc += (long double)f.weight(idx);
        s.pos.push_back(f.point(idx)[0]);
        s.cum.push_back((double)acc);
    }
    return s;
}

inline double stair_at(const QuantileStair& s, double t) {
    const auto it = std::lower_bound(s.cum.begin(), s.cum.end(), t);
    const std::size_t idx = it == s.cum.end() ? s.cum.size() - 1 : (std::size_t)(it - s.cum.begin());
    return s.pos[idx];
}

// min over x of sum_k lambda_k |x - q_k|^p for one quantile level.
inline double pointwise_center(const std::vector<double>& qs, const std::vector<double>& lambdas,
                               double p) {
    if (p == 2.0) {
        long double mean = 0.0L;
        for (std::size_t k = 0; k < qs.size(); ++k) mean += (long double)lambdas[k] * (long double)qs[k];
        return (double)mean;
    }
    if (p == 1.0) {
        // weighted median; exact half-mass ties resolve to the lower point
        std::vector<std::size_t> order(qs.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return qs[a] < qs[b]; });
        long double acc = 0.0L;
        for (std::size_t idx : order) {
            acc += (long double)lambdas[idx];
            if (acc >= 0.5L) return qs[idx];
        }
        return qs[order.back()];
    }
    double lo = qs[0], hi = qs[0];
    for (double v : qs) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) return lo;
    const auto slope = [&](double x) {
        long double h = 0.0L;
        for (std::size_t k = 0; k < qs.size(); ++k) {
            const long double gap = (long double)x - (long double)qs[k];
            const long double mag = powl(gap < 0.0L ? -gap : gap, (long double)p - 1.0L);
            h += (long double)lambdas[k] * (gap < 0.0L ? -mag : mag);
        }
        return h;
    };
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (slope(mid) < 0.0L)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline DiscreteMeasure quantile_barycenter_fiber(const std::vector<const DiscreteMeasure*>& fibers,
                                                const std::vector<double>& lambdas,
                                                const FiberSpace& space, double p) {
    std::vector<QuantileStair> stairs;
    stairs.reserve(fibers.size());
    std::vector<double> cuts{1.0};
    for (const auto* f : fibers) {
        stairs.push_back(stair_of(*f));
        for (double c : stairs.back().cum)
            if (c < 1.0) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Point> pts;
    std::vector<double> wts;
    std::vector<double> qs(fibers.size());
    double lo = 0.0;
    for (double cut : cuts) {
        if (cut <= lo) continue;
        const double level = 0.5 * (lo + cut);
        for (std::size_t k = 0; k < stairs.size(); ++k) qs[k] = stair_at(stairs[k], level);
        pts.push_back(real_point(pointwise_center(qs, lambdas, p)));
        wts.push_back(cut - lo);
        lo = cut;
    }
    return make_measure(space, std::move(pts), std::move(wts));
}

inline constexpr std::size_t kDenseLpCellCap = 2000000;

// One fiber of the q = p problem on a fixed grid: a single LP in the K plans
// with a shared target marginal, eliminated through coupling rows.
inline DiscreteMeasure fixed_support_fiber(const std::vector<const DiscreteMeasure*>& fibers,
                                           const std::vector<double>& lambdas,
                                           const FiberSpace& space, double p,
                                           const std::vector<Point>& grid) {
    const std::size_t K = fibers.size();
    const std::size_t G = grid.size();
    std::vector<std::size_t> offset(K, 0);
    std::size_t vars = 0;
    for (std::size_t k = 0; k < K; ++k) {
        offset[k] = vars;
        vars += fibers[k]->size() * G;
    }
    std::size_t rows_count = (K - 1) * G;
    for (std::size_t k = 0; k < K; ++k) rows_count += fibers[k]->size();
    if (vars * rows_count > kDenseLpCellCap)
        throw SizeCapExceeded(rows_count, vars, kDenseLpCellCap);

    std::vector<double> c(vars, 0.0);
    std::vector<std::vector<double>> rows;
    std::vector<double> b;
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t a = 0; a < fibers[k]->size(); ++a) {
            for (std::size_t j = 0; j < G; ++j)
                c[offset[k] + a * G + j] =
                    lambdas[k] * pow_p(space.distance(fibers[k]->point(a), grid[j]), p);
            std::vector<double> row(vars, 0.0);
            for (std::size_t j = 0; j < G; ++j) row[offset[k] + a * G + j] = 1.0;
            rows.push_back(std::move(row));
            b.push_back(fibers[k]->weight(a));
        }
    for (std::size_t k = 1; k < K; ++k)
        for (std::size_t j = 0; j < G; ++j) {
            std::vector<double> row(vars, 0.0);
            for (std::size_t a = 0; a < fibers[k]->size(); ++a) row[offset[k] + a * G + j] = 1.0;
            for (std::size_t a = 0; a < fibers[0]->size(); ++a) row[offset[0] + a * G + j] = -1.0;
            rows.push_back(std::move(row));
            b.push_back(0.0);
        }
    const auto sol = solve_equality_lp(c, rows, b);
    std::vector<Point> pts;
    std::vector<double> wts;
    for (std::size_t j = 0; j < G; ++j) {
        long double w = 0.0L;
        for (std::size_t a = 0; a < fibers[0]->size(); ++a) w += (long double)sol.x[offset[0] + a * G + j];
        if ((double)w > kSolverWeightFloor) {
            pts.push_back(grid[j]);
            wts.push_back((double)w);
        }
    }
    return make_measure(space, std::move(pts), std::move(wts));
}

} // namespace detail

struct BarycenterResult {
    FiberedMeasure solution;
    double value;
};

inline BarycenterResult solve_fiberwise(const BarycenterProblem& prob,
                                        const SupportGrid& grids = {}) {
    BarycenterProblem::validate_problem(prob);
    if (prob.q != prob.p || prob.kappa != prob.p)
        throw ValidationError("the fiberwise solver requires q = p and kappa = p");
    const auto& space = prob.inputs.front().space();
    const auto& base = prob.inputs.front().base();
    if (grids.empty() && space.kind() != FiberKind::Real1D)
        throw UnsupportedFiberKind(
            "fibers without interval structure need a caller-supplied support grid");
    if (!grids.empty()) detail::validate_grid(prob, grids);
    std::vector<DiscreteMeasure> fibers;
    std::vector<const DiscreteMeasure*> slice(prob.count());
    for (std::size_t i = 0; i < prob.fiber_count(); ++i) {
        for (std::size_t k = 0; k < prob.count(); ++k) slice[k] = &prob.inputs[k].fiber(i);
        fibers.push_back(grids.empty()
                             ? detail::quantile_barycenter_fiber(slice, prob.lambdas, space, prob.p)
                             : detail::fixed_support_fiber(slice, prob.lambdas, space, prob.p, grids[i]));
    }
    FiberedMeasure solution =
        FiberedMeasure::make(base, space, std::move(fibers), prob.inputs.front().chart_id());
    const double value = objective(prob, solution);
    return {std::move(solution), value};
}

struct BarycenterDualCertificate {
    SupportGrid eval_points;                      // per fiber, shared by all k
    std::vector<std::vector<double>> zeta;        // [input k][fiber]
    std::vector<std::vector<std::vector<double>>> xi; // [input k][fiber][eval index]
};

// Orthogonal projection of the xi tables onto the pointwise constraint
// sum_k zeta_k xi_k = 0. Fibers where every zeta_k vanishes satisfy the
// constraint trivially and are left untouched.
inline void project_certificate(BarycenterDualCertificate& cert) {
    const std::size_t K = cert.zeta.size();
    for (std::size_t i = 0; i < cert.eval_points.size(); ++i) {
        long double denom = 0.0L;
        for (std::size_t k = 0; k < K; ++k)
            denom += (long double)cert.zeta[k][i] * (long double)cert.zeta[k][i];
        if (denom == 0.0L) continue;
        for (std::size_t v = 0; v < cert.eval_points[i].size(); ++v) {
            long double resid = 0.0L;
            for (std::size_t k = 0; k < K; ++k)
                resid += (long double)cert.zeta[k][i] * (long double)cert.xi[k][i][v];
            for (std::size_t k = 0; k < K; ++k)
                cert.xi[k][i][v] = (double)((long double)cert.xi[k][i][v] -
                                            (long double)cert.zeta[k][i] * resid / denom);
        }
    }
}

inline double dual_objective(const BarycenterProblem& prob, const BarycenterDualCertificate& cert) {
    BarycenterProblem::validate_problem(prob);
    if (prob.kappa != prob.p)
        throw ValidationError("the dual bound covers the kappa = p objective only");
    const std::size_t K = prob.count();
    const std::size_t fibers = prob.fiber_count();
    const auto& space = prob.inputs.front().space();
    const auto& sigma = prob.inputs.front().base().weights();
    if (cert.zeta.size() != K || cert.xi.size() != K || cert.eval_points.size() != fibers)
        throw ValidationError("certificate tables do not match the problem shape");
    for (std::size_t i = 0; i < fibers; ++i) {
        if (cert.eval_points[i].empty()) throw ValidationError("evaluation supports must be nonempty");
        for (const auto& pt : cert.eval_points[i]) space.check_point(pt);
    }
    const double rprime = conjugate_exponent(prob.q / prob.p);
    for (std::size_t k = 0; k < K; ++k) {
        if (cert.zeta[k].size() != fibers || cert.xi[k].size() != fibers)
            throw ValidationError("certificate tables do not match the problem shape");
        for (std::size_t i = 0; i < fibers; ++i) {
            if (cert.xi[k][i].size() != cert.eval_points[i].size())
                throw ValidationError("certificate tables do not match the evaluation support");
            if (cert.zeta[k][i] < 0.0)
                throw ValidationError("certificate base weights must be nonnegative");
        }
        if (lq_norm(cert.zeta[k], sigma, rprime) > 1.0 + 1e-12)
            throw ValidationError("certificate base weights exceed the unit dual ball");
    }
    std::size_t bad_fiber = 0, bad_point = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < fibers; ++i)
        for (std::size_t v = 0; v < cert.eval_points[i].size(); ++v) {
            long double resid = 0.0L;
            for (std::size_t k = 0; k < K; ++k)
                resid += (long double)cert.zeta[k][i] * (long double)cert.xi[k][i][v];
            const double mag = std::abs((double)resid);
            if (mag > worst) {
                worst = mag;
                bad_fiber = i;
                bad_point = v;
            }
        }
    if (worst > kBarycenterConstraintTol) throw ConstraintViolation(bad_fiber, bad_point, worst);

    long double total = 0.0L;
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < fibers; ++i) {
            if (cert.zeta[k][i] == 0.0) continue;
            const auto& fib = prob.inputs[k].fiber(i);
            const auto transformed = c_transform(cert.xi[k][i], cert.eval_points[i], fib.points(),
                                                 space, prob.p, prob.lambdas[k]);
            long double inner = 0.0L;
            for (std::size_t a = 0; a < fib.size(); ++a)
                inner += (long double)fib.weight(a) * (long double)transformed[a];
            total -= (long double)sigma[i] * (long double)cert.zeta[k][i] * inner;
        }
    return (double)total;
}

// Weak dual bound for plain measures on one fiber space: potentials phi_k on a
// shared evaluation support with sum_k phi_k = 0; the mixing weights enter
// through the scaled transform.
inline double classical_dual(const std::vector<DiscreteMeasure>& mus, const FiberSpace& space,
                             const std::vector<double>& lambdas, double p,
                             const std::vector<Point>& eval_points,
                             const std::vector<std::vector<double>>& phis) {
    if (mus.size() < 2) throw ValidationError("the dual bound needs at least two measures");
    if (lambdas.size() != mus.size() || phis.size() != mus.size())
        throw ValidationError("one mixing weight and one potential table per measure is required");
    long double lam_total = 0.0L;
    for (double l : lambdas) {
        if (!(l > 0.0)) throw ValidationError("mixing weights must be strictly positive");
        lam_total += (long double)l;
    }
    if (std::abs((double)(lam_total - 1.0L)) > 1e-12)
        throw ValidationError("mixing weights must sum to one");
    check_exponent(p);
    if (eval_points.empty()) throw ValidationError("evaluation supports must be nonempty");
    for (const auto& pt : eval_points) space.check_point(pt);
    for (const auto& table : phis)
        if (table.size() != eval_points.size())
            throw ValidationError("potential tables do not match the evaluation support");
    std::size_t bad_point = 0;
    double worst = 0.0;
    for (std::size_t v = 0; v < eval_points.size(); ++v) {
        long double s = 0.0L;
        for (const auto& table : phis) s += (long double)table[v];
        const double mag = std::abs((double)s);
        if (mag > worst) {
            worst = mag;
            bad_point = v;
        }
    }
    if (worst > kBarycenterConstraintTol) throw ConstraintViolation(0, bad_point, worst);
    long double total = 0.0L;
    for (std::size_t k = 0; k < mus.size(); ++k) {
        const auto transformed =
            c_transform(phis[k], eval_points, mus[k].points(), space, p, lambdas[k]);
        long double inner = 0.0L;
        for (std::size_t a = 0; a < mus[k].size(); ++a)
            inner += (long double)mus[k].weight(a) * (long double)transformed[a];
        total -= inner;
    }
    return (double)total;
}

struct SubgradientOptions {
    std::size_t iterations = 3000;
    double step_a = 1.0;
    double step_b = 10.0;
    // raise NotConverged when the assembled certificate leaves a larger gap
    double gap_tol = std::numeric_limits<double>::infinity();
    std::size_t entry_cap = kDefaultEntryCap;
};

struct GeneralQResult {
    FiberedMeasure solution;
    double value;
    double dual_gap_bound;
    BarycenterDualCertificate certificate;
};

namespace detail {

inline std::vector<double> project_to_simplex(const std::vector<double>& y) {
    std::vector<double> u(y);
    std::sort(u.begin(), u.end(), std::greater<double>());
    long double acc = 0.0L;
    long double tau = 0.0L;
    for (std::size_t j = 0; j < u.size(); ++j) {
        acc += (long double)u[j];
        const long double t = (acc - 1.0L) / (long double)(j + 1);
        if ((long double)u[j] - t > 0.0L) tau = t;
    }
    std::vector<double> x(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = std::max(0.0, (double)((long double)y[i] - tau));
    return x;
}

// Transport from one input fiber onto the weighted grid: cost, row potentials,
// and column potentials tightened to every grid point (including unused ones,
// where they give the one-sided derivative of the cost in that weight).
struct FiberDuals {
    double cost;
    std::vector<double> v_full;
};

inline FiberDuals grid_transport(const DiscreteMeasure& mu, const std::vector<std::vector<double>>& cost,
                                 const std::vector<double>& w) {
    const std::size_t m = mu.size();
    const std::size_t G = w.size();
    std::vector<std::size_t> cols;
    long double wsum = 0.0L;
    for (std::size_t j = 0; j < G; ++j)
        if (w[j] > 0.0) {
            cols.push_back(j);
            wsum += (long double)w[j];
        }
    std::vector<double> demand(cols.size());
    for (std::size_t jj = 0; jj < cols.size(); ++jj) demand[jj] = (double)((long double)w[cols[jj]] / wsum);
    std::vector<FlowArc> arcs;
    arcs.reserve(m * cols.size());
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t jj = 0; jj < cols.size(); ++jj)
            arcs.push_back({(std::uint32_t)a, (std::uint32_t)jj, cost[a][cols[jj]]});
    const auto res = solve_transport(mu.weights(), demand, arcs);
    FiberDuals out;
    out.cost = res.cost;
    out.v_full.resize(G);
    for (std::size_t j = 0; j < G; ++j) {
        double best = cost[0][j] - res.u[0];
        for (std::size_t a = 1; a < m; ++a) best = std::min(best, cost[a][j] - res.u[a]);
        out.v_full[j] = best;
    }
    return out;
}

} // namespace detail

inline GeneralQResult solve_general_q(const BarycenterProblem& prob, const SupportGrid& grids,
                                      const SubgradientOptions& options = {}) {
    BarycenterProblem::validate_problem(prob);
    if (prob.kappa != prob.p)
        throw ValidationError("the subgradient solver covers the kappa = p objective only");
    if (prob.q == kInfiniteQ)
        throw ValidationError("the subgradient solver requires a finite q; use objective evaluation");
    if (prob.q < prob.p) throw ValidationError("the subgradient solver requires p <= q");
    if (options.iterations == 0) throw ValidationError("at least one iteration is required");
    detail::validate_grid(prob, grids);
    const std::size_t K = prob.count();
    const std::size_t fibers = prob.fiber_count();
    const auto& space = prob.inputs.front().space();
    const auto& base = prob.inputs.front().base();
    const auto& sigma = base.weights();
    const double r = prob.q / prob.p;

    // distance tables never change; only the grid weights move
    std::vector<std::vector<std::vector<std::vector<double>>>> cost(K);
    for (std::size_t k = 0; k < K; ++k) {
        cost[k].resize(fibers);
        for (std::size_t i = 0; i < fibers; ++i) {
            const auto& fib = prob.inputs[k].fiber(i);
            if (fib.size() * grids[i].size() > options.entry_cap)
                throw SizeCapExceeded(fib.size(), grids[i].size(), options.entry_cap);
            cost[k][i].assign(fib.size(), std::vector<double>(grids[i].size()));
            for (std::size_t a = 0; a < fib.size(); ++a)
                for (std::size_t j = 0; j < grids[i].size(); ++j)
                    cost[k][i][a][j] = pow_p(space.distance(fib.point(a), grids[i][j]), prob.p);
        }
    }

    std::vector<std::vector<double>> w(fibers);
    for (std::size_t i = 0; i < fibers; ++i)
        w[i].assign(grids[i].size(), 1.0 / (double)grids[i].size());
    std::vector<std::vector<double>> best_w = w;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<std::vector<double>> g(K, std::vector<double>(fibers));
    std::vector<std::vector<detail::FiberDuals>> duals(K, std::vector<detail::FiberDuals>(fibers));
    const auto sweep = [&](const std::vector<std::vector<double>>& weights) {
        long double val = 0.0L;
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < fibers; ++i) {
                duals[k][i] = detail::grid_transport(prob.inputs[k].fiber(i), cost[k][i], weights[i]);
                g[k][i] = duals[k][i].cost;
            }
            val += (long double)prob.lambdas[k] * (long double)lq_norm(g[k], sigma, r);
        }
        return (double)val;
    };

    const auto consider = [&](const std::vector<std::vector<double>>& weights) {
        const double val = sweep(weights);
        if (val < best_val) {
            best_val = val;
            best_w = weights;
        }
        return val;
    };

    // iterates orbit degenerate optima at the step radius; a tail average of
    // the orbit sits much closer, so it is evaluated as a candidate as well
    std::vector<std::vector<double>> tail_sum(fibers);
    for (std::size_t i = 0; i < fibers; ++i) tail_sum[i].assign(grids[i].size(), 0.0);
    std::size_t tail_begin = 0;

    for (std::size_t t = 0; t < options.iterations; ++t) {
        consider(w);
        std::vector<std::vector<double>> zeta(K);
        for (std::size_t k = 0; k < K; ++k) zeta[k] = norming_weights(g[k], sigma, r);
        const double step = options.step_a / (options.step_b + (double)t);
        for (std::size_t i = 0; i < fibers; ++i) {
            std::vector<double> shifted(w[i].size());
            for (std::size_t j = 0; j < w[i].size(); ++j) {
                long double grad = 0.0L;
                for (std::size_t k = 0; k < K; ++k)
                    grad += (long double)prob.lambdas[k] * (long double)sigma[i] *
                            (long double)zeta[k][i] * (long double)duals[k][i].v_full[j];
                shifted[j] = (double)((long double)w[i][j] - (long double)step * grad);
            }
            w[i] = detail::project_to_simplex(shifted);
        }
        const std::size_t done = t + 1;
        if ((done & (done - 1)) == 0) {
            for (auto& row : tail_sum) std::fill(row.begin(), row.end(), 0.0);
            tail_begin = done;
        }
        for (std::size_t i = 0; i < fibers; ++i)
            for (std::size_t j = 0; j < w[i].size(); ++j) tail_sum[i][j] += w[i][j];
        if (done > tail_begin && (done % 16 == 0 || done == options.iterations)) {
            const double span = (double)(done - tail_begin + 1);
            std::vector<std::vector<double>> avg(fibers);
            for (std::size_t i = 0; i < fibers; ++i) {
                avg[i].resize(w[i].size());
                for (std::size_t j = 0; j < w[i].size(); ++j) avg[i][j] = tail_sum[i][j] / span;
            }
            consider(avg);
        }
    }

    sweep(best_w); // refresh duals and per-fiber costs at the returned iterate
    std::vector<DiscreteMeasure> out_fibers;
    for (std::size_t i = 0; i < fibers; ++i) {
        std::vector<Point> pts;
        std::vector<double> wts;
        for (std::size_t j = 0; j < grids[i].size(); ++j)
            if (best_w[i][j] > 0.0) {
                pts.push_back(grids[i][j]);
                wts.push_back(best_w[i][j]);
            }
        out_fibers.push_back(make_measure(space, std::move(pts), std::move(wts)));
    }
    FiberedMeasure solution =
        FiberedMeasure::make(base, space, std::move(out_fibers), prob.inputs.front().chart_id());
    const double value = objective(prob, solution, options.entry_cap);

    // the certificate bounds candidates supported on its evaluation points;
    // keeping those equal to the grid also keeps the projection tight at optima
    BarycenterDualCertificate cert;
    cert.eval_points = grids;
    cert.zeta.assign(K, std::vector<double>(fibers));
    cert.xi.assign(K, {});
    for (std::size_t k = 0; k < K; ++k) {
        cert.zeta[k] = norming_weights(g[k], sigma, r);
        cert.xi[k].resize(fibers);
        for (std::size_t i = 0; i < fibers; ++i) {
            const auto& fib = prob.inputs[k].fiber(i);
            // recover admissible row potentials from the flow duals and push
            // them through the scaled transform onto the evaluation support
            std::vector<double> phi_scaled(fib.size());
            const auto& table = cost[k][i];
            std::vector<double> u(fib.size());
            for (std::size_t a = 0; a < fib.size(); ++a) {
                double best = table[a][0] - duals[k][i].v_full[0];
                for (std::size_t j = 1; j < grids[i].size(); ++j)
                    best = std::min(best, table[a][j] - duals[k][i].v_full[j]);
                u[a] = best;
            }
            for (std::size_t a = 0; a < fib.size(); ++a) phi_scaled[a] = -prob.lambdas[k] * u[a];
            cert.xi[k][i] = c_transform(phi_scaled, fib.points(), cert.eval_points[i], space, prob.p,
                                        prob.lambdas[k]);
        }
    }
    project_certificate(cert);
    const double dual = dual_objective(prob, cert);
    const double gap = value - dual;
    if (gap > options.gap_tol) throw NotConverged(std::move(solution), value, gap);
    return {std::move(solution), value, gap, std::move(cert)};
}

// Two disjoint unit intervals discretized at the midpoints of equal
// subintervals, an even alternating family of copies, and the piecewise linear
// potential whose scaled copies certify the optimal value 3/2. Both interval
// measures minimize the objective, so this instance exhibits a genuinely
// nonunique barycenter.
struct NonuniqueDemo {
    DiscreteMeasure nu0;
    DiscreteMeasure nu1;
    std::vector<DiscreteMeasure> mus;
    std::vector<double> lambdas;
    std::vector<Point> eval_points;
    std::vector<std::vector<double>> phis;
    BarycenterProblem problem; // lifted over a uniform two-atom base, p = q = kappa = 1
    FiberedMeasure cand0;
    FiberedMeasure cand1;
};

inline double ridge_potential(double t) {
    if (t < -4.0 || t > 4.0) return 0.0;
    if (t < -2.0) return -4.0 - t;
    if (t < 2.0) return t;
    return 4.0 - t;
}

inline NonuniqueDemo make_nonunique_demo(std::size_t count, std::size_t atoms) {
    if (count < 2 || count % 2 != 0)
        throw ValidationError("the nonuniqueness instance needs an even number of copies");
    if (atoms == 0) throw ValidationError("at least one atom per interval is required");
    const auto space = FiberSpace::real1d();
    const auto discretize = [&](double lo) {
        std::vector<Point> pts;
        std::vector<double> wts;
        for (std::size_t j = 0; j < atoms; ++j) {
            pts.push_back(real_point(lo + ((double)j + 0.5) / (double)atoms));
            wts.push_back(1.0 / (double)atoms);
        }
        return make_measure(space, std::move(pts), std::move(wts));
    };
    DiscreteMeasure nu0 = discretize(-2.0);
    DiscreteMeasure nu1 = discretize(1.0);
    std::vector<DiscreteMeasure> mus;
    for (std::size_t k = 0; k < count; ++k) mus.push_back(k % 2 ? nu1 : nu0);
    std::vector<double> lambdas(count, 1.0 / (double)count);
    std::vector<Point> eval_points;
    for (const auto& pt : nu0.points()) eval_points.push_back(pt);
    for (const auto& pt : nu1.points()) eval_points.push_back(pt);
    std::vector<std::vector<double>> phis(count, std::vector<double>(eval_points.size()));
    for (std::size_t k = 0; k < count; ++k)
        for (std::size_t v = 0; v < eval_points.size(); ++v)
            phis[k][v] = (k % 2 ? 1.0 : -1.0) * ridge_potential(eval_points[v][0]) / (double)count;
    auto base = BaseMeasure::make({"w1", "w2"}, {0.5, 0.5});
    std::vector<FiberedMeasure> lifted;
    for (std::size_t k = 0; k < count; ++k)
        lifted.push_back(FiberedMeasure::make(base, space, {mus[k], mus[k]}));
    BarycenterProblem problem = BarycenterProblem::make(std::move(lifted), lambdas, 1.0, 1.0, 1.0);
    FiberedMeasure cand0 = FiberedMeasure::make(base, space, {nu0, nu0});
    FiberedMeasure cand1 = FiberedMeasure::make(base, space, {nu1, nu1});
    return NonuniqueDemo{std::move(nu0),        std::move(nu1),   std::move(mus),
                         std::move(lambdas),    std::move(eval_points), std::move(phis),
                         std::move(problem),    std::move(cand0), std::move(cand1)};
}

} // namespace fiberot
