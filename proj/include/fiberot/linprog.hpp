#pragma once

// Dense linear programming at desk scale: min c.x subject to A x = b, x >= 0.
// Two-phase tableau simplex with Bland's rule throughout, so termination is
// guaranteed even on the heavily degenerate programs the fixed-support
// barycenter solver produces. Intended for a few hundred variables at most;
// transport problems should use the network solver instead.

#include <cstddef>
#include <utility>
#include <vector>

#include "fiberot/errors.hpp"

namespace fiberot {

struct LinearSolution {
    std::vector<double> x;
    double value;
};

namespace detail {

class DenseSimplex {
  public:
    DenseSimplex(const std::vector<double>& c, const std::vector<std::vector<double>>& rows,
                 const std::vector<double>& b)
        : m_(rows.size()), n_(c.size()) {
        if (b.size() != m_) throw ValidationError("right-hand side size does not match row count");
        for (const auto& r : rows)
            if (r.size() != n_) throw ValidationError("coefficient row size does not match cost size");
        tab_.assign(m_, std::vector<long double>(n_ + m_ + 1, 0.0L));
        basis_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            // flip row signs so the artificial start is feasible
            const long double sign = b[i] < 0.0 ? -1.0L : 1.0L;
            for (std::size_t j = 0; j < n_; ++j) tab_[i][j] = sign * (long double)rows[i][j];
            tab_[i][n_ + i] = 1.0L;
            tab_[i].back() = sign * (long double)b[i];
            basis_[i] = n_ + i;
        }
        cost_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) cost_[j] = (long double)c[j];
    }

    LinearSolution solve() {
        run_phase(true);
        long double infeasibility = 0.0L;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_) infeasibility += tab_[i].back();
        if (infeasibility > 1e-8L) throw Error("equality system is infeasible");
        expel_artificials();
        run_phase(false);
        std::vector<double> x(n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < n_) x[basis_[i]] = (double)tab_[i].back();
        long double value = 0.0L;
        for (std::size_t j = 0; j < n_; ++j) value += cost_[j] * (long double)x[j];
        return {std::move(x), (double)value};
    }

  private:
    static constexpr long double kReducedCostTol = 1e-9L;
    static constexpr long double kPivotTol = 1e-11L;

    void run_phase(bool phase1) {
        const std::size_t limit = phase1 ? n_ + m_ : n_;
        std::vector<long double> z(n_ + m_, 0.0L);
        for (std::size_t j = 0; j < limit; ++j)
            z[j] = phase1 ? (j >= n_ ? 1.0L : 0.0L) : cost_[j];
        for (std::size_t i = 0; i < m_; ++i) {
            const long double coef = z[basis_[i]];
            if (coef == 0.0L) continue;
            for (std::size_t j = 0; j < n_ + m_; ++j) z[j] -= coef * tab_[i][j];
        }
        for (;;) {
            // Bland: smallest-index improving column, smallest-index blocking
            // basis variable; immune to cycling on degenerate bases
            std::size_t enter = limit;
            for (std::size_t j = 0; j < limit; ++j)
                if (z[j] < -kReducedCostTol) {
                    enter = j;
                    break;
                }
            if (enter == limit) return;
            std::size_t leave = m_;
            long double best = 0.0L;
            for (std::size_t i = 0; i < m_; ++i) {
                if (tab_[i][enter] <= kPivotTol) continue;
                const long double ratio = tab_[i].back() / tab_[i][enter];
                if (leave == m_ || ratio < best - 1e-15L ||
                    (ratio < best + 1e-15L && basis_[i] < basis_[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave == m_) throw Error("linear program is unbounded");
            pivot(leave, enter, &z);
        }
    }

    // A basic artificial after phase one marks either a pivotable row or a
    // dependent all-zero row; the latter can stay, it never changes again.
    void expel_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            for (std::size_t j = 0; j < n_; ++j)
                if (tab_[i][j] > kPivotTol || tab_[i][j] < -kPivotTol) {
                    pivot(i, j, nullptr);
                    break;
                }
        }
    }

    void pivot(std::size_t row, std::size_t col, std::vector<long double>* z) {
        const long double piv = tab_[row][col];
        for (auto& v : tab_[row]) v /= piv;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == row) continue;
            const long double factor = tab_[i][col];
            if (factor == 0.0L) continue;
            for (std::size_t j = 0; j < n_ + m_ + 1; ++j) tab_[i][j] -= factor * tab_[row][j];
        }
        if (z) {
            const long double factor = (*z)[col];
            if (factor != 0.0L)
                for (std::size_t j = 0; j < n_ + m_; ++j) (*z)[j] -= factor * tab_[row][j];
        }
        basis_[row] = col;
    }

    std::size_t m_;
    std::size_t n_;
    std::vector<std::vector<long double>> tab_;
    std::vector<std::size_t> basis_;
    std::vector<long double> cost_;
};

} // namespace detail

inline LinearSolution solve_equality_lp(const std::vector<double>& c,
                                        const std::vector<std::vector<double>>& rows,
                                        const std::vector<double>& b) {
    return detail::DenseSimplex(c, rows, b).solve();
}

} // namespace fiberot
