#pragma once

// Transportation-problem network simplex. Works on an explicit arc list, so
// callers can exclude arcs entirely (used for the joint fiberwise coupling,
// where off-fiber pairs are not part of the problem). Artificial arcs to a
// virtual root keep the basis a spanning tree; their cost is a symbolic big-M
// tracked as a separate lexicographic component, never a literal large number.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "fiberot/errors.hpp"

namespace fiberot {

struct FlowArc {
    std::uint32_t row;
    std::uint32_t col;
    double cost;
};

struct FlowResult {
    std::vector<double> flow; // per input arc
    std::vector<double> u;    // row potentials
    std::vector<double> v;    // col potentials, u[i]+v[j] <= cost on every arc
    double cost = 0.0;
};

namespace detail {

// Lexicographic cost (M component first). M parts stay small integers, so
// exact double comparisons on them are safe.
struct MCost {
    double m = 0.0;
    double r = 0.0;
    MCost operator+(const MCost& o) const { return {m + o.m, r + o.r}; }
    MCost operator-(const MCost& o) const { return {m - o.m, r - o.r}; }
};

inline bool lex_less(const MCost& a, const MCost& b) {
    if (a.m != b.m) return a.m < b.m;
    return a.r < b.r;
}

} // namespace detail

class NetworkSimplex {
  public:
    // supply[i] and demand[j] must be nonnegative with equal totals up to
    // rounding; arcs is the admissible (row, col) list.
    NetworkSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                   const std::vector<FlowArc>& arcs)
        : m_(supply.size()), n_(demand.size()), root_(m_ + n_), arcs_(arcs) {
        // artificial arcs: node k <-> root, appended after the real arcs
        const std::size_t total = arcs_.size() + m_ + n_;
        tail_.reserve(total);
        head_.reserve(total);
        cost_.reserve(total);
        for (const auto& a : arcs_) {
            if (a.row >= m_ || a.col >= n_) throw Error("arc endpoint out of range");
            tail_.push_back(a.row);
            head_.push_back(m_ + a.col);
            cost_.push_back({0.0, a.cost});
        }
        for (std::size_t i = 0; i < m_; ++i) {
            tail_.push_back(i);
            head_.push_back(root_);
            cost_.push_back({1.0, 0.0});
        }
        for (std::size_t j = 0; j < n_; ++j) {
            tail_.push_back(root_);
            head_.push_back(m_ + j);
            cost_.push_back({1.0, 0.0});
        }
        flow_.assign(total, 0.0);
        in_tree_.assign(total, 0);
        for (std::size_t k = 0; k < m_ + n_; ++k) {
            in_tree_[arcs_.size() + k] = 1;
            flow_[arcs_.size() + k] = (k < m_) ? supply[k] : demand[k - m_];
        }
        rebuild_tree();
    }

    FlowResult solve() {
        const std::size_t real = arcs_.size();
        std::size_t degenerate_streak = 0;
        bool bland = false;
        for (;;) {
            std::size_t enter = real;
            detail::MCost best{0.0, -1e-12}; // entering threshold
            for (std::size_t e = 0; e < real; ++e) {
                if (in_tree_[e]) continue;
                const detail::MCost r = reduced(e);
                if (detail::lex_less(r, best)) {
                    enter = e;
                    if (bland) break;
                    best = r;
                }
            }
            if (enter == real) break;
            if (pivot(enter)) {
                degenerate_streak = 0;
                bland = false;
            } else if (++degenerate_streak > 4 * (m_ + n_ + 1)) {
                bland = true; // anti-cycling fallback
            }
        }

        FlowResult out;
        out.flow.assign(real, 0.0);
        long double total = 0.0L;
        for (std::size_t e = 0; e < real; ++e) {
            out.flow[e] = flow_[e];
            total += (long double)flow_[e] * arcs_[e].cost;
        }
        for (std::size_t e = real; e < flow_.size(); ++e)
            if (flow_[e] > 1e-9)
                throw Error("transport problem is infeasible on the given arcs");
        out.cost = static_cast<double>(total);
        out.u.resize(m_);
        out.v.resize(n_);
        for (std::size_t i = 0; i < m_; ++i) out.u[i] = pi_[i].r;
        for (std::size_t j = 0; j < n_; ++j) out.v[j] = -pi_[m_ + j].r;
        return out;
    }

  private:
    detail::MCost reduced(std::size_t e) const {
        return cost_[e] - pi_[tail_[e]] + pi_[head_[e]];
    }

    // Rebuilds parent/depth and potentials by BFS from the root over tree arcs.
    void rebuild_tree() {
        const std::size_t nodes = m_ + n_ + 1;
        std::vector<std::vector<std::size_t>> adj(nodes);
        for (std::size_t e = 0; e < in_tree_.size(); ++e)
            if (in_tree_[e]) {
                adj[tail_[e]].push_back(e);
                adj[head_[e]].push_back(e);
            }
        parent_.assign(nodes, nodes);
        parent_arc_.assign(nodes, in_tree_.size());
        depth_.assign(nodes, 0);
        pi_.assign(nodes, {0.0, 0.0});
        std::vector<std::size_t> stack{root_};
        std::vector<char> seen(nodes, 0);
        seen[root_] = 1;
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            for (std::size_t e : adj[x]) {
                const std::size_t y = (tail_[e] == x) ? head_[e] : tail_[e];
                if (seen[y]) continue;
                seen[y] = 1;
                parent_[y] = x;
                parent_arc_[y] = e;
                depth_[y] = depth_[x] + 1;
                // zero reduced cost on tree arcs fixes the potential of y
                if (tail_[e] == y) pi_[y] = cost_[e] + pi_[x];
                else pi_[y] = pi_[x] - cost_[e];
                stack.push_back(y);
            }
        }
    }

    // Adds the entering arc, shifts flow around the unique cycle, removes the
    // blocking arc. Returns true when the step moved a positive amount of mass.
    bool pivot(std::size_t enter) {
        // collect the tree paths from both endpoints to their common ancestor
        // The circulation runs tail -> head through the entering arc, then back
        // through the tree from head to tail. On the head-side path the
        // circulation moves child -> parent, on the tail-side parent -> child;
        // an arc loses flow when its own orientation opposes the circulation.
        std::size_t x = tail_[enter], y = head_[enter];
        std::vector<std::pair<std::size_t, bool>> cyc_x, cyc_y; // (arc, flow decreases with theta)
        while (x != y) {
            if (depth_[x] >= depth_[y]) {
                const std::size_t e = parent_arc_[x];
                cyc_x.emplace_back(e, tail_[e] == x);
                x = parent_[x];
            } else {
                const std::size_t e = parent_arc_[y];
                cyc_y.emplace_back(e, head_[e] == y);
                y = parent_[y];
            }
        }
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = enter;
        auto consider = [&](std::size_t e, bool decreases) {
            if (!decreases) return;
            // prefer later arcs on ties so artificial arcs leave first
            if (flow_[e] < theta || (flow_[e] == theta && e > leave)) {
                theta = flow_[e];
                leave = e;
            }
        };
        for (auto [e, dec] : cyc_x) consider(e, dec);
        for (auto [e, dec] : cyc_y) consider(e, dec);
        if (!std::isfinite(theta)) theta = 0.0; // cycle of all-increasing arcs cannot happen here

        flow_[enter] += theta;
        for (auto [e, dec] : cyc_x) flow_[e] += dec ? -theta : theta;
        for (auto [e, dec] : cyc_y) flow_[e] += dec ? -theta : theta;
        if (leave != enter) {
            flow_[leave] = 0.0;
            in_tree_[leave] = 0;
            in_tree_[enter] = 1;
            rebuild_tree();
        }
        return theta > 0.0;
    }

    std::size_t m_, n_, root_;
    std::vector<FlowArc> arcs_;
    std::vector<std::uint32_t> tail_, head_;
    std::vector<detail::MCost> cost_;
    std::vector<double> flow_;
    std::vector<char> in_tree_;
    std::vector<std::size_t> parent_, parent_arc_, depth_;
    std::vector<detail::MCost> pi_;
};

inline FlowResult solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                                  const std::vector<FlowArc>& arcs) {
    return NetworkSimplex(supply, demand, arcs).solve();
}

} // namespace fiberot
