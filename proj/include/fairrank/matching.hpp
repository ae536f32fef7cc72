#pragma once

// Hopcroft-Karp maximum matching on a bipartite graph whose right-hand
// vertices may carry a capacity greater than one (a b-matching with unit
// demand on the left). A right vertex with capacity c is matched to at most c
// left vertices; it is stored once, together with the list of its current
// partners, rather than as c clones.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

namespace fairrank {

inline constexpr std::size_t kUnmatched = std::numeric_limits<std::size_t>::max();

struct BipartiteGraph {
    std::vector<std::vector<std::uint32_t>> adjacency;  // left vertex -> right vertices
    std::vector<std::size_t> capacity;                  // per right vertex

    std::size_t left_size() const { return adjacency.size(); }
    std::size_t right_size() const { return capacity.size(); }
};

namespace detail {

class HopcroftKarp {
  public:
    HopcroftKarp(const BipartiteGraph& g, std::vector<std::size_t>& match)
        : g_(g), match_(match), dist_(g.left_size()), load_(g.right_size(), 0),
          partners_(g.right_size()), cursor_(g.left_size(), 0),
          right_seen_(g.right_size(), 0) {
        if (match_.size() != g.left_size()) match_.assign(g.left_size(), kUnmatched);
        for (std::size_t u = 0; u < match_.size(); ++u) {
            const std::size_t r = match_[u];
            if (r == kUnmatched) continue;
            if (r >= g.right_size() || load_[r] >= g.capacity[r]) {
                throw std::invalid_argument("initial matching violates capacities");
            }
            partners_[r].push_back(u);
            ++load_[r];
        }
    }

    std::size_t run() {
        std::size_t size = 0;
        for (std::size_t r : match_) size += r != kUnmatched;
        while (bfs()) {
            std::fill(cursor_.begin(), cursor_.end(), 0);
            for (std::size_t u = 0; u < match_.size(); ++u) {
                if (match_[u] == kUnmatched && dfs(u)) ++size;
            }
        }
        return size;
    }

  private:
    static constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

    bool bfs() {
        std::queue<std::size_t> queue;
        for (std::size_t u = 0; u < match_.size(); ++u) {
            if (match_[u] == kUnmatched) {
                dist_[u] = 0;
                queue.push(u);
            } else {
                dist_[u] = kInf;
            }
        }
        ++epoch_;
        limit_ = kInf;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop();
            if (dist_[u] >= limit_) continue;
            for (std::uint32_t r : g_.adjacency[u]) {
                if (load_[r] < g_.capacity[r]) {
                    if (limit_ == kInf) limit_ = dist_[u];
                    continue;
                }
                if (right_seen_[r] == epoch_) continue;
                right_seen_[r] = epoch_;
                for (std::size_t w : partners_[r]) {
                    if (dist_[w] == kInf) {
                        dist_[w] = dist_[u] + 1;
                        queue.push(w);
                    }
                }
            }
        }
        return limit_ != kInf;
    }

    // Places `u` into slot `s` of right vertex `r`, or appends it when s is
    // past the end (spare capacity).
    void assign(std::size_t u, std::size_t r, std::size_t s) {
        match_[u] = r;
        if (s == partners_[r].size()) {
            partners_[r].push_back(u);
            ++load_[r];
        } else {
            partners_[r][s] = u;
        }
    }

    bool dfs(std::size_t u) {
        const auto& adj = g_.adjacency[u];
        for (std::size_t& c = cursor_[u]; c < adj.size(); ++c) {
            const std::size_t r = adj[c];
            if (load_[r] < g_.capacity[r]) {
                if (dist_[u] == limit_) {
                    assign(u, r, partners_[r].size());
                    return true;
                }
                continue;
            }
            for (std::size_t s = 0; s < partners_[r].size(); ++s) {
                const std::size_t w = partners_[r][s];
                if (dist_[w] != dist_[u] + 1) continue;
                if (dfs(w)) {
                    assign(u, r, s);
                    return true;
                }
            }
        }
        dist_[u] = kInf;
        return false;
    }

    const BipartiteGraph& g_;
    std::vector<std::size_t>& match_;
    std::vector<std::size_t> dist_;
    std::vector<std::size_t> load_;
    std::vector<std::vector<std::size_t>> partners_;
    std::vector<std::size_t> cursor_;
    std::vector<std::size_t> right_seen_;
    std::size_t epoch_ = 0;
    std::size_t limit_ = kInf;
};

}  // namespace detail

/// Grows `match` (left vertex -> right vertex or kUnmatched) to a maximum
/// capacitated matching and returns its size. A valid partial matching passed
/// in is kept as the starting point.
inline std::size_t max_capacitated_matching(const BipartiteGraph& g,
                                            std::vector<std::size_t>& match) {
    detail::HopcroftKarp hk(g, match);
    return hk.run();
}

}  // namespace fairrank
