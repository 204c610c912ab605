#pragma once
// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library's graph or masking code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ckbert/kg.hpp"

namespace oracle {

inline constexpr int kInf = std::numeric_limits<int>::max() / 4;

// All-pairs shortest hop counts by Floyd-Warshall over an undirected
// adjacency matrix.
inline std::vector<std::vector<int>> all_pairs(std::size_t n, const std::vector<ckbert::Triple>& triples) {
    std::vector<std::vector<int>> d(n, std::vector<int>(n, kInf));
    for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
    for (const auto& t : triples) {
        const auto h = ckbert::to_index(t.head), tl = ckbert::to_index(t.tail);
        if (h != tl) d[h][tl] = d[tl][h] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            if (d[i][k] == kInf) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (d[k][j] != kInf && d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
            }
        }
    return d;
}

// Far-endpoint distance of a triple from `target`, or kInf.
inline int d_far(const std::vector<std::vector<int>>& d, std::uint32_t target, const ckbert::Triple& t) {
    const int a = d[target][ckbert::to_index(t.head)], b = d[target][ckbert::to_index(t.tail)];
    if (a == kInf || b == kInf) return kInf;
    return std::max(a, b);
}

inline bool incident(std::uint32_t target, const ckbert::Triple& t) {
    return ckbert::to_index(t.head) == target || ckbert::to_index(t.tail) == target;
}

// Random graph over entities "n0".."n{entities-1}" (not all need appear).
inline ckbert::KnowledgeGraph random_graph(std::mt19937_64& gen, std::size_t entities, std::size_t triples,
                                           std::size_t relations = 5) {
    ckbert::KnowledgeGraph::Builder b;
    std::uniform_int_distribution<std::size_t> pick(0, entities - 1), rel(0, relations - 1);
    for (std::size_t i = 0; i < triples; ++i) {
        b.add("n" + std::to_string(pick(gen)), "r" + std::to_string(rel(gen)), "n" + std::to_string(pick(gen)));
    }
    return std::move(b).build();
}

// Mask budget by integer arithmetic: round-half-up of 15% is
// floor((30 * len + 100) / 200), floored at 1.
inline std::size_t mask_budget(std::size_t len) { return std::max<std::size_t>(1, (30 * len + 100) / 200); }
// round-half-up of 60% of K.
inline std::size_t linguistic_share(std::size_t k) { return (12 * k + 10) / 20; }

}  // namespace oracle

namespace oracle {

// Naive BFS from `src`: each round rescans the full triple list.
inline std::vector<int> naive_bfs(std::size_t n, const std::vector<ckbert::Triple>& triples, std::uint32_t src) {
    std::vector<int> d(n, kInf);
    d[src] = 0;
    for (int level = 0;; ++level) {
        bool grew = false;
        for (const auto& t : triples) {
            const auto h = ckbert::to_index(t.head), tl = ckbert::to_index(t.tail);
            if (d[h] == level && d[tl] == kInf) d[tl] = level + 1, grew = true;
            if (d[tl] == level && d[h] == kInf) d[h] = level + 1, grew = true;
        }
        if (!grew) break;
    }
    return d;
}

}  // namespace oracle
