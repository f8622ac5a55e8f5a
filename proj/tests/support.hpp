#pragma once

#include "stoshield/reaction_graph.hpp"

#include <cmath>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace testing {

using stoshield::EdgeSpec;
using stoshield::ReactionNetwork;

// Directed ring plus random chords with rates in [0.2, 3].
inline ReactionNetwork random_network(std::mt19937_64& rng, std::size_t n, double chord_p = 0.3) {
  std::uniform_real_distribution<double> rate(0.2, 3.0), coin(0.0, 1.0);
  std::vector<EdgeSpec> edges;
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (std::size_t i = 0; i < n; ++i) {
    edges.push_back({i, (i + 1) % n, rate(rng)});
    used.insert({i, (i + 1) % n});
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && !used.count({i, j}) && coin(rng) < chord_p) {
        edges.push_back({i, j, rate(rng)});
        used.insert({i, j});
      }
  return ReactionNetwork(n, edges);
}

// Reversible chain with a prescribed stationary law: random symmetric
// weights W_ij on a connected graph and α_ij = W_ij / π_i.
inline ReactionNetwork detailed_balance_network(std::mt19937_64& rng, std::size_t n, std::vector<double>& pi) {
  std::uniform_real_distribution<double> u(0.2, 2.0), coin(0.0, 1.0);
  pi.assign(n, 0.0);
  double total = 0.0;
  for (auto& p : pi) total += (p = u(rng));
  for (auto& p : pi) p /= total;
  std::vector<EdgeSpec> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (j == i + 1 || coin(rng) < 0.3) {
        const double w = u(rng) * 0.1;
        edges.push_back({i, j, w / pi[i]});
        edges.push_back({j, i, w / pi[j]});
      }
  return ReactionNetwork(n, edges);
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace testing
