// Random structure configurations for property tests.
#pragma once

#include <string>
#include <vector>

#include "ensemblage/structures.hpp"

namespace gen {

namespace st = ensemblage::structures;
using ensemblage::AgentSpec;
using ensemblage::Rng;
using ensemblage::uniform_index;

inline AgentSpec agent(const std::string& id, Rng& rng) {
  static const char* combos[] = {"default", "critique_revise", "rational_debate", "emotional_debate"};
  AgentSpec a;
  a.id = id;
  a.model_id = "mock-model";
  // Distinct instructions keep every agent's echo distinct.
  a.profile = ensemblage::DirectProfile{"You are participant " + id + "."};
  a.combination_instructions = ensemblage::templates::builtin(combos[uniform_index(rng, 4)]);
  if (uniform_index(rng, 4) == 0) a.task = "Private task for " + id + ".";
  return a;
}

inline std::optional<int> last_n(Rng& rng) {
  switch (uniform_index(rng, 3)) {
    case 0: return 1;
    case 1: return 2;
    default: return std::nullopt;
  }
}

/// A random DAG: edges only go forward in a random permutation of the nodes.
inline std::vector<st::Edge> dag(const std::vector<std::string>& ids, Rng& rng, double p = 0.4) {
  std::vector<std::string> perm = ids;
  ensemblage::shuffle(std::span<std::string>(perm), rng);
  std::vector<st::Edge> edges;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = i + 1; j < perm.size(); ++j) {
      if (ensemblage::uniform_unit(rng) < p) edges.push_back({perm[i], perm[j]});
    }
  }
  return edges;
}

/// <= 6 agents, cycles <= 3 (graphs: 1), last_n in {1, 2, unlimited}.
inline st::StructureConfig structure(Rng& rng) {
  st::StructureConfig c;
  c.task = "Shared task number " + std::to_string(uniform_index(rng, 1000)) + ".";
  c.seed = rng();
  c.cycles = 1 + static_cast<int>(uniform_index(rng, 3));
  std::size_t n = 1 + uniform_index(rng, 6);
  std::vector<AgentSpec> agents;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("a" + std::to_string(i));
    agents.push_back(agent(ids.back(), rng));
  }
  switch (uniform_index(rng, 4)) {
    case 0: c.variant = st::Ensemble{agents}; break;
    case 1: c.variant = st::Chain{agents, uniform_index(rng, 2) == 1, last_n(rng)}; break;
    case 2: {
      auto b = agent("b_side", rng);
      c.variant = st::Debate{agents[0], b, last_n(rng)};
      break;
    }
    default:
      c.cycles = 1;
      c.variant = st::Graph{agents, dag(ids, rng)};
  }
  return c;
}

}  // namespace gen
