#include <algorithm>
#include <map>
#include <set>

#include "ensemblage/structures.hpp"

namespace ensemblage::structures {

std::vector<std::string> chain_order(std::span<const std::string> ids, bool shuffle_order, Rng& rng) {
  std::vector<std::string> out(ids.begin(), ids.end());
  if (shuffle_order) shuffle(std::span<std::string>(out), rng);
  return out;
}

Rng shuffle_rng(std::uint64_t seed, int cycle_index) {
  return derive_rng(seed, "chain-shuffle", static_cast<std::uint64_t>(cycle_index));
}

TopologicalOrder topological_order(std::span<const std::string> ids, std::span<const Edge> edges) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> succ, pred;
  for (const auto& id : ids) indegree.emplace(id, 0);
  for (const auto& e : edges) {
    if (!indegree.count(e.from) || !indegree.count(e.to)) {
      throw Error(ErrorCode::InvalidConfig,
                  "edge " + e.from + " -> " + e.to + " references an unknown agent");
    }
    succ[e.from].push_back(e.to);
    pred[e.to].push_back(e.from);
    ++indegree[e.to];
  }

  TopologicalOrder out;
  std::vector<std::string> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);  // std::map keeps them sorted
  }
  std::set<std::string> done;
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end());
    std::vector<std::string> next;
    for (const auto& id : ready) {
      done.insert(id);
      out.order.push_back(id);
      for (const auto& s : succ[id]) {
        if (--indegree[s] == 0) next.push_back(s);
      }
    }
    out.stages.push_back(std::move(ready));
    ready = std::move(next);
  }

  if (done.size() == indegree.size()) return out;

  // Every leftover node has a leftover predecessor, so walking backwards
  // from any of them must revisit a node.
  std::string at;
  for (const auto& [id, d] : indegree) {
    if (!done.count(id)) {
      at = id;
      break;
    }
  }
  std::vector<std::string> path;
  std::map<std::string, std::size_t> position;
  while (!position.count(at)) {
    position[at] = path.size();
    path.push_back(at);
    std::string back;
    for (const auto& p : pred[at]) {
      if (!done.count(p) && (back.empty() || p < back)) back = p;
    }
    at = back;
  }
  std::vector<std::string> cycle(path.begin() + static_cast<std::ptrdiff_t>(position[at]), path.end());
  std::reverse(cycle.begin(), cycle.end());
  // Start the reported cycle at its smallest id.
  std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
  std::string text;
  for (const auto& id : cycle) text += id + " -> ";
  text += cycle.front();
  throw CycleDetected("graph has a cycle: " + text, cycle);
}

std::vector<VisibleTurn> window(std::span<const TurnRecord> history, std::optional<int> last_n,
                                const std::string& viewer, TagStyle style) {
  std::size_t n = history.size();
  if (last_n) n = std::min(n, static_cast<std::size_t>(std::max(*last_n, 0)));
  std::vector<VisibleTurn> out;
  out.reserve(n);
  for (std::size_t i = history.size() - n; i < history.size(); ++i) {
    const auto& t = history[i];
    std::optional<std::string> tag;
    bool mine = t.agent_id == viewer;
    if (style == TagStyle::YouOther) tag = mine ? "You" : "Other";
    else if (style == TagStyle::SelfOnly && mine) tag = "You";
    out.push_back({t.turn_id, std::move(tag), t.response_text});
  }
  return out;
}

std::vector<VisibleTurn> predecessor_turns(std::span<const TurnRecord> history,
                                           std::span<const Edge> edges, const std::string& node) {
  std::set<std::string> preds;
  for (const auto& e : edges) {
    if (e.to == node) preds.insert(e.from);
  }
  std::vector<VisibleTurn> out;
  for (const auto& t : history) {
    if (preds.count(t.agent_id)) out.push_back({t.turn_id, std::nullopt, t.response_text});
  }
  return out;
}

std::vector<VisibleTurn> visible_turns(const StructureConfig& config, const std::string& agent_id,
                                       std::span<const TurnRecord> history) {
  return std::visit(
      [&](const auto& v) -> std::vector<VisibleTurn> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Ensemble>) return {};
        else if constexpr (std::is_same_v<T, Chain> || std::is_same_v<T, Custom>)
          return window(history, v.last_n, agent_id, TagStyle::SelfOnly);
        else if constexpr (std::is_same_v<T, Debate>)
          return window(history, v.last_n, agent_id, TagStyle::YouOther);
        else return predecessor_turns(history, v.edges, agent_id);
      },
      config.variant);
}

}  // namespace ensemblage::structures
