#include <set>
#include <sstream>

#include "ensemblage/structures.hpp"

namespace ensemblage::structures {

namespace {

void check_agent(const AgentSpec& a, const std::string& where, const StructureConfig& config,
                 std::vector<Problem>& out) {
  if (a.id.empty()) {
    out.push_back({where + "/id", "agent id must be non-empty"});
  } else if (a.id.find('#') != std::string::npos) {
    out.push_back({where + "/id", "agent id '" + a.id + "' must not contain '#'"});
  }
  if (a.combination_instructions.kind() != templates::TemplateKind::Combination) {
    out.push_back({where + "/combination_instructions",
                   "template '" + a.combination_instructions.name() + "' is a " +
                       std::string(templates::to_string(a.combination_instructions.kind())) +
                       " template, not a combination template"});
  }
  if (const auto* p = std::get_if<PersonaProfile>(&a.profile)) {
    if (p->persona_template.kind() != templates::TemplateKind::Persona) {
      out.push_back({where + "/persona_template",
                     "template '" + p->persona_template.name() + "' is not a persona template"});
    }
  }
  bool has_task = (a.task && !a.task->empty()) || (config.task && !config.task->empty());
  if (!has_task) {
    out.push_back({where + "/task", "agent '" + a.id + "' has no task and the structure provides none"});
  }
  if (a.params.max_tokens && *a.params.max_tokens <= 0) {
    out.push_back({where + "/max_tokens", "max_tokens must be positive"});
  }
  if (a.params.temperature && *a.params.temperature < 0) {
    out.push_back({where + "/temperature", "temperature must be non-negative"});
  }
}

void check_last_n(const std::optional<int>& last_n, std::vector<Problem>& out) {
  if (last_n && *last_n < 1) out.push_back({"/last_n", "last_n must be at least 1 when set"});
}

}  // namespace

std::string type_name(const StructureConfig& config) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Ensemble>) return "ensemble";
        else if constexpr (std::is_same_v<T, Chain>) return "chain";
        else if constexpr (std::is_same_v<T, Debate>) return "debate";
        else if constexpr (std::is_same_v<T, Graph>) return "graph";
        else return v.type;
      },
      config.variant);
}

std::vector<const AgentSpec*> agents_of(const StructureConfig& config) {
  std::vector<const AgentSpec*> out;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Debate>) {
          out = {&v.agent_a, &v.agent_b};
        } else {
          for (const auto& a : v.agents) out.push_back(&a);
        }
      },
      config.variant);
  return out;
}

std::vector<Problem> check(const StructureConfig& config) {
  std::vector<Problem> out;
  if (config.cycles < 1) out.push_back({"/cycles", "cycles must be at least 1"});

  auto agents = agents_of(config);
  if (agents.empty()) out.push_back({"/agents", "structure needs at least one agent"});

  std::set<std::string> seen;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    std::string where = "/agents/" + std::to_string(i);
    check_agent(*agents[i], where, config, out);
    if (!agents[i]->id.empty() && !seen.insert(agents[i]->id).second) {
      out.push_back({where + "/id", "duplicate agent id '" + agents[i]->id + "'"});
    }
    if (agents[i]->id == "gate") {
      out.push_back({where + "/id", "agent id 'gate' is reserved"});
    }
    if (config.moderator && agents[i]->id == config.moderator->id) {
      out.push_back({where + "/id", "agent id '" + agents[i]->id + "' is used by the moderator"});
    }
  }

  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Chain> || std::is_same_v<T, Debate> ||
                      std::is_same_v<T, Custom>) {
          check_last_n(v.last_n, out);
        }
        if constexpr (std::is_same_v<T, Custom>) {
          if (v.type.empty()) out.push_back({"/type", "structure type must be non-empty"});
        }
        if constexpr (std::is_same_v<T, Graph>) {
          if (config.cycles != 1) {
            out.push_back({"/cycles", "graph structures run exactly one cycle"});
          }
          std::set<std::pair<std::string, std::string>> edge_set;
          bool edges_ok = true;
          for (std::size_t i = 0; i < v.edges.size(); ++i) {
            const auto& e = v.edges[i];
            std::string where = "/edges/" + std::to_string(i);
            for (const auto* end : {&e.from, &e.to}) {
              if (!seen.count(*end)) {
                out.push_back({where, "edge references unknown agent '" + *end + "'"});
                edges_ok = false;
              }
            }
            if (!edge_set.insert({e.from, e.to}).second) {
              out.push_back({where, "duplicate edge " + e.from + " -> " + e.to});
            }
          }
          if (edges_ok && seen.size() == agents.size()) {
            std::vector<std::string> ids(seen.begin(), seen.end());
            try {
              topological_order(ids, v.edges);
            } catch (const CycleDetected& e) {
              out.push_back({"/edges", e.what()});
            }
          }
        }
      },
      config.variant);

  if (config.moderator) {
    const auto& m = *config.moderator;
    if (m.id.empty() || m.id.find('#') != std::string::npos) {
      out.push_back({"/moderator/id", "moderator id must be non-empty and free of '#'"});
    }
    if (m.combination_instructions.kind() != templates::TemplateKind::Moderator) {
      out.push_back({"/moderator/combination_instructions",
                     "template '" + m.combination_instructions.name() +
                         "' is not a moderator template"});
    }
    if (const auto* t = std::get_if<moderation::TemplateProfile>(&m.profile)) {
      if (!templates::moderator_profile(t->name)) {
        out.push_back({"/moderator/system_instructions",
                       "unknown moderator profile '" + t->name + "'"});
      }
    }
    if (!(m.task && !m.task->empty()) && !(config.task && !config.task->empty())) {
      out.push_back({"/moderator/task", "moderator has no task and the structure provides none"});
    }
  }
  if (config.gate) {
    if (config.gate->values.empty()) out.push_back({"/gate/values", "gate values must be non-empty"});
    if (!config.task || config.task->empty()) {
      out.push_back({"/task", "a gated structure needs a structure-level task"});
    }
  }
  return out;
}

void validate(const StructureConfig& config) {
  if (const auto* g = std::get_if<Graph>(&config.variant)) {
    std::vector<std::string> ids;
    for (const auto& a : g->agents) ids.push_back(a.id);
    std::set<std::string> known(ids.begin(), ids.end());
    bool edges_known = known.size() == ids.size();
    for (const auto& e : g->edges) edges_known = edges_known && known.count(e.from) && known.count(e.to);
    if (edges_known) topological_order(ids, g->edges);  // throws CycleDetected
  }
  auto problems = check(config);
  if (problems.empty()) return;
  std::ostringstream msg;
  msg << "invalid structure:";
  for (const auto& p : problems) msg << "\n  " << (p.where.empty() ? "/" : p.where) << ": " << p.message;
  throw Error(ErrorCode::InvalidConfig, msg.str());
}

}  // namespace ensemblage::structures
