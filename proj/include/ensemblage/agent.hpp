#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ensemblage/llm.hpp"
#include "ensemblage/persona.hpp"
#include "ensemblage/random.hpp"
#include "ensemblage/templates.hpp"

namespace ensemblage {

// Persona sources
struct DirectPersona {
  std::string text;  // e.g. "a graphic designer"
};
struct QueryPersona {
  std::string query;  // textual PersonaQuery
};
struct IdeologyPersona {
  std::string label;
};
struct RandomPersona {};

using PersonaSource = std::variant<DirectPersona, QueryPersona, IdeologyPersona, RandomPersona>;

// Profiles
struct NoProfile {};
struct DirectProfile {
  std::string system_instructions;
};
struct PersonaProfile {
  PersonaSource source;
  templates::Template persona_template = templates::builtin("anes_persona");
};

using Profile = std::variant<NoProfile, DirectProfile, PersonaProfile>;

/// True when resolving the profile needs a persona dataset.
bool needs_dataset(const Profile& profile);

struct ModelParams {
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::map<std::string, llm::ParamValue> extra;
};

struct AgentSpec {
  std::string id;
  Profile profile = NoProfile{};
  /// Absent: inherit the structure's task.
  std::optional<std::string> task;
  templates::Template combination_instructions = templates::builtin("default");
  std::string model_id;
  ModelParams params;
};

enum class TurnRole { Agent, Moderator, ModeratorMeta, Gate };

std::string_view to_string(TurnRole role) noexcept;
TurnRole parse_turn_role(std::string_view text);

/// Exactly what one backend call was shown and what it returned.
struct TurnRecord {
  std::string turn_id;
  std::string agent_id;
  TurnRole role = TurnRole::Agent;
  int cycle_index = 0;
  std::optional<std::string> system_instructions_sent;
  std::string user_prompt_sent;
  std::vector<std::string> visible_turn_ids;
  std::string response_text;
  std::string model_id;
  int attempt_count = 1;
  std::string timestamp;  // ISO 8601 UTC

  /// Equality ignoring the timestamp.
  bool same_content(const TurnRecord& other) const;
  bool operator==(const TurnRecord&) const = default;
};

/// A prior turn as it appears in another agent's prompt.
struct VisibleTurn {
  std::string turn_id;
  std::optional<std::string> speaker_tag;
  std::string text;
};

/// AgentSpec with its profile resolved to concrete system instructions.
struct ResolvedAgent {
  AgentSpec spec;
  std::optional<std::string> system_instructions;
};

/// Direct -> verbatim; Persona -> the persona (rendered survey row or given
/// text) placed into the persona template; None -> absent. `dataset` may be
/// null when the profile does not need one.
std::optional<std::string> resolve_profile(const AgentSpec& spec,
                                           const persona::PersonaDataset* dataset, Rng& rng);

ResolvedAgent resolve_agent(AgentSpec spec, const persona::PersonaDataset* dataset, Rng& rng);

/// The agent's own task if set, otherwise the structure task. Throws
/// MissingTask if neither is non-empty.
std::string effective_task(const AgentSpec& spec, const std::optional<std::string>& structure_task);

/// No visible turns: the task alone. Otherwise the combination template
/// rendered with the formatted history, a blank line, then the task.
std::string build_prompt(const AgentSpec& spec, const std::optional<std::string>& structure_task,
                         std::span<const VisibleTurn> visible);

std::string utc_timestamp();

/// One backend completion. Backend errors are rethrown with the agent id
/// attached.
TurnRecord take_turn(const ResolvedAgent& agent, const std::optional<std::string>& structure_task,
                     std::span<const VisibleTurn> visible, llm::Backend& backend,
                     int cycle_index);

std::string turn_id_for(std::string_view agent_id, int cycle_index);

llm::ModelRequest make_request(const std::string& model_id,
                               const std::optional<std::string>& system_instructions,
                               std::string user_message, const ModelParams& params);

}  // namespace ensemblage
