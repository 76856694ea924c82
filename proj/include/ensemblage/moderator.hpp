#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>

#include "ensemblage/agent.hpp"

namespace ensemblage::moderation {

/// The moderator writes its own system instructions from the task.
struct AutoProfile {};
/// System instructions of a built-in moderator, e.g. "synthesizer".
struct TemplateProfile {
  std::string name;
};

using ModeratorProfile = std::variant<NoProfile, DirectProfile, AutoProfile, TemplateProfile>;

struct ModeratorSpec {
  std::string id = "moderator";
  ModeratorProfile profile = NoProfile{};
  templates::Template combination_instructions = templates::builtin("synthesizer");
  /// Absent: inherit the structure's task.
  std::optional<std::string> task;
  std::string model_id;
  ModelParams params;
};

/// Meta prompt asking for moderator instructions; wording authored for this
/// project.
std::string auto_moderator_prompt(const std::string& task);

/// The moderator's own task, else the structure's. Throws MissingTask.
std::string moderator_task(const ModeratorSpec& spec,
                           const std::optional<std::string>& structure_task);

/// One meta completion; the returned record's response_text is the resolved
/// system instructions.
TurnRecord resolve_auto_instructions(const ModeratorSpec& spec, const std::string& task,
                                     llm::Backend& backend);

/// Direct/template/no profile resolved without a backend call. Throws
/// Error(InvalidConfig) for Auto (use resolve_auto_instructions) and
/// Error(UnknownTemplate) for an unknown built-in.
std::optional<std::string> static_instructions(const ModeratorSpec& spec);

/// One completion over every agent turn. Throws Error(EmptyDeliberation) when
/// `turns` is empty.
TurnRecord aggregate(const ModeratorSpec& spec, const std::optional<std::string>& system_instructions,
                     std::span<const TurnRecord> turns, const std::string& task,
                     llm::Backend& backend);

/// Auto resolution (at most once) followed by aggregation. Returns the
/// moderator turns in order: [meta,] aggregation.
std::vector<TurnRecord> moderate(const ModeratorSpec& spec, std::span<const TurnRecord> agent_turns,
                                 const std::optional<std::string>& structure_task,
                                 llm::Backend& backend);

// ---------------------------------------------------------------------------
// Value gate

enum class Decision { Accept, Reject };

std::string_view to_string(Decision d) noexcept;

struct GateDecision {
  Decision decision = Decision::Reject;
  std::string rationale;
  std::string raw_completion;

  bool operator==(const GateDecision&) const = default;
};

/// Named value sets: "environmental" and "physical".
std::optional<std::string> builtin_values(std::string_view name);

/// Accept/reject prompt: instructions, the value set, the expected output
/// format, then the task.
std::string gate_prompt(const std::string& values_profile, const std::string& task);

/// Last line matching `Decision:\s*(ACCEPT|REJECT)` (case-insensitive) wins;
/// the rationale is the text after `Rationale:` up to that line. Throws
/// Error(UnparseableDecision) when no line matches.
GateDecision parse_gate_decision(const std::string& completion);

struct GateSpec {
  std::string values;  // value-set text (already resolved from a name)
  std::string model_id;
  ModelParams params;
};

struct GateOutcome {
  GateDecision decision;
  TurnRecord turn;
};

/// The gate completion alone, not yet parsed.
TurnRecord gate_turn(const GateSpec& spec, const std::string& task, llm::Backend& backend);

/// Throws Error(InvalidConfig) for empty values or task.
GateOutcome gate(const GateSpec& spec, const std::string& task, llm::Backend& backend);

}  // namespace ensemblage::moderation
