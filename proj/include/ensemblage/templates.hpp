#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ensemblage/error.hpp"

namespace ensemblage::templates {

enum class TemplateKind { Persona, Combination, Moderator };

std::string_view to_string(TemplateKind kind) noexcept;
/// Throws Error(InvalidTemplate) for anything but persona/combination/moderator.
TemplateKind parse_kind(std::string_view text);

inline constexpr std::string_view kPersonaSlot = "${persona}";
inline constexpr std::string_view kPreviousResponsesSlot = "${previous_responses}";
inline constexpr std::string_view kTaskSlot = "${task}";

/// Validated text with `${persona}`, `${previous_responses}` and `${task}`
/// slots.
///
/// Persona templates hold `${persona}` exactly once and no other slot.
/// Combination and moderator templates hold `${previous_responses}` at least
/// once. No other `${...}` token may appear.
class Template {
 public:
  /// Throws Error(InvalidTemplate) or Error(UnknownPlaceholder).
  static Template make(std::string name, std::string body, TemplateKind kind);

  const std::string& name() const noexcept { return name_; }
  const std::string& body() const noexcept { return body_; }
  TemplateKind kind() const noexcept { return kind_; }

  bool operator==(const Template&) const = default;

 private:
  Template(std::string name, std::string body, TemplateKind kind)
      : name_(std::move(name)), body_(std::move(body)), kind_(kind) {}

  std::string name_;
  std::string body_;
  TemplateKind kind_;
};

struct Binding {
  std::optional<std::string> persona = std::nullopt;
  std::optional<std::string> previous_responses = std::nullopt;
  std::optional<std::string> task = std::nullopt;
};

/// Single-pass substitution; substituted text is not rescanned. Throws
/// Error(MissingBinding) or Error(UnknownPlaceholder).
std::string render(const Template& tmpl, const Binding& binding);
std::string render_text(std::string_view body, const Binding& binding);

/// Names of the `${...}` slots in `body`, in order of appearance.
std::vector<std::string> placeholders(std::string_view body);

struct PriorResponse {
  std::optional<std::string> speaker_tag;
  std::string text;
};

/// "Response N ([tag]): text" per turn (the tag part omitted for untagged
/// turns), chronological, newline separated. Empty input gives "".
std::string format_previous_responses(std::span<const PriorResponse> turns);

/// Frozen built-in registry. Throws Error(UnknownTemplate).
const Template& builtin(std::string_view name);
bool has_builtin(std::string_view name);
std::vector<std::string> builtin_names();

/// True for registry texts written for this project rather than taken from
/// published instruction sets.
bool is_authored(std::string_view name);

/// System instructions paired with a built-in moderator template, e.g. the
/// profile of "synthesizer".
std::optional<std::string> moderator_profile(std::string_view name);

}  // namespace ensemblage::templates
