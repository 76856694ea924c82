#include <algorithm>

#include "ensemblage/templates.hpp"

namespace ensemblage::templates {

namespace {

constexpr std::string_view kAllowed[] = {"persona", "previous_responses", "task"};

bool allowed(std::string_view name) {
  return std::find(std::begin(kAllowed), std::end(kAllowed), name) != std::end(kAllowed);
}

template <typename OnText, typename OnSlot>
void scan(std::string_view body, OnText on_text, OnSlot on_slot) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto open = body.find("${", pos);
    if (open == std::string_view::npos) {
      on_text(body.substr(pos));
      return;
    }
    on_text(body.substr(pos, open - pos));
    auto close = body.find('}', open + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::UnknownPlaceholder, "unterminated placeholder in template");
    }
    auto name = body.substr(open + 2, close - open - 2);
    if (!allowed(name)) {
      throw Error(ErrorCode::UnknownPlaceholder, "unknown placeholder ${" + std::string(name) + "}");
    }
    on_slot(name);
    pos = close + 1;
  }
}

}  // namespace

std::string_view to_string(TemplateKind kind) noexcept {
  switch (kind) {
    case TemplateKind::Persona: return "persona";
    case TemplateKind::Combination: return "combination";
    case TemplateKind::Moderator: return "moderator";
  }
  return "?";
}

TemplateKind parse_kind(std::string_view text) {
  if (text == "persona") return TemplateKind::Persona;
  if (text == "combination") return TemplateKind::Combination;
  if (text == "moderator") return TemplateKind::Moderator;
  throw Error(ErrorCode::InvalidTemplate, "unknown template kind '" + std::string(text) + "'");
}

std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> out;
  scan(body, [](std::string_view) {}, [&](std::string_view name) { out.emplace_back(name); });
  return out;
}

Template Template::make(std::string name, std::string body, TemplateKind kind) {
  auto slots = placeholders(body);
  auto count = [&](std::string_view n) { return std::count(slots.begin(), slots.end(), n); };
  const std::string where = "template '" + name + "' (" + std::string(to_string(kind)) + ")";
  switch (kind) {
    case TemplateKind::Persona:
      if (count("persona") != 1) {
        throw Error(ErrorCode::InvalidTemplate, where + " must contain ${persona} exactly once");
      }
      if (count("task") || count("previous_responses")) {
        throw Error(ErrorCode::InvalidTemplate, where + " may only use ${persona}");
      }
      break;
    case TemplateKind::Combination:
    case TemplateKind::Moderator:
      if (count("previous_responses") < 1) {
        throw Error(ErrorCode::InvalidTemplate, where + " must contain ${previous_responses}");
      }
      break;
  }
  return Template(std::move(name), std::move(body), kind);
}

std::string render_text(std::string_view body, const Binding& binding) {
  std::string out;
  out.reserve(body.size());
  scan(
      body, [&](std::string_view text) { out.append(text); },
      [&](std::string_view name) {
        const std::optional<std::string>* value =
            name == "persona" ? &binding.persona
            : name == "task"  ? &binding.task
                              : &binding.previous_responses;
        if (!*value) {
          throw Error(ErrorCode::MissingBinding, "no binding for ${" + std::string(name) + "}");
        }
        out.append(**value);
      });
  return out;
}

std::string render(const Template& tmpl, const Binding& binding) {
  return render_text(tmpl.body(), binding);
}

std::string format_previous_responses(std::span<const PriorResponse> turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i) out += '\n';
    out += "Response " + std::to_string(i + 1);
    if (turns[i].speaker_tag) out += " ([" + *turns[i].speaker_tag + "])";
    out += ": ";
    out += turns[i].text;
  }
  return out;
}

}  // namespace ensemblage::templates
