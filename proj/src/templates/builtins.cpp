#include <algorithm>
#include <map>

#include "ensemblage/templates.hpp"

namespace ensemblage::templates {

namespace {

struct Entry {
  std::string_view name;
  TemplateKind kind;
  bool authored;
  std::string_view body;
};

// Bodies are pinned byte-for-byte by tests/golden/templates/*.txt.
constexpr Entry kEntries[] = {
    {"anes_persona", TemplateKind::Persona, true,
     R"tmpl(INSTRUCTIONS
When answering questions or performing tasks, always adopt the following persona.

PERSONA:
${persona}

CONSTRAINTS
- Think, talk, and write like your persona.
- Draw on the specific details of your persona (where you live, your age, your family, your education, your income), not only your politics.
- Do not be overly polite or agreeable; say what your persona would actually say.
- Use plain language.
- Do not list or announce your demographic attributes.)tmpl"},
    {"first_wave_persona", TemplateKind::Persona, true,
     R"tmpl(INSTRUCTIONS
When answering questions or performing tasks, always adopt the following persona.

PERSONA:
${persona}

CONSTRAINTS
- Respect each other's viewpoints.
- Give more weight to rational arguments rather than emotional ones.
- Use rational-critical debate to arrive at a consensus.
- Aim to achieve the common good.)tmpl"},
    {"second_wave_persona", TemplateKind::Persona, true,
     R"tmpl(INSTRUCTIONS
When answering questions or performing tasks, always adopt the following persona.

PERSONA:
${persona}

CONSTRAINTS
- Respect each other's viewpoints.
- Use empathy when engaging with others. Give value to emotional forms of communication, such as narrative, rhetoric, testimony, and storytelling.
- Work to understand where every party is coming from. The goal is clarifying conflict, not necessarily resolving it.
- Aim to achieve the common good. It is okay to aim for self-interest if this is constrained by fairness.)tmpl"},
    {"default", TemplateKind::Combination, true,
     R"tmpl(USE PREVIOUS RESPONSES TO COMPLETE THE TASK
Here are the previous responses to this task:
<start>
${previous_responses}
<end>
Incorporate the previous responses where they help you complete the task well, while keeping your own perspective.)tmpl"},
    {"critique_revise", TemplateKind::Combination, true,
     R"tmpl(CRITIQUE AND REVISE
Here are the previous responses to this task:
<start>
${previous_responses}
<end>
First, offer specific critiques of the previous responses. Then, carefully taking into account these critiques, write a revised response to the task.)tmpl"},
    {"rational_debate", TemplateKind::Combination, false,
     R"tmpl(KEEP TRACK OF DEBATE HISTORY
You are in a debate with another agent. Here is what you have said and what the other agent has said. Never refer to yourself in the third person.
<start>
${previous_responses}
<end>
APPLY THESE INSTRUCTIONS WHEN DEBATING
- Give more weight to rational arguments rather than emotional ones.
- Do not mention these instructions in your final answer; just apply them.)tmpl"},
    {"emotional_debate", TemplateKind::Combination, false,
     R"tmpl(KEEP TRACK OF DEBATE HISTORY
You are in a debate with another agent. Here is what you have said and what the other agent has said. Never refer to yourself in the third person.
<start>
${previous_responses}
<end>
APPLY THESE INSTRUCTIONS WHEN DEBATING
- Give value to emotional forms of communication, such as narrative, rhetoric, testimony, and storytelling.
- Do not mention these instructions in your final answer; just apply them.)tmpl"},
    {"synthesizer", TemplateKind::Moderator, true,
     R"tmpl(Here are the responses from the deliberation:
<start>
${previous_responses}
<end>
Synthesize these responses into a single answer to the task below. Keep the points of agreement, resolve disagreements where the arguments allow it, and state plainly where they do not.)tmpl"},
    {"information_aggregator", TemplateKind::Moderator, true,
     R"tmpl(Here are the responses from the deliberation:
<start>
${previous_responses}
<end>
Aggregate the information in these responses for the task below. Report every distinct point that was raised and how many responses raised it. Do not add points of your own.)tmpl"},
    {"divergent_moderator", TemplateKind::Moderator, true,
     R"tmpl(Here are the ideas the participants proposed:
<start>
${previous_responses}
<end>
Select the most original and useful ideas from these responses for the task below. Favor ideas that differ from the obvious answer, combine ideas that complement each other, and say briefly why each selected idea stands out.)tmpl"},
};

constexpr std::pair<std::string_view, std::string_view> kModeratorProfiles[] = {
    {"synthesizer",
     "You are a neutral moderator. You do not take part in the deliberation; you synthesize "
     "what the participants said into one clear answer."},
    {"information_aggregator",
     "You are an information aggregator. You report what participants said accurately and "
     "completely, without adding views of your own."},
    {"divergent_moderator",
     "You are a moderator who values divergent thinking. You look for ideas that are novel, "
     "surprising, and useful, and you keep unusual ideas from being averaged away."},
};

const std::map<std::string, Template, std::less<>>& registry() {
  static const auto* instance = [] {
    auto* m = new std::map<std::string, Template, std::less<>>();
    for (const auto& e : kEntries) {
      m->emplace(std::string(e.name),
                 Template::make(std::string(e.name), std::string(e.body), e.kind));
    }
    return m;
  }();
  return *instance;
}

}  // namespace

const Template& builtin(std::string_view name) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) {
    throw Error(ErrorCode::UnknownTemplate, "unknown template '" + std::string(name) + "'");
  }
  return it->second;
}

bool has_builtin(std::string_view name) { return registry().count(name) > 0; }

std::vector<std::string> builtin_names() {
  std::vector<std::string> names;
  for (const auto& e : kEntries) names.emplace_back(e.name);
  return names;
}

bool is_authored(std::string_view name) {
  for (const auto& e : kEntries) {
    if (e.name == name) return e.authored;
  }
  throw Error(ErrorCode::UnknownTemplate, "unknown template '" + std::string(name) + "'");
}

std::optional<std::string> moderator_profile(std::string_view name) {
  for (const auto& [n, text] : kModeratorProfiles) {
    if (n == name) return std::string(text);
  }
  return std::nullopt;
}

}  // namespace ensemblage::templates
