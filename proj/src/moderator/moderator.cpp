#include <regex>

#include "ensemblage/moderator.hpp"

namespace ensemblage::moderation {

namespace {

constexpr std::string_view kAutoPrompt =
    "Given the following task, write concise system instructions for a moderator who will "
    "synthesize multiple responses to it. Task: ${task}. Return only the instructions.";

// Accept/reject instructions; "$CustomValues" is a literal label, not a slot.
constexpr std::string_view kGateHead =
    "INSTRUCTIONS\n"
    "You are an expert large language moderator who only accepts tasks after reflecting if you "
    "should accept or reject them based on whether they violate your $CustomValues.\n"
    "\n"
    "You have no values other than $CustomValues, but you will never complete tasks that can "
    "violate $CustomValues.\n"
    "\n"
    "$CustomValues\n";

constexpr std::string_view kGateTail =
    "\n"
    "\n"
    "Follow the following format.\n"
    "Task: Task to accept or reject\n"
    "Rationale: Considering my $CustomValues, only my $CustomValues, and not any other "
    "values...\n"
    "Decision: ACCEPT or REJECT\n"
    "\n"
    "Task: ";

constexpr std::pair<std::string_view, std::string_view> kValueSets[] = {
    {"environmental",
     "Avoid any and all environmental harms. This includes: biodiversity loss, carbon "
     "emissions, electronic waste, excessive energy consumption, excessive landfill, excessive "
     "water consumption, natural resources extraction, pollution."},
    {"physical",
     "Avoid any and all physical harms. This includes: bodily injury, loss of life, personal "
     "health deterioration, or property damage."},
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string auto_moderator_prompt(const std::string& task) {
  return templates::render_text(kAutoPrompt, {.task = task});
}

std::string moderator_task(const ModeratorSpec& spec,
                           const std::optional<std::string>& structure_task) {
  if (spec.task && !spec.task->empty()) return *spec.task;
  if (structure_task && !structure_task->empty()) return *structure_task;
  throw MissingTask("moderator '" + spec.id + "' has no task and the structure provides none");
}

TurnRecord resolve_auto_instructions(const ModeratorSpec& spec, const std::string& task,
                                     llm::Backend& backend) {
  if (task.empty()) throw MissingTask("auto-moderator needs a non-empty task");
  TurnRecord record;
  record.turn_id = spec.id + "#auto";
  record.agent_id = spec.id;
  record.role = TurnRole::ModeratorMeta;
  record.user_prompt_sent = auto_moderator_prompt(task);
  record.model_id = spec.model_id;
  try {
    auto response = backend.complete(
        make_request(spec.model_id, std::nullopt, record.user_prompt_sent, spec.params));
    record.response_text = std::move(response.text);
    record.attempt_count = response.attempt_count;
  } catch (BackendError& e) {
    e.set_agent_id(spec.id);
    throw;
  }
  record.timestamp = utc_timestamp();
  return record;
}

std::optional<std::string> static_instructions(const ModeratorSpec& spec) {
  return std::visit(
      [&](const auto& p) -> std::optional<std::string> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NoProfile>) {
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, DirectProfile>) {
          return p.system_instructions;
        } else if constexpr (std::is_same_v<T, TemplateProfile>) {
          auto text = templates::moderator_profile(p.name);
          if (!text) {
            throw Error(ErrorCode::UnknownTemplate, "unknown moderator profile '" + p.name + "'");
          }
          return text;
        } else {
          throw Error(ErrorCode::InvalidConfig,
                      "auto profile of '" + spec.id + "' needs a backend call to resolve");
        }
      },
      spec.profile);
}

TurnRecord aggregate(const ModeratorSpec& spec, const std::optional<std::string>& system_instructions,
                     std::span<const TurnRecord> turns, const std::string& task,
                     llm::Backend& backend) {
  if (turns.empty()) {
    throw Error(ErrorCode::EmptyDeliberation, "moderator '" + spec.id + "' has no turns to aggregate");
  }
  std::vector<templates::PriorResponse> prior;
  prior.reserve(turns.size());
  for (const auto& t : turns) prior.push_back({std::nullopt, t.response_text});

  TurnRecord record;
  record.turn_id = spec.id + "#0";
  record.agent_id = spec.id;
  record.role = TurnRole::Moderator;
  record.system_instructions_sent = system_instructions;
  record.user_prompt_sent =
      templates::render(spec.combination_instructions,
                        {.previous_responses = templates::format_previous_responses(prior),
                         .task = task}) +
      "\n\n" + task;
  for (const auto& t : turns) record.visible_turn_ids.push_back(t.turn_id);
  record.model_id = spec.model_id;
  try {
    auto response = backend.complete(
        make_request(spec.model_id, system_instructions, record.user_prompt_sent, spec.params));
    record.response_text = std::move(response.text);
    record.attempt_count = response.attempt_count;
  } catch (BackendError& e) {
    e.set_agent_id(spec.id);
    throw;
  }
  record.timestamp = utc_timestamp();
  return record;
}

std::vector<TurnRecord> moderate(const ModeratorSpec& spec, std::span<const TurnRecord> agent_turns,
                                 const std::optional<std::string>& structure_task,
                                 llm::Backend& backend) {
  if (agent_turns.empty()) {
    throw Error(ErrorCode::EmptyDeliberation, "moderator '" + spec.id + "' has no turns to aggregate");
  }
  std::string task = moderator_task(spec, structure_task);
  std::vector<TurnRecord> out;
  std::optional<std::string> system;
  if (std::holds_alternative<AutoProfile>(spec.profile)) {
    out.push_back(resolve_auto_instructions(spec, task, backend));
    system = out.back().response_text;
  } else {
    system = static_instructions(spec);
  }
  out.push_back(aggregate(spec, system, agent_turns, task, backend));
  return out;
}

std::string_view to_string(Decision d) noexcept {
  return d == Decision::Accept ? "ACCEPT" : "REJECT";
}

std::optional<std::string> builtin_values(std::string_view name) {
  for (const auto& [n, text] : kValueSets) {
    if (n == name) return std::string(text);
  }
  return std::nullopt;
}

std::string gate_prompt(const std::string& values_profile, const std::string& task) {
  std::string out;
  out.reserve(kGateHead.size() + values_profile.size() + kGateTail.size() + task.size());
  out.append(kGateHead).append(values_profile).append(kGateTail).append(task);
  return out;
}

GateDecision parse_gate_decision(const std::string& completion) {
  static const std::regex decision_re(R"(Decision:\s*(ACCEPT|REJECT))", std::regex::icase);
  static const std::regex rationale_re(R"(Rationale:)", std::regex::icase);

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= completion.size()) {
    auto nl = completion.find('\n', start);
    if (nl == std::string::npos) nl = completion.size();
    lines.push_back(completion.substr(start, nl - start));
    start = nl + 1;
  }

  std::optional<std::size_t> decision_line;
  std::string verdict;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    if (std::regex_search(lines[i], m, decision_re)) {
      decision_line = i;
      verdict = m[1].str();
    }
  }
  if (!decision_line) {
    throw Error(ErrorCode::UnparseableDecision, "no 'Decision: ACCEPT|REJECT' line in completion");
  }

  GateDecision out;
  out.raw_completion = completion;
  out.decision = (verdict[0] == 'A' || verdict[0] == 'a') ? Decision::Accept : Decision::Reject;

  std::string before;
  for (std::size_t i = 0; i < *decision_line; ++i) {
    before += lines[i];
    before += '\n';
  }
  // The decision line may also carry text ahead of "Decision:".
  std::smatch m;
  std::regex_search(lines[*decision_line], m, decision_re);
  before += m.prefix().str();

  std::smatch r;
  if (std::regex_search(before, r, rationale_re)) {
    out.rationale = trim(r.suffix().str());
  }
  return out;
}

TurnRecord gate_turn(const GateSpec& spec, const std::string& task, llm::Backend& backend) {
  if (spec.values.empty()) throw Error(ErrorCode::InvalidConfig, "gate values must be non-empty");
  if (task.empty()) throw MissingTask("gate needs a non-empty task");

  TurnRecord record;
  record.turn_id = "gate#0";
  record.agent_id = "gate";
  record.role = TurnRole::Gate;
  record.user_prompt_sent = gate_prompt(spec.values, task);
  record.model_id = spec.model_id;
  try {
    auto response = backend.complete(
        make_request(spec.model_id, std::nullopt, record.user_prompt_sent, spec.params));
    record.response_text = std::move(response.text);
    record.attempt_count = response.attempt_count;
  } catch (BackendError& e) {
    e.set_agent_id("gate");
    throw;
  }
  record.timestamp = utc_timestamp();
  return record;
}

GateOutcome gate(const GateSpec& spec, const std::string& task, llm::Backend& backend) {
  GateOutcome outcome{{}, gate_turn(spec, task, backend)};
  outcome.decision = parse_gate_decision(outcome.turn.response_text);
  return outcome;
}

}  // namespace ensemblage::moderation
