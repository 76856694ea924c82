#include <chrono>
#include <ctime>

#include "ensemblage/agent.hpp"

namespace ensemblage {

bool needs_dataset(const Profile& profile) {
  const auto* p = std::get_if<PersonaProfile>(&profile);
  return p && !std::holds_alternative<DirectPersona>(p->source);
}

std::string_view to_string(TurnRole role) noexcept {
  switch (role) {
    case TurnRole::Agent: return "agent";
    case TurnRole::Moderator: return "moderator";
    case TurnRole::ModeratorMeta: return "moderator_meta";
    case TurnRole::Gate: return "gate";
  }
  return "?";
}

TurnRole parse_turn_role(std::string_view text) {
  if (text == "agent") return TurnRole::Agent;
  if (text == "moderator") return TurnRole::Moderator;
  if (text == "moderator_meta") return TurnRole::ModeratorMeta;
  if (text == "gate") return TurnRole::Gate;
  throw Error(ErrorCode::Parse, "unknown turn role '" + std::string(text) + "'");
}

bool TurnRecord::same_content(const TurnRecord& other) const {
  TurnRecord a = *this, b = other;
  a.timestamp.clear();
  b.timestamp.clear();
  return a == b;
}

std::optional<std::string> resolve_profile(const AgentSpec& spec,
                                           const persona::PersonaDataset* dataset, Rng& rng) {
  if (std::holds_alternative<NoProfile>(spec.profile)) return std::nullopt;
  if (const auto* d = std::get_if<DirectProfile>(&spec.profile)) return d->system_instructions;

  const auto& p = std::get<PersonaProfile>(spec.profile);
  std::string persona_text;
  if (const auto* direct = std::get_if<DirectPersona>(&p.source)) {
    persona_text = direct->text;
  } else {
    if (dataset == nullptr) {
      throw Error(ErrorCode::InvalidConfig,
                  "agent '" + spec.id + "' samples a persona but no dataset is loaded");
    }
    persona::PersonaRecord record;
    if (const auto* q = std::get_if<QueryPersona>(&p.source)) {
      auto subset = persona::filter(*dataset, persona::parse_query(q->query));
      record = persona::sample_weighted(subset, rng);
    } else if (const auto* ideo = std::get_if<IdeologyPersona>(&p.source)) {
      record = persona::ideology_shortcut(*dataset, ideo->label, rng);
    } else {
      record = persona::sample_weighted(*dataset, rng);
    }
    persona_text = persona::render_persona(record, dataset->codebook());
  }
  return templates::render(p.persona_template, {.persona = persona_text});
}

ResolvedAgent resolve_agent(AgentSpec spec, const persona::PersonaDataset* dataset, Rng& rng) {
  auto system = resolve_profile(spec, dataset, rng);
  return ResolvedAgent{std::move(spec), std::move(system)};
}

std::string effective_task(const AgentSpec& spec, const std::optional<std::string>& structure_task) {
  if (spec.task && !spec.task->empty()) return *spec.task;
  if (structure_task && !structure_task->empty()) return *structure_task;
  throw MissingTask("agent '" + spec.id + "' has no task and the structure provides none");
}

std::string build_prompt(const AgentSpec& spec, const std::optional<std::string>& structure_task,
                         std::span<const VisibleTurn> visible) {
  std::string task = effective_task(spec, structure_task);
  if (visible.empty()) return task;

  std::vector<templates::PriorResponse> prior;
  prior.reserve(visible.size());
  for (const auto& v : visible) prior.push_back({v.speaker_tag, v.text});
  std::string block = templates::format_previous_responses(prior);
  std::string combined = templates::render(spec.combination_instructions,
                                           {.previous_responses = block, .task = task});
  return combined + "\n\n" + task;
}

std::string utc_timestamp() {
  using namespace std::chrono;
  auto now = system_clock::now();
  auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string turn_id_for(std::string_view agent_id, int cycle_index) {
  return std::string(agent_id) + "#" + std::to_string(cycle_index);
}

llm::ModelRequest make_request(const std::string& model_id,
                               const std::optional<std::string>& system_instructions,
                               std::string user_message, const ModelParams& params) {
  llm::ModelRequest req;
  req.model_id = model_id;
  req.system_instructions = system_instructions;
  req.user_message = std::move(user_message);
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  req.extra_params = params.extra;
  return req;
}

TurnRecord take_turn(const ResolvedAgent& agent, const std::optional<std::string>& structure_task,
                     std::span<const VisibleTurn> visible, llm::Backend& backend,
                     int cycle_index) {
  TurnRecord record;
  record.turn_id = turn_id_for(agent.spec.id, cycle_index);
  record.agent_id = agent.spec.id;
  record.role = TurnRole::Agent;
  record.cycle_index = cycle_index;
  record.system_instructions_sent = agent.system_instructions;
  record.user_prompt_sent = build_prompt(agent.spec, structure_task, visible);
  for (const auto& v : visible) record.visible_turn_ids.push_back(v.turn_id);
  record.model_id = agent.spec.model_id;

  auto request = make_request(agent.spec.model_id, agent.system_instructions,
                              record.user_prompt_sent, agent.spec.params);
  try {
    auto response = backend.complete(request);
    record.response_text = std::move(response.text);
    record.attempt_count = response.attempt_count;
  } catch (BackendError& e) {
    e.set_agent_id(agent.spec.id);
    throw;
  }
  record.timestamp = utc_timestamp();
  return record;
}

}  // namespace ensemblage
