#include "ensemblage/config.hpp"
#include "ensemblage/structures.hpp"

namespace ensemblage::structures {

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Failed: return "failed";
    case RunStatus::Rejected: return "rejected";
  }
  return "ok";
}

RunStatus parse_run_status(std::string_view text) {
  if (text == "ok") return RunStatus::Ok;
  if (text == "failed") return RunStatus::Failed;
  if (text == "rejected") return RunStatus::Rejected;
  throw Error(ErrorCode::Parse, "unknown run status '" + std::string(text) + "'");
}

Deliberation::Deliberation(StructureConfig config, llm::Backend& backend,
                           const persona::PersonaDataset* dataset, ProcessOptions options)
    : config_(std::move(config)),
      backend_(backend),
      dataset_(dataset),
      options_(std::move(options)) {
  snapshot_ = options_.snapshot ? *options_.snapshot : config::structure_to_json(config_);
}

DeliberationResult Deliberation::run() {
  if (log_.size() != 0 || backend_.count() != 0) {
    throw Error(ErrorCode::InvalidConfig, "a Deliberation runs once");
  }
  validate(config_);
  const auto& registry = options_.registry ? *options_.registry : default_registry();
  std::string type = type_name(config_);
  const Executor* executor = registry.find(type);
  if (!executor) throw Error(ErrorCode::UnknownStructure, "no structure named '" + type + "'");

  auto specs = agents_of(config_);
  for (const auto* spec : specs) {
    if (needs_dataset(spec->profile) && !dataset_) {
      throw Error(ErrorCode::InvalidConfig,
                  "agent '" + spec->id + "' samples a persona but no dataset was given");
    }
  }

  DeliberationResult result;
  result.trace.config = snapshot_;

  if (config_.gate) {
    auto turn = moderation::gate_turn(*config_.gate, *config_.task, backend_);
    log_.append(turn);
    result.trace.gate = moderation::parse_gate_decision(turn.response_text);
    if (result.trace.gate->decision == moderation::Decision::Reject) {
      result.trace.turns = log_.snapshot();
      result.trace.status = RunStatus::Rejected;
      return result;
    }
  }

  // Personas come from per-agent streams so they do not depend on the order
  // or timing of anything else.
  std::vector<ResolvedAgent> resolved;
  resolved.reserve(specs.size());
  for (const auto* spec : specs) {
    Rng rng = derive_rng(config_.seed, "persona:" + spec->id);
    resolved.push_back(resolve_agent(*spec, dataset_, rng));
  }

  ExecutionContext ctx(config_, backend_, resolved, log_, options_.parallel);
  (*executor)(ctx);

  result.responses = log_.agent_turns();
  if (result.responses.empty()) {
    throw Error(ErrorCode::EmptyDeliberation, "structure '" + type + "' produced no agent turns");
  }

  if (config_.moderator) {
    for (auto& t : moderation::moderate(*config_.moderator, result.responses, config_.task, backend_)) {
      log_.append(std::move(t));
    }
  }

  result.trace.turns = log_.snapshot();
  if (result.trace.turns.size() != backend_.count()) {
    throw Error(ErrorCode::TraceIncomplete,
                "structure '" + type + "' made " + std::to_string(backend_.count()) +
                    " backend calls but recorded " + std::to_string(result.trace.turns.size()) +
                    " turns");
  }
  result.moderated = config_.moderator.has_value();
  result.final_response = result.trace.turns.back().response_text;
  result.trace.final_response = result.final_response;
  result.trace.moderated = result.moderated;
  return result;
}

DeliberationTrace Deliberation::failed_trace(const std::exception& error) const {
  DeliberationTrace trace;
  trace.config = snapshot_;
  trace.turns = log_.snapshot();
  trace.status = RunStatus::Failed;
  TraceError err;
  err.message = error.what();
  if (const auto* e = dynamic_cast<const Error*>(&error)) {
    err.code = std::string(ensemblage::to_string(e->code()));
  } else {
    err.code = "InternalError";
  }
  if (const auto* b = dynamic_cast<const BackendError*>(&error); b && !b->agent_id().empty()) {
    err.agent_id = b->agent_id();
  }
  trace.error = std::move(err);
  for (const auto& t : trace.turns) {
    if (t.role == TurnRole::Gate) {
      try {
        trace.gate = moderation::parse_gate_decision(t.response_text);
      } catch (const Error&) {
      }
    }
  }
  return trace;
}

DeliberationResult process(const StructureConfig& config, llm::Backend& backend,
                           const persona::PersonaDataset* dataset, ProcessOptions options) {
  Deliberation d(config, backend, dataset, std::move(options));
  return d.run();
}

}  // namespace ensemblage::structures
