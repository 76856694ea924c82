#include <ostream>

#include "ensemblage/config.hpp"

namespace ensemblage::config {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const BackendError*>(&error)) return kExitBackend;
  const auto* e = dynamic_cast<const Error*>(&error);
  if (!e) return kExitFailure;
  switch (e->code()) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::CycleDetected:
    case ErrorCode::DuplicateName:
    case ErrorCode::UnknownStructure:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::InvalidTemplate:
    case ErrorCode::UnknownPlaceholder:
    case ErrorCode::MissingTask:
    case ErrorCode::Schema:
    case ErrorCode::CodebookMismatch:
    case ErrorCode::UnknownColumn:
    case ErrorCode::TypeMismatch:
    case ErrorCode::UnknownLabel:
    case ErrorCode::QuerySyntax:
    case ErrorCode::EmptyDataset:
    case ErrorCode::Parse:
    case ErrorCode::SchemaVersionUnsupported:
      return kExitValidation;
    default:
      return kExitFailure;
  }
}

std::shared_ptr<llm::Backend> default_backend(const RunSpec& spec, bool force_mock) {
  if (force_mock || spec.provider == "mock") {
    return llm::make_mock_backend(spec.mock.value_or(llm::MockMode{llm::HashEchoMode{}}));
  }
  return std::make_shared<llm::OpenAICompatibleBackend>(llm::http_config_from_env(spec.provider),
                                                        llm::RetryPolicy{});
}

namespace {

json error_json(const std::exception& e) {
  json j{{"error", "InternalError"}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) j["error"] = std::string(to_string(err->code()));
  if (const auto* b = dynamic_cast<const BackendError*>(&e); b && !b->agent_id().empty()) {
    j["agent_id"] = b->agent_id();
  }
  if (const auto* v = dynamic_cast<const ValidationFailed*>(&e)) {
    json diags = json::array();
    for (const auto& d : v->diagnostics()) diags.push_back({{"at", d.pointer}, {"message", d.message}});
    j["diagnostics"] = diags;
  }
  return j;
}

}  // namespace

RunOutcome run(const fs::path& spec_path, const RunOptions& options, const BackendFactory& factory,
               std::ostream& out, std::ostream& err,
               const structures::StructureRegistry& registry) {
  RunOutcome outcome;
  RunSpec spec;
  std::optional<persona::PersonaDataset> dataset;
  try {
    auto resolved = resolve_spec_path(spec_path);
    auto doc = read_json_file(resolved);
    std::vector<Diagnostic> diags;
    spec = run_spec_from_json(doc, resolved.parent_path(), diags);
    if (options.seed) {
      spec.seed = *options.seed;
      spec.structure.seed = *options.seed;
    }
    if (options.dataset) spec.dataset_path = *options.dataset;
    if (options.codebook) spec.codebook_path = *options.codebook;
    if (options.output) spec.output_path = *options.output;
    if (options.force_mock && !spec.mock) spec.mock = llm::HashEchoMode{};
    for (auto& d : check_registry(spec, registry)) diags.push_back(std::move(d));
    if (diags.empty()) {
      for (auto& d : check_dataset_refs(spec, dataset)) diags.push_back(std::move(d));
    }
    if (!diags.empty()) throw ValidationFailed(std::move(diags));
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code_for(e);
    outcome.error = e.what();
    err << error_json(e).dump() << '\n';
    return outcome;
  }

  fs::path trace_path = spec.output_path.value_or(fs::path(spec.name + ".trace.json"));
  std::shared_ptr<llm::Backend> backend;
  try {
    backend = factory(spec, options.force_mock);
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code_for(e);
    outcome.error = e.what();
    err << error_json(e).dump() << '\n';
    return outcome;
  }

  structures::ProcessOptions popts;
  popts.parallel = options.parallel;
  popts.registry = &registry;
  popts.snapshot = run_spec_to_json(spec);
  structures::Deliberation deliberation(spec.structure, *backend,
                                        dataset ? &*dataset : nullptr, popts);
  try {
    auto result = deliberation.run();
    outcome.trace = result.trace;
    outcome.exit_code = result.rejected() ? kExitGateReject : kExitOk;
  } catch (const std::exception& e) {
    outcome.trace = deliberation.failed_trace(e);
    outcome.exit_code = exit_code_for(e);
    outcome.error = e.what();
    err << error_json(e).dump() << '\n';
  }

  try {
    write_trace(trace_path, *outcome.trace);
    outcome.trace_path = trace_path;
  } catch (const std::exception& e) {
    err << error_json(e).dump() << '\n';
    if (outcome.exit_code == kExitOk) outcome.exit_code = kExitFailure;
  }

  if (outcome.exit_code == kExitOk) {
    out << outcome.trace->final_response << '\n';
  } else if (outcome.exit_code == kExitGateReject && outcome.trace->gate) {
    out << json{{"decision", "REJECT"}, {"rationale", outcome.trace->gate->rationale}}.dump() << '\n';
  }
  return outcome;
}

}  // namespace ensemblage::config
