#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemblage/llm.hpp"
#include "ensemblage/structures.hpp"

namespace ensemblage::config {

struct Diagnostic {
  std::string pointer;  // JSON pointer into the spec document
  std::string message;
  bool operator==(const Diagnostic&) const = default;
};

/// Raised with every problem found in a document.
class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics);

// ---------------------------------------------------------------------------
// Structure documents

struct ParseContext {
  std::string default_model;
  std::filesystem::path base_dir;  // for {"file": ...} template references
  std::string pointer;             // where the structure object sits
};

/// Reads the declarative structure form, collecting every problem instead of
/// stopping at the first. The config is only meaningful when `out` gained no
/// diagnostics.
structures::StructureConfig structure_from_json(const nlohmann::json& doc, const ParseContext& ctx,
                                                std::vector<Diagnostic>& out);

/// Throws ValidationFailed.
structures::StructureConfig structure_from_json(const nlohmann::json& doc,
                                                const ParseContext& ctx = {});

/// Expanded form (replicas unrolled, file templates inlined). Reads back to
/// an equal config.
nlohmann::json structure_to_json(const structures::StructureConfig& config);

nlohmann::json mock_to_json(const llm::MockMode& mode);
llm::MockMode mock_from_json(const nlohmann::json& doc, const std::string& pointer,
                             std::vector<Diagnostic>& out);

// ---------------------------------------------------------------------------
// Run specs

struct RunSpec {
  std::string name;
  std::uint64_t seed = 0;
  std::string provider = "mock";
  std::string model;
  std::optional<llm::MockMode> mock;  // set for provider "mock" or a "mock" block
  std::optional<std::filesystem::path> dataset_path;
  std::optional<std::filesystem::path> codebook_path;
  std::optional<std::filesystem::path> output_path;
  structures::StructureConfig structure;
};

/// Accepts the path as given or with ".json" appended.
std::filesystem::path resolve_spec_path(const std::filesystem::path& path);

/// Throws Error(Parse) when the text is not JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);

RunSpec run_spec_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                           std::vector<Diagnostic>& out);

nlohmann::json run_spec_to_json(const RunSpec& spec);

/// Parse plus every cross-module check: templates, registry names, dataset
/// columns, queries and ideology labels. Touches only local files.
std::vector<Diagnostic> validate_run_spec(const nlohmann::json& doc,
                                          const std::filesystem::path& base_dir,
                                          const structures::StructureRegistry& registry =
                                              structures::default_registry());

/// Loads the dataset when some agent samples a persona and resolves every
/// such persona once with a scratch stream.
std::vector<Diagnostic> check_dataset_refs(const RunSpec& spec,
                                           std::optional<persona::PersonaDataset>& dataset);

std::vector<Diagnostic> check_registry(const RunSpec& spec,
                                       const structures::StructureRegistry& registry);

/// Throws ValidationFailed.
RunSpec load_run_spec(const std::filesystem::path& path,
                      const structures::StructureRegistry& registry =
                          structures::default_registry());

// ---------------------------------------------------------------------------
// Traces

nlohmann::json turn_to_json(const TurnRecord& turn);
TurnRecord turn_from_json(const nlohmann::json& doc);

nlohmann::json trace_to_json(const structures::DeliberationTrace& trace);
/// Throws Error(SchemaVersionUnsupported) or Error(Parse).
structures::DeliberationTrace trace_from_json(const nlohmann::json& doc);

void write_trace(const std::filesystem::path& path, const structures::DeliberationTrace& trace);
structures::DeliberationTrace read_trace(const std::filesystem::path& path);

/// Per turn: agent id, system instructions, prompt, response.
std::string render_transcript(const structures::DeliberationTrace& trace);

// ---------------------------------------------------------------------------
// Running

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitBackend = 3,
  kExitGateReject = 4,
};

/// Maps an error onto the CLI exit codes.
int exit_code_for(const std::exception& error);

using BackendFactory =
    std::function<std::shared_ptr<llm::Backend>(const RunSpec& spec, bool force_mock)>;

/// Mock when forced or when the spec asks for it, else the provider's HTTP
/// backend configured from the environment.
std::shared_ptr<llm::Backend> default_backend(const RunSpec& spec, bool force_mock);

struct RunOptions {
  bool force_mock = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> codebook;
  bool parallel = true;
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::optional<structures::DeliberationTrace> trace;
  std::optional<std::filesystem::path> trace_path;
  std::string error;
};

/// Loads, validates and runs a spec. The trace (partial on failure) is
/// written before returning; final_response goes to `out`, errors to `err`.
RunOutcome run(const std::filesystem::path& spec_path, const RunOptions& options,
               const BackendFactory& factory, std::ostream& out, std::ostream& err,
               const structures::StructureRegistry& registry = structures::default_registry());

}  // namespace ensemblage::config
