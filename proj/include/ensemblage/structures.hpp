#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ensemblage/agent.hpp"
#include "ensemblage/moderator.hpp"

namespace ensemblage::structures {

struct Ensemble {
  std::vector<AgentSpec> agents;
};

struct Chain {
  std::vector<AgentSpec> agents;
  bool shuffle = false;
  std::optional<int> last_n;  // absent: unlimited
};

struct Debate {
  AgentSpec agent_a;
  AgentSpec agent_b;
  std::optional<int> last_n;
};

struct Edge {
  std::string from;
  std::string to;
  bool operator==(const Edge&) const = default;
};

struct Graph {
  std::vector<AgentSpec> agents;
  std::vector<Edge> edges;
};

/// A structure registered by name at runtime.
struct Custom {
  std::string type;
  std::vector<AgentSpec> agents;
  bool shuffle = false;
  std::optional<int> last_n;
};

using Variant = std::variant<Ensemble, Chain, Debate, Graph, Custom>;

struct StructureConfig {
  Variant variant;
  int cycles = 1;
  std::optional<std::string> task;
  std::optional<moderation::ModeratorSpec> moderator;
  /// Checked before the structure runs; a reject means no agent is called.
  std::optional<moderation::GateSpec> gate;
  std::uint64_t seed = 0;
};

std::string type_name(const StructureConfig& config);
std::vector<const AgentSpec*> agents_of(const StructureConfig& config);

struct Problem {
  std::string where;  // JSON pointer relative to the structure object
  std::string message;
};

/// Every structural problem at once. Cycles in a Graph are reported here too.
std::vector<Problem> check(const StructureConfig& config);

/// Throws CycleDetected for a cyclic Graph, Error(InvalidConfig) listing all
/// other problems.
void validate(const StructureConfig& config);

// ---------------------------------------------------------------------------
// Scheduling

/// shuffle=false: input order. shuffle=true: seeded permutation of `ids`.
std::vector<std::string> chain_order(std::span<const std::string> ids, bool shuffle, Rng& rng);

/// Per-cycle stream used by chain_order inside process().
Rng shuffle_rng(std::uint64_t seed, int cycle_index);

struct TopologicalOrder {
  std::vector<std::string> order;  // stages concatenated
  std::vector<std::vector<std::string>> stages;
};

/// Kahn's algorithm in layers; every stage is sorted by id. Throws
/// CycleDetected with one offending cycle, Error(InvalidConfig) for edges
/// naming unknown ids.
TopologicalOrder topological_order(std::span<const std::string> ids, std::span<const Edge> edges);

enum class TagStyle {
  None,
  SelfOnly,  // the viewer's own turns tagged "You"
  YouOther,  // every turn tagged "You" or "Other"
};

/// The most recent min(|history|, last_n) turns, tagged from `viewer`'s side.
std::vector<VisibleTurn> window(std::span<const TurnRecord> history, std::optional<int> last_n,
                                const std::string& viewer, TagStyle style);

/// Turns of the direct predecessors of `node`, in history order, untagged.
std::vector<VisibleTurn> predecessor_turns(std::span<const TurnRecord> history,
                                           std::span<const Edge> edges, const std::string& node);

/// What `agent_id` sees given the chronological history of agent turns.
std::vector<VisibleTurn> visible_turns(const StructureConfig& config, const std::string& agent_id,
                                       std::span<const TurnRecord> history);

// ---------------------------------------------------------------------------
// Traces and results

enum class RunStatus { Ok, Failed, Rejected };

std::string_view to_string(RunStatus s) noexcept;
RunStatus parse_run_status(std::string_view text);

struct TraceError {
  std::string code;
  std::string message;
  std::optional<std::string> agent_id;
  bool operator==(const TraceError&) const = default;
};

inline constexpr int kTraceSchemaVersion = 1;

struct DeliberationTrace {
  int schema_version = kTraceSchemaVersion;
  nlohmann::json config;  // snapshot, includes the seed
  std::vector<TurnRecord> turns;  // gate, agents, then moderator
  std::string final_response;
  bool moderated = false;
  RunStatus status = RunStatus::Ok;
  std::optional<TraceError> error;
  std::optional<moderation::GateDecision> gate;

  bool operator==(const DeliberationTrace&) const = default;
};

struct DeliberationResult {
  std::vector<TurnRecord> responses;  // agent turns, chronological
  std::string final_response;
  bool moderated = false;
  DeliberationTrace trace;

  bool rejected() const { return trace.status == RunStatus::Rejected; }
};

/// Append-only, thread-safe record of completed turns.
class TurnLog {
 public:
  void append(TurnRecord turn);
  std::vector<TurnRecord> snapshot() const;
  std::vector<TurnRecord> agent_turns() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TurnRecord> turns_;
};

// ---------------------------------------------------------------------------
// Executors

struct Job {
  const ResolvedAgent* agent = nullptr;
  std::vector<VisibleTurn> visible;
};

/// What an executor gets. Turns taken through run_turn/run_batch are logged;
/// a backend call that bypasses them breaks trace completeness and fails the
/// run with TraceIncomplete.
class ExecutionContext {
 public:
  ExecutionContext(const StructureConfig& config, llm::Backend& backend,
                   std::span<const ResolvedAgent> agents, TurnLog& log, bool parallel);

  const StructureConfig& config() const { return config_; }
  llm::Backend& backend() { return backend_; }
  std::span<const ResolvedAgent> agents() const { return agents_; }
  const ResolvedAgent& agent(const std::string& id) const;
  /// Agent turns so far, chronological.
  std::vector<TurnRecord> history() const { return log_.agent_turns(); }

  TurnRecord run_turn(const ResolvedAgent& agent, std::span<const VisibleTurn> visible,
                      int cycle_index);

  /// Runs the jobs (concurrently when allowed) and logs them in job order.
  /// On failure, the turns that completed are logged before the first error
  /// is rethrown.
  std::vector<TurnRecord> run_batch(std::span<const Job> jobs, int cycle_index);

 private:
  const StructureConfig& config_;
  llm::Backend& backend_;
  std::span<const ResolvedAgent> agents_;
  TurnLog& log_;
  bool parallel_;
};

using Executor = std::function<void(ExecutionContext&)>;

class StructureRegistry {
 public:
  /// ensemble, chain, debate, graph and persona_chain.
  static StructureRegistry with_builtins();

  /// Throws Error(DuplicateName).
  void register_structure(std::string name, Executor executor);
  const Executor* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  std::vector<std::string> names() const;

 private:
  std::vector<std::pair<std::string, Executor>> entries_;
};

const StructureRegistry& default_registry();

void run_ensemble(ExecutionContext& ctx);
void run_chain(ExecutionContext& ctx);
void run_debate(ExecutionContext& ctx);
void run_graph(ExecutionContext& ctx);
/// Chain whose agents' visible responses carry the speaker's persona.
void run_persona_chain(ExecutionContext& ctx);

// ---------------------------------------------------------------------------
// Running

struct ProcessOptions {
  bool parallel = true;
  const StructureRegistry* registry = nullptr;  // null: default_registry()
  /// Config snapshot to store in the trace; absent: serialized from config.
  std::optional<nlohmann::json> snapshot;
};

/// One run. Keeps the turns recorded so far so a failed run can still be
/// written out.
class Deliberation {
 public:
  Deliberation(StructureConfig config, llm::Backend& backend,
               const persona::PersonaDataset* dataset, ProcessOptions options = {});

  DeliberationResult run();

  /// Trace of the turns completed so far, marked failed.
  DeliberationTrace failed_trace(const std::exception& error) const;

 private:
  StructureConfig config_;
  llm::CountingBackend backend_;
  const persona::PersonaDataset* dataset_;
  ProcessOptions options_;
  TurnLog log_;
  nlohmann::json snapshot_;
};

DeliberationResult process(const StructureConfig& config, llm::Backend& backend,
                           const persona::PersonaDataset* dataset = nullptr,
                           ProcessOptions options = {});

}  // namespace ensemblage::structures
