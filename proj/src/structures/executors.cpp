#include <exception>
#include <future>

#include "ensemblage/structures.hpp"

namespace ensemblage::structures {

void TurnLog::append(TurnRecord turn) {
  std::lock_guard lock(mutex_);
  turns_.push_back(std::move(turn));
}

std::vector<TurnRecord> TurnLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return turns_;
}

std::vector<TurnRecord> TurnLog::agent_turns() const {
  std::lock_guard lock(mutex_);
  std::vector<TurnRecord> out;
  for (const auto& t : turns_) {
    if (t.role == TurnRole::Agent) out.push_back(t);
  }
  return out;
}

std::size_t TurnLog::size() const {
  std::lock_guard lock(mutex_);
  return turns_.size();
}

ExecutionContext::ExecutionContext(const StructureConfig& config, llm::Backend& backend,
                                   std::span<const ResolvedAgent> agents, TurnLog& log,
                                   bool parallel)
    : config_(config), backend_(backend), agents_(agents), log_(log), parallel_(parallel) {}

const ResolvedAgent& ExecutionContext::agent(const std::string& id) const {
  for (const auto& a : agents_) {
    if (a.spec.id == id) return a;
  }
  throw Error(ErrorCode::InvalidConfig, "no agent with id '" + id + "'");
}

TurnRecord ExecutionContext::run_turn(const ResolvedAgent& agent,
                                      std::span<const VisibleTurn> visible, int cycle_index) {
  auto turn = take_turn(agent, config_.task, visible, backend_, cycle_index);
  log_.append(turn);
  return turn;
}

std::vector<TurnRecord> ExecutionContext::run_batch(std::span<const Job> jobs, int cycle_index) {
  std::vector<std::optional<TurnRecord>> done(jobs.size());
  std::exception_ptr first_error;

  if (parallel_ && jobs.size() > 1) {
    std::vector<std::future<TurnRecord>> futures;
    futures.reserve(jobs.size());
    for (const auto& job : jobs) {
      futures.push_back(std::async(std::launch::async, [&, j = &job] {
        return take_turn(*j->agent, config_.task, j->visible, backend_, cycle_index);
      }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) {
      try {
        done[i] = futures[i].get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      try {
        done[i] = take_turn(*jobs[i].agent, config_.task, jobs[i].visible, backend_, cycle_index);
      } catch (...) {
        first_error = std::current_exception();
        break;
      }
    }
  }

  std::vector<TurnRecord> out;
  for (auto& t : done) {
    if (!t) continue;
    log_.append(*t);
    out.push_back(std::move(*t));
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void run_ensemble(ExecutionContext& ctx) {
  std::vector<Job> jobs;
  for (const auto& a : ctx.agents()) jobs.push_back({&a, {}});
  for (int c = 0; c < ctx.config().cycles; ++c) ctx.run_batch(jobs, c);
}

void run_chain(ExecutionContext& ctx) {
  const auto& chain = std::get<Chain>(ctx.config().variant);
  std::vector<std::string> ids;
  for (const auto& a : ctx.agents()) ids.push_back(a.spec.id);
  std::vector<TurnRecord> history;
  for (int c = 0; c < ctx.config().cycles; ++c) {
    Rng rng = shuffle_rng(ctx.config().seed, c);
    for (const auto& id : chain_order(ids, chain.shuffle, rng)) {
      auto visible = window(history, chain.last_n, id, TagStyle::SelfOnly);
      history.push_back(ctx.run_turn(ctx.agent(id), visible, c));
    }
  }
}

void run_debate(ExecutionContext& ctx) {
  const auto& debate = std::get<Debate>(ctx.config().variant);
  const auto& a = ctx.agent(debate.agent_a.id);
  const auto& b = ctx.agent(debate.agent_b.id);
  std::vector<TurnRecord> history;
  for (int c = 0; c < ctx.config().cycles; ++c) {
    for (const auto* speaker : {&a, &b}) {
      auto visible = window(history, debate.last_n, speaker->spec.id, TagStyle::YouOther);
      history.push_back(ctx.run_turn(*speaker, visible, c));
    }
  }
}

void run_graph(ExecutionContext& ctx) {
  const auto& graph = std::get<Graph>(ctx.config().variant);
  std::vector<std::string> ids;
  for (const auto& a : ctx.agents()) ids.push_back(a.spec.id);
  auto topo = topological_order(ids, graph.edges);
  std::vector<TurnRecord> history;
  for (const auto& stage : topo.stages) {
    std::vector<Job> jobs;
    for (const auto& id : stage) {
      jobs.push_back({&ctx.agent(id), predecessor_turns(history, graph.edges, id)});
    }
    for (auto& t : ctx.run_batch(jobs, 0)) history.push_back(std::move(t));
  }
}

void run_persona_chain(ExecutionContext& ctx) {
  const auto& custom = std::get<Custom>(ctx.config().variant);
  std::vector<std::string> ids;
  for (const auto& a : ctx.agents()) ids.push_back(a.spec.id);
  std::vector<TurnRecord> history;
  for (int c = 0; c < ctx.config().cycles; ++c) {
    Rng rng = shuffle_rng(ctx.config().seed, c);
    for (const auto& id : chain_order(ids, custom.shuffle, rng)) {
      auto visible = window(history, custom.last_n, id, TagStyle::SelfOnly);
      for (auto& v : visible) {
        for (const auto& t : history) {
          if (t.turn_id != v.turn_id || !t.system_instructions_sent) continue;
          v.text += "\nPersona: " + *t.system_instructions_sent;
        }
      }
      history.push_back(ctx.run_turn(ctx.agent(id), visible, c));
    }
  }
}

StructureRegistry StructureRegistry::with_builtins() {
  StructureRegistry r;
  r.register_structure("ensemble", run_ensemble);
  r.register_structure("chain", run_chain);
  r.register_structure("debate", run_debate);
  r.register_structure("graph", run_graph);
  r.register_structure("persona_chain", run_persona_chain);
  return r;
}

void StructureRegistry::register_structure(std::string name, Executor executor) {
  if (name.empty()) throw Error(ErrorCode::InvalidConfig, "structure name must be non-empty");
  if (!executor) throw Error(ErrorCode::InvalidConfig, "structure '" + name + "' has no executor");
  if (contains(name)) {
    throw Error(ErrorCode::DuplicateName, "structure '" + name + "' is already registered");
  }
  entries_.emplace_back(std::move(name), std::move(executor));
}

const Executor* StructureRegistry::find(std::string_view name) const {
  for (const auto& [n, e] : entries_) {
    if (n == name) return &e;
  }
  return nullptr;
}

std::vector<std::string> StructureRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, e] : entries_) out.push_back(n);
  return out;
}

const StructureRegistry& default_registry() {
  static const StructureRegistry registry = StructureRegistry::with_builtins();
  return registry;
}

}  // namespace ensemblage::structures
