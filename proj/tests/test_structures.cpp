#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "ensemblage/structures.hpp"
#include "support/random_structures.hpp"
#include "support/visibility_oracle.hpp"

using namespace ensemblage;
using namespace ensemblage::llm;
using namespace ensemblage::structures;

namespace {

AgentSpec plain(std::string id, std::optional<std::string> task = std::nullopt) {
  AgentSpec a;
  a.id = id;
  a.model_id = "mock-model";
  a.profile = DirectProfile{"You are " + id + "."};
  a.task = std::move(task);
  return a;
}

std::vector<AgentSpec> plain_agents(std::initializer_list<const char*> ids) {
  std::vector<AgentSpec> out;
  for (auto id : ids) out.push_back(plain(id));
  return out;
}

StructureConfig with_task(Variant v, int cycles = 1) {
  StructureConfig c;
  c.variant = std::move(v);
  c.cycles = cycles;
  c.task = "Describe a park.";
  c.seed = 7;
  return c;
}

Graph critique_graph() {
  Graph g;
  for (auto id : {"init_arguer", "critic_1", "critic_2", "critic_3", "final_arguer"}) {
    g.agents.push_back(plain(id));
  }
  g.edges = {{"init_arguer", "critic_1"},  {"init_arguer", "critic_2"},
             {"init_arguer", "critic_3"},  {"critic_1", "final_arguer"},
             {"critic_2", "final_arguer"}, {"critic_3", "final_arguer"}};
  return g;
}

std::vector<std::string> prompts(const DeliberationTrace& t) {
  std::vector<std::string> out;
  for (const auto& turn : t.turns) out.push_back(turn.user_prompt_sent);
  return out;
}

bool same_turns(const std::vector<TurnRecord>& a, const std::vector<TurnRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_content(b[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("topological_order") {
  SUBCASE("single node") {
    std::vector<std::string> ids{"solo"};
    auto t = topological_order(ids, {});
    CHECK(t.order == ids);
    CHECK(t.stages.size() == 1);
  }
  SUBCASE("critic graph stages") {
    auto g = critique_graph();
    std::vector<std::string> ids;
    for (const auto& a : g.agents) ids.push_back(a.id);
    auto t = topological_order(ids, g.edges);
    using V = std::vector<std::string>;
    REQUIRE(t.stages.size() == 3);
    CHECK(t.stages[0] == V{"init_arguer"});
    CHECK(t.stages[1] == V{"critic_1", "critic_2", "critic_3"});
    CHECK(t.stages[2] == V{"final_arguer"});
    CHECK(t.order == V{"init_arguer", "critic_1", "critic_2", "critic_3", "final_arguer"});
  }
  SUBCASE("two-node cycle") {
    std::vector<std::string> ids{"a", "b"};
    std::vector<Edge> edges{{"a", "b"}, {"b", "a"}};
    try {
      topological_order(ids, edges);
      FAIL("no cycle reported");
    } catch (const CycleDetected& e) {
      CHECK(e.cycle() == std::vector<std::string>{"a", "b"});
      CHECK(std::string(e.what()).find("a -> b -> a") != std::string::npos);
    }
  }
  SUBCASE("reported cycle is a real cycle") {
    std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    std::vector<Edge> edges{{"a", "b"}, {"b", "c"}, {"c", "d"}, {"d", "b"}, {"a", "e"}};
    try {
      topological_order(ids, edges);
      FAIL("no cycle reported");
    } catch (const CycleDetected& e) {
      auto cyc = e.cycle();
      REQUIRE(cyc.size() == 3);
      for (std::size_t i = 0; i < cyc.size(); ++i) {
        Edge step{cyc[i], cyc[(i + 1) % cyc.size()]};
        CHECK(std::find(edges.begin(), edges.end(), step) != edges.end());
      }
    }
  }
  SUBCASE("self loop") {
    std::vector<std::string> ids{"a"};
    std::vector<Edge> edges{{"a", "a"}};
    CHECK_THROWS_AS(topological_order(ids, edges), CycleDetected);
  }
  SUBCASE("unknown id") {
    std::vector<std::string> ids{"a"};
    std::vector<Edge> edges{{"a", "ghost"}};
    CHECK_THROWS_AS(topological_order(ids, edges), Error);
  }
  SUBCASE("random DAGs") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::string> ids;
      auto n = 1 + uniform_index(rng, 9);
      for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string(i));
      auto edges = gen::dag(ids, rng);
      auto t = topological_order(ids, edges);
      REQUIRE(t.order.size() == n);
      std::map<std::string, std::size_t> stage_of, pos;
      for (std::size_t s = 0; s < t.stages.size(); ++s) {
        CHECK(std::is_sorted(t.stages[s].begin(), t.stages[s].end()));
        for (const auto& id : t.stages[s]) stage_of[id] = s;
      }
      for (std::size_t i = 0; i < n; ++i) pos[t.order[i]] = i;
      for (const auto& e : edges) {
        CHECK(pos[e.from] < pos[e.to]);
        CHECK(stage_of[e.from] < stage_of[e.to]);
      }
      // Every node past stage 0 has a predecessor in the stage right before.
      for (const auto& [id, s] : stage_of) {
        if (s == 0) continue;
        bool found = false;
        for (const auto& e : edges) found = found || (e.to == id && stage_of[e.from] == s - 1);
        CHECK(found);
      }
    }
  }
}

TEST_CASE("chain_order") {
  std::vector<std::string> ids{"x", "y", "z"};
  Rng rng(1);
  CHECK(chain_order(ids, false, rng) == ids);

  auto sequence = [&](std::uint64_t seed) {
    std::vector<std::vector<std::string>> out;
    for (int c = 0; c < 20; ++c) {
      Rng r = shuffle_rng(seed, c);
      out.push_back(chain_order(ids, true, r));
    }
    return out;
  };
  CHECK(sequence(5) == sequence(5));
  CHECK(sequence(5) != sequence(6));

  std::map<std::vector<std::string>, int> counts;
  const int cycles = 1000;
  for (int c = 0; c < cycles; ++c) {
    Rng r = shuffle_rng(99, c);
    ++counts[chain_order(ids, true, r)];
  }
  CHECK(counts.size() == 6);
  for (const auto& [perm, k] : counts) {
    CHECK(std::abs(double(k) / cycles - 1.0 / 6.0) <= 0.05);
  }
}

TEST_CASE("windows") {
  std::vector<TurnRecord> history;
  for (int i = 0; i < 5; ++i) {
    TurnRecord t;
    t.turn_id = "t" + std::to_string(i);
    t.agent_id = i % 2 ? "b" : "a";
    t.response_text = "r" + std::to_string(i);
    history.push_back(t);
  }
  auto w = window(history, 2, "a", TagStyle::None);
  REQUIRE(w.size() == 2);
  CHECK(w[0].turn_id == "t3");
  CHECK(w[1].turn_id == "t4");
  CHECK(window(history, std::nullopt, "a", TagStyle::None).size() == 5);
  CHECK(window(history, 9, "a", TagStyle::None).size() == 5);

  auto d = window(std::span(history).first(2), std::nullopt, "a", TagStyle::YouOther);
  CHECK(d[0].speaker_tag == "You");
  CHECK(d[1].speaker_tag == "Other");
  auto c = window(std::span(history).first(2), std::nullopt, "b", TagStyle::SelfOnly);
  CHECK_FALSE(c[0].speaker_tag);
  CHECK(c[1].speaker_tag == "You");

  std::vector<Edge> edges{{"a", "c"}};
  auto p = predecessor_turns(history, edges, "c");
  CHECK(p.size() == 3);
  CHECK(predecessor_turns(history, edges, "a").empty());
}

TEST_CASE("process examples") {
  auto backend = make_mock_backend(HashEchoMode{});

  SUBCASE("ensemble isolation") {
    auto r = process(with_task(Ensemble{plain_agents({"a", "b", "c"})}), *backend);
    REQUIRE(r.responses.size() == 3);
    for (const auto& t : r.responses) {
      CHECK(t.visible_turn_ids.empty());
      CHECK(t.user_prompt_sent == "Describe a park.");
    }
    CHECK_FALSE(r.moderated);
    CHECK(r.final_response == r.responses.back().response_text);
  }
  SUBCASE("chain sees all predecessors") {
    auto r = process(with_task(Chain{plain_agents({"a", "b", "c"}), false, std::nullopt}), *backend);
    REQUIRE(r.responses.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r.responses[i].visible_turn_ids.size() == i);
  }
  SUBCASE("debate alternates") {
    auto c = with_task(Debate{plain("pro"), plain("con"), std::nullopt}, 2);
    auto r = process(c, *backend);
    REQUIRE(r.responses.size() == 4);
    std::vector<std::string> speakers;
    for (const auto& t : r.responses) speakers.push_back(t.agent_id);
    CHECK(speakers == std::vector<std::string>{"pro", "con", "pro", "con"});
    const auto& third = r.responses[2];
    CHECK(third.user_prompt_sent.find("Response 1 ([You]): " + r.responses[0].response_text) != std::string::npos);
    CHECK(third.user_prompt_sent.find("Response 2 ([Other]): " + r.responses[1].response_text) != std::string::npos);
    CHECK(oracle::check(c, r.responses).ok);
  }
  SUBCASE("graph direct predecessors only") {
    auto c = with_task(critique_graph());
    auto r = process(c, *backend);
    REQUIRE(r.responses.size() == 5);
    for (const auto& t : r.responses) {
      if (t.agent_id.starts_with("critic")) CHECK(t.visible_turn_ids == std::vector<std::string>{"init_arguer#0"});
      if (t.agent_id == "final_arguer") {
        CHECK(t.visible_turn_ids ==
              std::vector<std::string>{"critic_1#0", "critic_2#0", "critic_3#0"});
        CHECK(t.user_prompt_sent.find(r.responses[0].response_text) == std::string::npos);
      }
    }
    CHECK(oracle::check(c, r.responses).ok);
  }
  SUBCASE("graph cycle fails before any call") {
    auto g = critique_graph();
    g.edges.push_back({"final_arguer", "init_arguer"});
    CHECK_THROWS_AS(process(with_task(g), *backend), CycleDetected);
    CHECK(backend->calls() == 0);
  }
  SUBCASE("moderator last, sees everything") {
    auto c = with_task(Ensemble{plain_agents({"a", "b", "c"})}, 2);
    moderation::ModeratorSpec m;
    m.model_id = "mock-model";
    m.profile = DirectProfile{"Summarize."};
    c.moderator = m;
    auto r = process(c, *backend);
    REQUIRE(r.trace.turns.size() == 7);
    const auto& last = r.trace.turns.back();
    CHECK(last.role == TurnRole::Moderator);
    CHECK(r.moderated);
    CHECK(r.final_response == last.response_text);
    for (const auto& t : r.responses) {
      CHECK(last.user_prompt_sent.find(t.response_text) != std::string::npos);
    }
  }
}

TEST_CASE("randomized visibility against the oracle") {
  Rng rng(31337);
  auto backend = make_mock_backend(HashEchoMode{});
  for (int trial = 0; trial < 200; ++trial) {
    auto c = gen::structure(rng);
    auto r = process(c, *backend, nullptr, {.parallel = trial % 2 == 0});
    auto verdict = oracle::check(c, r.responses);
    INFO("trial " << trial << " " << type_name(c) << ": " << verdict.why);
    CHECK(verdict.ok);
  }
}

TEST_CASE("determinism and parallel equivalence") {
  Rng rng(8);
  auto backend = make_mock_backend(HashEchoMode{});
  for (int trial = 0; trial < 40; ++trial) {
    auto c = gen::structure(rng);
    auto a = process(c, *backend, nullptr, {.parallel = true});
    auto b = process(c, *backend, nullptr, {.parallel = true});
    auto s = process(c, *backend, nullptr, {.parallel = false});
    CHECK(prompts(a.trace) == prompts(b.trace));
    CHECK(same_turns(a.trace.turns, s.trace.turns));
  }
  SUBCASE("shuffle differs across seeds") {
    auto c = with_task(Chain{plain_agents({"a", "b", "c", "d", "e"}), true, std::nullopt}, 3);
    std::set<std::vector<std::string>> orders;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      c.seed = seed;
      auto r = process(c, *backend);
      std::vector<std::string> order;
      for (const auto& t : r.responses) order.push_back(t.agent_id);
      orders.insert(order);
    }
    CHECK(orders.size() > 1);
  }
}

TEST_CASE("config checks") {
  auto has = [](const std::vector<Problem>& ps, const std::string& where, const std::string& words) {
    for (const auto& p : ps) {
      if (p.where == where && p.message.find(words) != std::string::npos) return true;
    }
    return false;
  };
  auto c = with_task(Chain{plain_agents({"a", "a"}), false, 0}, 0);
  auto ps = check(c);
  CHECK(has(ps, "/cycles", "at least 1"));
  CHECK(has(ps, "/last_n", "at least 1"));
  CHECK(has(ps, "/agents/1/id", "duplicate"));
  CHECK_THROWS_AS(validate(c), Error);

  auto g = with_task(critique_graph(), 2);
  CHECK(has(check(g), "/cycles", "one cycle"));

  auto untasked = with_task(Ensemble{plain_agents({"a"})});
  untasked.task.reset();
  CHECK(has(check(untasked), "/agents/0/task", "no task"));
  std::get<Ensemble>(untasked.variant).agents[0].task = "own";
  CHECK(check(untasked).empty());

  auto bad_template = with_task(Ensemble{plain_agents({"a"})});
  std::get<Ensemble>(bad_template.variant).agents[0].combination_instructions =
      templates::builtin("synthesizer");
  CHECK(has(check(bad_template), "/agents/0/combination_instructions", "not a combination"));
}

TEST_CASE("registry and extension") {
  auto backend = make_mock_backend(HashEchoMode{});
  auto registry = StructureRegistry::with_builtins();
  for (auto name : {"ensemble", "chain", "debate", "graph", "persona_chain"}) CHECK(registry.contains(name));
  try {
    registry.register_structure("chain", run_chain);
    FAIL("duplicate accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateName);
  }

  SUBCASE("persona chain") {
    auto c = with_task(Custom{"persona_chain", plain_agents({"a", "b", "c"}), false, std::nullopt});
    auto r = process(c, *backend, nullptr, {.registry = &registry});
    REQUIRE(r.responses.size() == 3);
    CHECK(r.responses[2].visible_turn_ids.size() == 2);
    CHECK(r.responses[2].user_prompt_sent.find(r.responses[0].response_text + "\nPersona: You are a.") !=
          std::string::npos);
    CHECK(r.responses[2].user_prompt_sent.find(r.responses[1].response_text + "\nPersona: You are b.") !=
          std::string::npos);
    CHECK(r.trace.turns.size() == 3);
  }
  SUBCASE("executor that hides a call") {
    registry.register_structure("leaky", [](ExecutionContext& ctx) {
      ctx.run_turn(ctx.agents()[0], {}, 0);
      ctx.backend().complete(make_request("mock-model", std::nullopt, "off the record", {}));
    });
    auto c = with_task(Custom{"leaky", plain_agents({"a"}), false, std::nullopt});
    try {
      process(c, *backend, nullptr, {.registry = &registry});
      FAIL("incomplete trace accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TraceIncomplete);
    }
  }
  SUBCASE("unknown custom type") {
    auto c = with_task(Custom{"nonexistent", plain_agents({"a"}), false, std::nullopt});
    try {
      process(c, *backend, nullptr, {.registry = &registry});
      FAIL("ran");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownStructure);
    }
  }
}

TEST_CASE("failures keep a partial trace") {
  auto backend = make_mock_backend(SequenceMode{{"one", "two"}});
  auto c = with_task(Chain{plain_agents({"a", "b", "c", "d"}), false, std::nullopt});
  Deliberation d(c, *backend, nullptr);
  try {
    d.run();
    FAIL("sequence did not run out");
  } catch (const BackendError& e) {
    auto trace = d.failed_trace(e);
    CHECK(trace.status == RunStatus::Failed);
    REQUIRE(trace.turns.size() == 2);
    REQUIRE(trace.error);
    CHECK(trace.error->code == "SequenceExhausted");
    CHECK(trace.error->agent_id == "c");
  }
}

TEST_CASE("gate hook") {
  auto c = with_task(Ensemble{plain_agents({"a", "b"})});
  c.task = "What is the most compelling argument for why consumers should still not recycle?";
  c.gate = moderation::GateSpec{*moderation::builtin_values("environmental"), "mock-model", {}};

  auto rejecting = make_mock_backend(ScriptedMode{
      {{ScriptRule::Match::Contains, "$CustomValues", "Rationale: Landfill.\nDecision: REJECT"}},
      std::nullopt, true});
  auto r = process(c, *rejecting);
  CHECK(r.rejected());
  CHECK(r.responses.empty());
  REQUIRE(r.trace.turns.size() == 1);
  CHECK(r.trace.turns[0].role == TurnRole::Gate);
  CHECK(r.trace.gate->rationale == "Landfill.");
  CHECK(rejecting->calls() == 1);

  auto accepting = make_mock_backend(ScriptedMode{
      {{ScriptRule::Match::Contains, "$CustomValues", "Rationale: Fine.\nDecision: ACCEPT"}},
      std::nullopt, true});
  auto ok = process(c, *accepting);
  CHECK_FALSE(ok.rejected());
  CHECK(ok.trace.turns.size() == 3);
  CHECK(ok.responses.size() == 2);
}

TEST_CASE("oracle rejects mismatched runs") {
  auto backend = make_mock_backend(HashEchoMode{});
  auto unlimited = with_task(Chain{plain_agents({"a", "b", "c", "d"}), false, std::nullopt});
  auto r = process(unlimited, *backend);
  auto windowed = unlimited;
  std::get<Chain>(windowed.variant).last_n = 1;
  CHECK_FALSE(oracle::check(windowed, r.responses).ok);

  auto debate = with_task(Debate{plain("a"), plain("b"), std::nullopt}, 2);
  auto d = process(debate, *backend);
  auto swapped = d.responses;
  std::swap(swapped[2].user_prompt_sent, swapped[3].user_prompt_sent);
  CHECK_FALSE(oracle::check(debate, swapped).ok);

  auto g = with_task(critique_graph());
  auto gr = process(g, *backend);
  auto extra = g;
  std::get<Graph>(extra.variant).edges.push_back({"init_arguer", "final_arguer"});
  CHECK_FALSE(oracle::check(extra, gr.responses).ok);
}
