#include <fstream>
#include <set>
#include <sstream>

#include "ensemblage/config.hpp"

namespace ensemblage::config {

using nlohmann::json;
namespace st = ensemblage::structures;
namespace tp = ensemblage::templates;
namespace md = ensemblage::moderation;

ValidationFailed::ValidationFailed(std::vector<Diagnostic> diagnostics)
    : Error(ErrorCode::InvalidConfig, format_diagnostics(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  std::ostringstream s;
  for (std::size_t i = 0; i < diagnostics.size(); ++i) {
    if (i) s << '\n';
    s << (diagnostics[i].pointer.empty() ? "/" : diagnostics[i].pointer) << ": "
      << diagnostics[i].message;
  }
  return s.str();
}

namespace {

std::string escape_key(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

std::string at(const std::string& ptr, std::string_view key) { return ptr + "/" + escape_key(key); }
std::string at(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& out) : out_(out) {}

  void add(std::string ptr, std::string msg) { out_.push_back({std::move(ptr), std::move(msg)}); }
  std::size_t count() const { return out_.size(); }

  bool object(const json& j, const std::string& ptr) {
    if (j.is_object()) return true;
    add(ptr, "expected an object");
    return false;
  }

  void allow(const json& obj, const std::string& ptr, std::initializer_list<std::string_view> keys) {
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (auto a : keys) ok = ok || a == k;
      if (!ok) add(at(ptr, k), "unknown field '" + k + "'");
    }
  }

  std::optional<std::string> str(const json& obj, std::string_view key, const std::string& ptr) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      add(at(ptr, key), "expected a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  std::optional<std::int64_t> integer(const json& obj, std::string_view key, const std::string& ptr) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer()) {
      add(at(ptr, key), "expected an integer");
      return std::nullopt;
    }
    return it->get<std::int64_t>();
  }

  std::optional<double> number(const json& obj, std::string_view key, const std::string& ptr) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) {
      add(at(ptr, key), "expected a number");
      return std::nullopt;
    }
    return it->get<double>();
  }

  std::optional<bool> boolean(const json& obj, std::string_view key, const std::string& ptr) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_boolean()) {
      add(at(ptr, key), "expected true or false");
      return std::nullopt;
    }
    return it->get<bool>();
  }

  std::optional<std::uint64_t> seed(const json& obj, std::string_view key, const std::string& ptr) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_number_unsigned() || (it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
      return it->get<std::uint64_t>();
    }
    add(at(ptr, key), "expected a non-negative integer");
    return std::nullopt;
  }

 private:
  std::vector<Diagnostic>& out_;
};

std::optional<tp::Template> read_template(const json& j, const std::string& ptr, tp::TemplateKind kind,
                                          const ParseContext& ctx, Reader& r) {
  std::string expected(tp::to_string(kind));
  if (j.is_string()) {
    auto name = j.get<std::string>();
    if (!tp::has_builtin(name)) {
      r.add(ptr, "unknown template '" + name + "'");
      return std::nullopt;
    }
    const auto& t = tp::builtin(name);
    if (t.kind() != kind) {
      r.add(ptr, "template '" + name + "' is a " + std::string(tp::to_string(t.kind())) +
                     " template, expected " + expected);
      return std::nullopt;
    }
    return t;
  }
  if (!r.object(j, ptr)) return std::nullopt;
  r.allow(j, ptr, {"inline", "file", "name", "kind"});
  auto inline_body = r.str(j, "inline", ptr);
  auto file = r.str(j, "file", ptr);
  auto name = r.str(j, "name", ptr);
  if (auto k = r.str(j, "kind", ptr); k && *k != expected) {
    r.add(at(ptr, "kind"), "template kind '" + *k + "' where a " + expected + " template is needed");
    return std::nullopt;
  }
  if (inline_body.has_value() == file.has_value()) {
    r.add(ptr, "template reference needs exactly one of 'inline' or 'file'");
    return std::nullopt;
  }
  std::string body;
  if (inline_body) {
    body = *inline_body;
  } else {
    auto path = ctx.base_dir / *file;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      r.add(at(ptr, "file"), "cannot read template file '" + path.string() + "'");
      return std::nullopt;
    }
    std::ostringstream s;
    s << in.rdbuf();
    body = s.str();
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    if (!name) name = std::filesystem::path(*file).stem().string();
  }
  try {
    return tp::Template::make(name.value_or("inline"), std::move(body), kind);
  } catch (const Error& e) {
    r.add(ptr, e.what());
    return std::nullopt;
  }
}

json template_to_json(const tp::Template& t) {
  if (tp::has_builtin(t.name()) && tp::builtin(t.name()) == t) return t.name();
  return json{{"inline", t.body()}, {"name", t.name()}, {"kind", std::string(tp::to_string(t.kind()))}};
}

ModelParams read_params(const json& obj, const std::string& ptr, Reader& r) {
  ModelParams p;
  p.temperature = r.number(obj, "temperature", ptr);
  if (auto m = r.integer(obj, "max_tokens", ptr)) p.max_tokens = static_cast<int>(*m);
  auto it = obj.find("params");
  if (it != obj.end() && !it->is_null()) {
    std::string pp = at(ptr, "params");
    if (r.object(*it, pp)) {
      for (const auto& [k, v] : it->items()) {
        if (v.is_boolean()) p.extra[k] = v.get<bool>();
        else if (v.is_number_integer()) p.extra[k] = v.get<std::int64_t>();
        else if (v.is_number()) p.extra[k] = v.get<double>();
        else if (v.is_string()) p.extra[k] = v.get<std::string>();
        else r.add(at(pp, k), "parameter values must be scalars");
      }
    }
  }
  return p;
}

void write_params(json& j, const ModelParams& p) {
  if (p.temperature) j["temperature"] = *p.temperature;
  if (p.max_tokens) j["max_tokens"] = *p.max_tokens;
  if (!p.extra.empty()) {
    json extra = json::object();
    for (const auto& [k, v] : p.extra) std::visit([&](const auto& x) { extra[k] = x; }, v);
    j["params"] = extra;
  }
}

std::vector<AgentSpec> read_agent(const json& j, const std::string& ptr, std::size_t index,
                                  const ParseContext& ctx, Reader& r) {
  if (!r.object(j, ptr)) return {};
  r.allow(j, ptr,
          {"id", "replicas", "system_instructions", "persona", "ideology", "query",
           "persona_template", "task", "combination_instructions", "model", "temperature",
           "max_tokens", "params"});
  std::size_t before = r.count();
  AgentSpec a;
  a.id = r.str(j, "id", ptr).value_or("agent_" + std::to_string(index + 1));

  auto system = r.str(j, "system_instructions", ptr);
  auto persona = r.str(j, "persona", ptr);
  auto ideology = r.str(j, "ideology", ptr);
  auto query = r.str(j, "query", ptr);
  int sources = int(system.has_value()) + int(persona.has_value()) + int(ideology.has_value()) +
                int(query.has_value());
  if (sources > 1) {
    r.add(ptr, "use at most one of system_instructions, persona, ideology and query");
  } else if (system) {
    a.profile = DirectProfile{*system};
  } else if (persona || ideology || query) {
    PersonaProfile p;
    if (persona && *persona == "random") p.source = RandomPersona{};
    else if (persona) p.source = DirectPersona{*persona};
    else if (ideology) p.source = IdeologyPersona{*ideology};
    else {
      p.source = QueryPersona{*query};
      try {
        persona::parse_query(*query);
      } catch (const Error& e) {
        r.add(at(ptr, "query"), e.what());
      }
    }
    if (auto it = j.find("persona_template"); it != j.end() && !it->is_null()) {
      if (auto t = read_template(*it, at(ptr, "persona_template"), tp::TemplateKind::Persona, ctx, r)) {
        p.persona_template = *t;
      }
    }
    a.profile = std::move(p);
  }
  if (j.contains("persona_template") && !std::holds_alternative<PersonaProfile>(a.profile) &&
      sources <= 1) {
    r.add(at(ptr, "persona_template"), "persona_template needs persona, ideology or query");
  }

  a.task = r.str(j, "task", ptr);
  if (auto it = j.find("combination_instructions"); it != j.end() && !it->is_null()) {
    if (auto t = read_template(*it, at(ptr, "combination_instructions"),
                               tp::TemplateKind::Combination, ctx, r)) {
      a.combination_instructions = *t;
    }
  }
  a.model_id = r.str(j, "model", ptr).value_or(ctx.default_model);
  if (a.model_id.empty()) r.add(at(ptr, "model"), "no model given and the backend names none");
  a.params = read_params(j, ptr, r);

  auto replicas = r.integer(j, "replicas", ptr).value_or(1);
  if (replicas < 1) {
    r.add(at(ptr, "replicas"), "replicas must be at least 1");
    replicas = 1;
  }
  if (r.count() != before) return {};
  if (replicas == 1 && !j.contains("replicas")) return {a};
  std::vector<AgentSpec> out;
  for (std::int64_t k = 1; k <= replicas; ++k) {
    AgentSpec copy = a;
    copy.id = a.id + "_" + std::to_string(k);
    out.push_back(std::move(copy));
  }
  return out;
}

json agent_to_json(const AgentSpec& a) {
  json j;
  j["id"] = a.id;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DirectProfile>) {
          j["system_instructions"] = p.system_instructions;
        } else if constexpr (std::is_same_v<T, PersonaProfile>) {
          std::visit(
              [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, DirectPersona>) j["persona"] = s.text;
                else if constexpr (std::is_same_v<S, QueryPersona>) j["query"] = s.query;
                else if constexpr (std::is_same_v<S, IdeologyPersona>) j["ideology"] = s.label;
                else j["persona"] = "random";
              },
              p.source);
          j["persona_template"] = template_to_json(p.persona_template);
        }
      },
      a.profile);
  if (a.task) j["task"] = *a.task;
  j["combination_instructions"] = template_to_json(a.combination_instructions);
  j["model"] = a.model_id;
  write_params(j, a.params);
  return j;
}

std::optional<md::ModeratorSpec> read_moderator(const json& j, const std::string& ptr,
                                                const ParseContext& ctx, Reader& r) {
  if (!r.object(j, ptr)) return std::nullopt;
  r.allow(j, ptr,
          {"id", "system_instructions", "profile", "combination_instructions", "task", "model",
           "temperature", "max_tokens", "params"});
  md::ModeratorSpec m;
  if (auto id = r.str(j, "id", ptr)) m.id = *id;
  auto system = r.str(j, "system_instructions", ptr);
  auto profile = r.str(j, "profile", ptr);
  if (system && profile) {
    r.add(ptr, "use either system_instructions or profile, not both");
  } else if (system) {
    if (*system == "auto") m.profile = md::AutoProfile{};
    else m.profile = DirectProfile{*system};
  } else if (profile) {
    if (!tp::moderator_profile(*profile)) {
      r.add(at(ptr, "profile"), "unknown moderator profile '" + *profile + "'");
    } else {
      m.profile = md::TemplateProfile{*profile};
    }
  }
  if (auto it = j.find("combination_instructions"); it != j.end() && !it->is_null()) {
    if (auto t = read_template(*it, at(ptr, "combination_instructions"), tp::TemplateKind::Moderator,
                               ctx, r)) {
      m.combination_instructions = *t;
    }
  } else if (profile && tp::has_builtin(*profile) &&
             tp::builtin(*profile).kind() == tp::TemplateKind::Moderator) {
    // A named moderator brings its own aggregation template.
    m.combination_instructions = tp::builtin(*profile);
  }
  m.task = r.str(j, "task", ptr);
  m.model_id = r.str(j, "model", ptr).value_or(ctx.default_model);
  if (m.model_id.empty()) r.add(at(ptr, "model"), "no model given and the backend names none");
  m.params = read_params(j, ptr, r);
  // Returned even when parts failed so the structure checks still run on it.
  return m;
}

json moderator_to_json(const md::ModeratorSpec& m) {
  json j;
  j["id"] = m.id;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DirectProfile>) j["system_instructions"] = p.system_instructions;
        else if constexpr (std::is_same_v<T, md::AutoProfile>) j["system_instructions"] = "auto";
        else if constexpr (std::is_same_v<T, md::TemplateProfile>) j["profile"] = p.name;
      },
      m.profile);
  j["combination_instructions"] = template_to_json(m.combination_instructions);
  if (m.task) j["task"] = *m.task;
  j["model"] = m.model_id;
  write_params(j, m.params);
  return j;
}

std::optional<md::GateSpec> read_gate(const json& j, const std::string& ptr, const ParseContext& ctx,
                                      Reader& r) {
  if (!r.object(j, ptr)) return std::nullopt;
  r.allow(j, ptr, {"values", "model", "temperature", "max_tokens", "params"});
  md::GateSpec g;
  auto values = r.str(j, "values", ptr);
  if (!values || values->empty()) {
    r.add(at(ptr, "values"), "gate needs a value set name or text");
  } else {
    g.values = md::builtin_values(*values).value_or(*values);
  }
  g.model_id = r.str(j, "model", ptr).value_or(ctx.default_model);
  if (g.model_id.empty()) r.add(at(ptr, "model"), "no model given and the backend names none");
  g.params = read_params(j, ptr, r);
  return g;
}

}  // namespace

st::StructureConfig structure_from_json(const json& doc, const ParseContext& ctx,
                                        std::vector<Diagnostic>& out) {
  Reader r(out);
  const std::string& ptr = ctx.pointer;
  st::StructureConfig config;
  if (!r.object(doc, ptr)) return config;
  r.allow(doc, ptr,
          {"type", "task", "cycles", "seed", "last_n", "shuffle", "agents", "edges", "moderator",
           "gate"});
  std::size_t before = r.count();

  auto type = r.str(doc, "type", ptr);
  if (!type) r.add(at(ptr, "type"), "structure type is required");
  std::string kind = type.value_or("");

  config.task = r.str(doc, "task", ptr);
  if (auto c = r.integer(doc, "cycles", ptr)) config.cycles = static_cast<int>(*c);
  if (auto s = r.seed(doc, "seed", ptr)) config.seed = *s;

  std::optional<int> last_n;
  if (auto n = r.integer(doc, "last_n", ptr)) last_n = static_cast<int>(*n);
  bool shuffle = r.boolean(doc, "shuffle", ptr).value_or(false);
  bool windowed = kind == "chain" || kind == "debate" || (kind != "ensemble" && kind != "graph");
  if (doc.contains("last_n") && !windowed) {
    r.add(at(ptr, "last_n"), "last_n applies to chain, debate and custom structures");
  }
  if (doc.contains("shuffle") && (kind == "ensemble" || kind == "graph" || kind == "debate")) {
    r.add(at(ptr, "shuffle"), "shuffle applies to chain and custom structures");
  }
  if (doc.contains("edges") && kind != "graph") {
    r.add(at(ptr, "edges"), "edges apply to graph structures only");
  }

  std::vector<AgentSpec> agents;
  std::vector<std::string> agent_ptrs;  // document location of each expanded agent
  std::string aptr = at(ptr, "agents");
  auto ait = doc.find("agents");
  if (ait == doc.end() || !ait->is_array()) {
    r.add(aptr, "agents must be a list");
  } else {
    for (std::size_t i = 0; i < ait->size(); ++i) {
      for (auto& a : read_agent((*ait)[i], at(aptr, i), i, ctx, r)) {
        agents.push_back(std::move(a));
        agent_ptrs.push_back(at(aptr, i));
      }
    }
  }

  std::vector<st::Edge> edges;
  if (auto eit = doc.find("edges"); eit != doc.end() && kind == "graph") {
    std::string eptr = at(ptr, "edges");
    if (!eit->is_array()) {
      r.add(eptr, "edges must be a list");
    } else {
      for (std::size_t i = 0; i < eit->size(); ++i) {
        const auto& e = (*eit)[i];
        if (e.is_array() && e.size() == 2 && e[0].is_string() && e[1].is_string()) {
          edges.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
        } else if (e.is_object() && e.size() == 2 && e.contains("from") && e.contains("to") &&
                   e["from"].is_string() && e["to"].is_string()) {
          edges.push_back({e["from"].get<std::string>(), e["to"].get<std::string>()});
        } else {
          r.add(at(eptr, i), "an edge is [from, to] or {\"from\": ..., \"to\": ...}");
        }
      }
    }
  }

  if (kind == "ensemble") {
    config.variant = st::Ensemble{std::move(agents)};
  } else if (kind == "chain") {
    config.variant = st::Chain{std::move(agents), shuffle, last_n};
  } else if (kind == "debate") {
    if (agents.size() == 2) {
      config.variant = st::Debate{agents[0], agents[1], last_n};
    } else {
      if (ait != doc.end() && ait->is_array() && r.count() == before) {
        r.add(aptr, "Debate requires exactly two agents, got " + std::to_string(agents.size()));
      }
      config.variant = st::Custom{"debate", std::move(agents), false, last_n};
    }
  } else if (kind == "graph") {
    config.variant = st::Graph{std::move(agents), std::move(edges)};
  } else {
    config.variant = st::Custom{kind, std::move(agents), shuffle, last_n};
  }

  if (auto mit = doc.find("moderator"); mit != doc.end() && !mit->is_null()) {
    config.moderator = read_moderator(*mit, at(ptr, "moderator"), ctx, r);
  }
  if (auto git = doc.find("gate"); git != doc.end() && !git->is_null()) {
    config.gate = read_gate(*git, at(ptr, "gate"), ctx, r);
  }

  for (auto& p : st::check(config)) {
    std::string where = p.where;
    // Map expanded agent indices back onto the document.
    if (where.rfind("/agents/", 0) == 0) {
      auto rest = where.substr(8);
      auto slash = rest.find('/');
      std::size_t idx = std::stoul(rest.substr(0, slash));
      if (idx < agent_ptrs.size()) {
        out.push_back({agent_ptrs[idx] + (slash == std::string::npos ? "" : rest.substr(slash)),
                       p.message});
        continue;
      }
    }
    out.push_back({ptr + where, p.message});
  }
  return config;
}

st::StructureConfig structure_from_json(const json& doc, const ParseContext& ctx) {
  std::vector<Diagnostic> out;
  auto config = structure_from_json(doc, ctx, out);
  if (!out.empty()) throw ValidationFailed(std::move(out));
  return config;
}

json structure_to_json(const st::StructureConfig& config) {
  json j;
  j["type"] = st::type_name(config);
  if (config.task) j["task"] = *config.task;
  j["cycles"] = config.cycles;
  j["seed"] = config.seed;
  json agents = json::array();
  for (const auto* a : st::agents_of(config)) agents.push_back(agent_to_json(*a));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, st::Chain> || std::is_same_v<T, st::Custom>) {
          j["shuffle"] = v.shuffle;
        }
        if constexpr (std::is_same_v<T, st::Chain> || std::is_same_v<T, st::Custom> ||
                      std::is_same_v<T, st::Debate>) {
          if (v.last_n) j["last_n"] = *v.last_n;
        }
        if constexpr (std::is_same_v<T, st::Graph>) {
          json edges = json::array();
          for (const auto& e : v.edges) edges.push_back({e.from, e.to});
          j["edges"] = edges;
        }
      },
      config.variant);
  j["agents"] = agents;
  if (config.moderator) j["moderator"] = moderator_to_json(*config.moderator);
  if (config.gate) {
    json g{{"values", config.gate->values}, {"model", config.gate->model_id}};
    write_params(g, config.gate->params);
    j["gate"] = g;
  }
  return j;
}

json mock_to_json(const llm::MockMode& mode) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, llm::HashEchoMode>) {
          return json{{"mode", "hash_echo"}};
        } else if constexpr (std::is_same_v<T, llm::SequenceMode>) {
          return json{{"mode", "sequence"}, {"items", m.items}};
        } else {
          json rules = json::array();
          for (const auto& rule : m.rules) {
            rules.push_back({{rule.match == llm::ScriptRule::Match::Exact ? "exact" : "contains",
                              rule.pattern},
                             {"reply", rule.reply}});
          }
          json j{{"mode", "scripted"}, {"rules", rules}};
          if (m.fallback) j["fallback"] = *m.fallback;
          if (m.fallback_to_hash_echo) j["fallback_to_hash_echo"] = true;
          return j;
        }
      },
      mode);
}

llm::MockMode mock_from_json(const json& doc, const std::string& ptr, std::vector<Diagnostic>& out) {
  Reader r(out);
  if (!r.object(doc, ptr)) return llm::HashEchoMode{};
  r.allow(doc, ptr, {"mode", "rules", "fallback", "fallback_to_hash_echo", "items"});
  auto mode = r.str(doc, "mode", ptr).value_or("hash_echo");
  if (mode == "hash_echo") return llm::HashEchoMode{};
  if (mode == "sequence") {
    llm::SequenceMode s;
    auto it = doc.find("items");
    if (it == doc.end() || !it->is_array()) {
      r.add(at(ptr, "items"), "sequence mode needs a list of items");
      return s;
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      if ((*it)[i].is_string()) s.items.push_back((*it)[i].get<std::string>());
      else r.add(at(at(ptr, "items"), i), "expected a string");
    }
    return s;
  }
  if (mode != "scripted") {
    r.add(at(ptr, "mode"), "mock mode must be hash_echo, scripted or sequence");
    return llm::HashEchoMode{};
  }
  llm::ScriptedMode s;
  s.fallback = r.str(doc, "fallback", ptr);
  s.fallback_to_hash_echo = r.boolean(doc, "fallback_to_hash_echo", ptr).value_or(false);
  auto it = doc.find("rules");
  if (it == doc.end()) return s;
  std::string rptr = at(ptr, "rules");
  if (!it->is_array()) {
    r.add(rptr, "rules must be a list");
    return s;
  }
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& rule = (*it)[i];
    std::string p = at(rptr, i);
    if (!r.object(rule, p)) continue;
    r.allow(rule, p, {"exact", "contains", "reply"});
    auto exact = r.str(rule, "exact", p);
    auto contains = r.str(rule, "contains", p);
    auto reply = r.str(rule, "reply", p);
    if (exact.has_value() == contains.has_value() || !reply) {
      r.add(p, "a rule has one of 'exact' or 'contains', and a 'reply'");
      continue;
    }
    s.rules.push_back({exact ? llm::ScriptRule::Match::Exact : llm::ScriptRule::Match::Contains,
                       exact ? *exact : *contains, *reply});
  }
  return s;
}

}  // namespace ensemblage::config
