#include <fstream>
#include <sstream>

#include "ensemblage/config.hpp"

namespace ensemblage::config {

using nlohmann::json;
namespace st = ensemblage::structures;
namespace md = ensemblage::moderation;

json turn_to_json(const TurnRecord& t) {
  json j;
  j["turn_id"] = t.turn_id;
  j["agent_id"] = t.agent_id;
  j["role"] = std::string(to_string(t.role));
  j["cycle_index"] = t.cycle_index;
  j["system_instructions"] = t.system_instructions_sent ? json(*t.system_instructions_sent) : json();
  j["user_prompt"] = t.user_prompt_sent;
  j["visible_turn_ids"] = t.visible_turn_ids;
  j["response"] = t.response_text;
  j["model_id"] = t.model_id;
  j["attempt_count"] = t.attempt_count;
  j["timestamp"] = t.timestamp;
  return j;
}

TurnRecord turn_from_json(const json& j) {
  TurnRecord t;
  t.turn_id = j.at("turn_id").get<std::string>();
  t.agent_id = j.at("agent_id").get<std::string>();
  t.role = parse_turn_role(j.at("role").get<std::string>());
  t.cycle_index = j.at("cycle_index").get<int>();
  if (const auto& s = j.at("system_instructions"); !s.is_null()) {
    t.system_instructions_sent = s.get<std::string>();
  }
  t.user_prompt_sent = j.at("user_prompt").get<std::string>();
  t.visible_turn_ids = j.at("visible_turn_ids").get<std::vector<std::string>>();
  t.response_text = j.at("response").get<std::string>();
  t.model_id = j.at("model_id").get<std::string>();
  t.attempt_count = j.at("attempt_count").get<int>();
  t.timestamp = j.at("timestamp").get<std::string>();
  return t;
}

json trace_to_json(const st::DeliberationTrace& trace) {
  json j;
  j["schema_version"] = trace.schema_version;
  j["status"] = std::string(st::to_string(trace.status));
  if (trace.error) {
    j["error"] = {{"code", trace.error->code},
                  {"message", trace.error->message},
                  {"agent_id", trace.error->agent_id ? json(*trace.error->agent_id) : json()}};
  } else {
    j["error"] = nullptr;
  }
  j["config"] = trace.config;
  if (trace.gate) {
    j["gate"] = {{"decision", std::string(md::to_string(trace.gate->decision))},
                 {"rationale", trace.gate->rationale},
                 {"raw_completion", trace.gate->raw_completion}};
  } else {
    j["gate"] = nullptr;
  }
  json turns = json::array();
  for (const auto& t : trace.turns) turns.push_back(turn_to_json(t));
  j["turns"] = std::move(turns);
  j["final_response"] = trace.final_response;
  j["moderated"] = trace.moderated;
  return j;
}

st::DeliberationTrace trace_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
    throw Error(ErrorCode::Parse, "trace has no integer schema_version");
  }
  int version = j["schema_version"].get<int>();
  if (version != st::kTraceSchemaVersion) {
    throw Error(ErrorCode::SchemaVersionUnsupported,
                "trace schema_version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(st::kTraceSchemaVersion) + ")");
  }
  try {
    st::DeliberationTrace trace;
    trace.schema_version = version;
    trace.status = st::parse_run_status(j.at("status").get<std::string>());
    if (const auto& e = j.at("error"); !e.is_null()) {
      st::TraceError err;
      err.code = e.at("code").get<std::string>();
      err.message = e.at("message").get<std::string>();
      if (!e.at("agent_id").is_null()) err.agent_id = e.at("agent_id").get<std::string>();
      trace.error = std::move(err);
    }
    trace.config = j.at("config");
    if (const auto& g = j.at("gate"); !g.is_null()) {
      md::GateDecision d;
      auto text = g.at("decision").get<std::string>();
      if (text == "ACCEPT") d.decision = md::Decision::Accept;
      else if (text == "REJECT") d.decision = md::Decision::Reject;
      else throw Error(ErrorCode::Parse, "gate decision '" + text + "'");
      d.rationale = g.at("rationale").get<std::string>();
      d.raw_completion = g.at("raw_completion").get<std::string>();
      trace.gate = std::move(d);
    }
    for (const auto& t : j.at("turns")) trace.turns.push_back(turn_from_json(t));
    trace.final_response = j.at("final_response").get<std::string>();
    trace.moderated = j.at("moderated").get<bool>();
    return trace;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed trace: ") + e.what());
  }
}

void write_trace(const std::filesystem::path& path, const st::DeliberationTrace& trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write trace to '" + path.string() + "'");
  out << trace_to_json(trace).dump(2) << '\n';
}

st::DeliberationTrace read_trace(const std::filesystem::path& path) {
  return trace_from_json(read_json_file(path));
}

std::string render_transcript(const st::DeliberationTrace& trace) {
  std::ostringstream s;
  std::string type = trace.config.is_object() && trace.config.contains("structure")
                         ? trace.config["structure"].value("type", "")
                         : trace.config.is_object() ? trace.config.value("type", "") : "";
  std::string name = trace.config.is_object() ? trace.config.value("name", "") : "";
  s << "Run: " << (name.empty() ? type : name);
  if (!type.empty() && !name.empty()) s << " (" << type << ")";
  s << "\nStatus: " << st::to_string(trace.status) << "\n";
  if (trace.error) {
    s << "Error: " << trace.error->code << ": " << trace.error->message;
    if (trace.error->agent_id) s << " [agent " << *trace.error->agent_id << "]";
    s << "\n";
  }
  for (std::size_t i = 0; i < trace.turns.size(); ++i) {
    const auto& t = trace.turns[i];
    s << "\n=== " << (i + 1) << ". " << t.agent_id << " (" << to_string(t.role) << ", cycle "
      << t.cycle_index << ") ===\n";
    if (!t.visible_turn_ids.empty()) {
      s << "Sees:";
      for (const auto& v : t.visible_turn_ids) s << ' ' << v;
      s << "\n";
    }
    s << "--- System instructions ---\n"
      << (t.system_instructions_sent ? *t.system_instructions_sent : std::string("(none)")) << "\n";
    s << "--- Prompt ---\n" << t.user_prompt_sent << "\n";
    s << "--- Response ---\n" << t.response_text << "\n";
  }
  if (trace.gate) {
    s << "\nGate decision: " << md::to_string(trace.gate->decision) << "\n";
  }
  s << "\n=== Final response ===\n" << trace.final_response << "\n";
  return s.str();
}

}  // namespace ensemblage::config
