#include <fstream>
#include <sstream>

#include "ensemblage/config.hpp"

namespace ensemblage::config {

using nlohmann::json;
namespace fs = std::filesystem;

std::filesystem::path resolve_spec_path(const fs::path& path) {
  if (fs::is_regular_file(path)) return path;
  fs::path with_ext = path;
  with_ext += ".json";
  if (fs::is_regular_file(with_ext)) return with_ext;
  return path;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  try {
    return json::parse(s.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

namespace {

std::optional<std::string> get_string(const json& obj, const char* key, const std::string& ptr,
                                      std::vector<Diagnostic>& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    out.push_back({ptr + "/" + key, "expected a string"});
    return std::nullopt;
  }
  return it->get<std::string>();
}

}  // namespace

RunSpec run_spec_from_json(const json& doc, const fs::path& base_dir, std::vector<Diagnostic>& out) {
  RunSpec spec;
  if (!doc.is_object()) {
    out.push_back({"", "a run spec is a JSON object"});
    return spec;
  }
  for (const auto& [k, v] : doc.items()) {
    if (k != "name" && k != "seed" && k != "backend" && k != "mock" && k != "dataset" &&
        k != "output" && k != "structure" && k != "description") {
      out.push_back({"/" + k, "unknown field '" + k + "'"});
    }
  }
  spec.name = get_string(doc, "name", "", out).value_or("run");
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (it->is_number_unsigned() || (it->is_number_integer() && it->get<std::int64_t>() >= 0))
      spec.seed = it->get<std::uint64_t>();
    else out.push_back({"/seed", "expected a non-negative integer"});
  }

  if (auto it = doc.find("backend"); it != doc.end()) {
    if (!it->is_object()) {
      out.push_back({"/backend", "expected an object"});
    } else {
      for (const auto& [k, v] : it->items()) {
        if (k != "provider" && k != "model") out.push_back({"/backend/" + k, "unknown field '" + k + "'"});
      }
      spec.provider = get_string(*it, "provider", "/backend", out).value_or("mock");
      spec.model = get_string(*it, "model", "/backend", out).value_or("");
    }
  }
  if (spec.provider.empty()) out.push_back({"/backend/provider", "provider must be non-empty"});
  if (spec.model.empty() && spec.provider == "mock") spec.model = "mock";

  if (auto it = doc.find("mock"); it != doc.end() && !it->is_null()) {
    spec.mock = mock_from_json(*it, "/mock", out);
  } else if (spec.provider == "mock") {
    spec.mock = llm::HashEchoMode{};
  }

  if (auto it = doc.find("dataset"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) {
      out.push_back({"/dataset", "expected an object with 'path' and 'codebook'"});
    } else {
      auto path = get_string(*it, "path", "/dataset", out);
      auto codebook = get_string(*it, "codebook", "/dataset", out);
      if (!path) out.push_back({"/dataset/path", "dataset path is required"});
      if (!codebook) out.push_back({"/dataset/codebook", "codebook path is required"});
      if (path) spec.dataset_path = base_dir / *path;
      if (codebook) spec.codebook_path = base_dir / *codebook;
    }
  }
  if (auto o = get_string(doc, "output", "", out)) spec.output_path = base_dir / *o;

  auto sit = doc.find("structure");
  if (sit == doc.end()) {
    out.push_back({"/structure", "structure is required"});
  } else {
    ParseContext ctx{spec.model, base_dir, "/structure"};
    spec.structure = structure_from_json(*sit, ctx, out);
    // The run seed wins over one written inside the structure.
    if (doc.contains("seed") || !sit->contains("seed")) spec.structure.seed = spec.seed;
    else spec.seed = spec.structure.seed;
  }
  return spec;
}

json run_spec_to_json(const RunSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["seed"] = spec.seed;
  j["backend"] = {{"provider", spec.provider}, {"model", spec.model}};
  if (spec.mock) j["mock"] = mock_to_json(*spec.mock);
  if (spec.dataset_path && spec.codebook_path) {
    j["dataset"] = {{"path", spec.dataset_path->generic_string()},
                    {"codebook", spec.codebook_path->generic_string()}};
  }
  auto structure = structure_to_json(spec.structure);
  structure["seed"] = spec.seed;
  j["structure"] = structure;
  return j;
}

std::vector<Diagnostic> check_dataset_refs(const RunSpec& spec,
                                           std::optional<persona::PersonaDataset>& dataset) {
  std::vector<Diagnostic> out;
  auto agents = structures::agents_of(spec.structure);
  bool needed = false;
  for (const auto* a : agents) needed = needed || needs_dataset(a->profile);
  if (!needed) return out;
  if (!spec.dataset_path || !spec.codebook_path) {
    out.push_back({"/dataset", "an agent samples a persona, so a dataset and codebook are required"});
    return out;
  }
  try {
    dataset = persona::load_dataset(*spec.dataset_path, *spec.codebook_path);
  } catch (const Error& e) {
    out.push_back({"/dataset", e.what()});
    return out;
  }
  // Resolving with a scratch stream exercises queries, labels and filters
  // exactly as a run would, without any model call.
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!needs_dataset(agents[i]->profile)) continue;
    Rng scratch = derive_rng(spec.seed, "validate", i);
    try {
      resolve_profile(*agents[i], &*dataset, scratch);
    } catch (const Error& e) {
      out.push_back({"/structure/agents (" + agents[i]->id + ")", e.what()});
    }
  }
  return out;
}

std::vector<Diagnostic> check_registry(const RunSpec& spec,
                                       const structures::StructureRegistry& registry) {
  std::vector<Diagnostic> out;
  auto type = structures::type_name(spec.structure);
  if (!type.empty() && !registry.contains(type)) {
    out.push_back({"/structure/type", "unknown structure type '" + type + "'"});
  }
  return out;
}

std::vector<Diagnostic> validate_run_spec(const json& doc, const fs::path& base_dir,
                                          const structures::StructureRegistry& registry) {
  std::vector<Diagnostic> out;
  auto spec = run_spec_from_json(doc, base_dir, out);
  if (doc.is_object() && doc.contains("structure")) {
    for (auto& d : check_registry(spec, registry)) out.push_back(std::move(d));
    std::optional<persona::PersonaDataset> dataset;
    for (auto& d : check_dataset_refs(spec, dataset)) out.push_back(std::move(d));
  }
  return out;
}

RunSpec load_run_spec(const fs::path& path, const structures::StructureRegistry& registry) {
  auto resolved = resolve_spec_path(path);
  auto doc = read_json_file(resolved);
  std::vector<Diagnostic> out;
  auto spec = run_spec_from_json(doc, resolved.parent_path(), out);
  for (auto& d : check_registry(spec, registry)) out.push_back(std::move(d));
  if (!out.empty()) throw ValidationFailed(std::move(out));
  return spec;
}

}  // namespace ensemblage::config
