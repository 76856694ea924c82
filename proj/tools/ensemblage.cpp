// Command-line front end: validate, run, replay, gate, diversity, persona.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ensemblage/config.hpp"
#include "ensemblage/metrics.hpp"
#include "ensemblage/persona.hpp"

using namespace ensemblage;
namespace fs = std::filesystem;

namespace {

int report_error(const std::exception& e) {
  nlohmann::json j{{"error", "InternalError"}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) j["error"] = std::string(to_string(err->code()));
  std::cerr << j.dump() << '\n';
  return config::exit_code_for(e);
}

int cmd_validate(const fs::path& spec) {
  try {
    auto path = config::resolve_spec_path(spec);
    auto doc = config::read_json_file(path);
    auto diags = config::validate_run_spec(doc, path.parent_path());
    if (diags.empty()) {
      std::cout << "ok: " << path.string() << '\n';
      return config::kExitOk;
    }
    for (const auto& d : diags) {
      std::cout << path.string() << ":" << (d.pointer.empty() ? "/" : d.pointer) << ": " << d.message << '\n';
    }
    return config::kExitValidation;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}

int cmd_replay(const fs::path& trace) {
  try {
    std::cout << config::render_transcript(config::read_trace(trace));
    return config::kExitOk;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}

struct GateArgs {
  std::string values;
  std::string task;
  std::string provider = "openai";
  std::string model = "gpt-4o";
  bool mock = false;
  std::optional<std::string> mock_reply;
};

int cmd_gate(const GateArgs& a) {
  try {
    std::shared_ptr<llm::Backend> backend;
    if (a.mock || a.mock_reply) {
      llm::ScriptedMode mode;
      mode.fallback = a.mock_reply;
      mode.fallback_to_hash_echo = !a.mock_reply;
      backend = llm::make_mock_backend(mode);
    } else {
      backend = std::make_shared<llm::OpenAICompatibleBackend>(llm::http_config_from_env(a.provider),
                                                               llm::RetryPolicy{});
    }
    moderation::GateSpec spec{moderation::builtin_values(a.values).value_or(a.values), a.model, {}};
    auto outcome = moderation::gate(spec, a.task, *backend);
    std::cout << nlohmann::json{{"decision", std::string(moderation::to_string(outcome.decision.decision))},
                                {"rationale", outcome.decision.rationale}}
                     .dump()
              << '\n';
    return outcome.decision.decision == moderation::Decision::Accept ? config::kExitOk
                                                                     : config::kExitGateReject;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}

int cmd_diversity(const fs::path& input, const std::optional<fs::path>& output, int sample_size) {
  try {
    std::ifstream in(input);
    if (!in) throw Error(ErrorCode::Parse, "cannot open '" + input.string() + "'");
    auto corpora = metrics::read_jsonl(in);
    std::vector<metrics::DiversityReport> reports;
    for (const auto& c : corpora) reports.push_back(metrics::report(c, sample_size));
    nlohmann::json j;
    if (reports.size() >= 2) {
      auto rows = metrics::compare(reports);
      std::cout << metrics::comparison_table(reports, rows);
      j = metrics::to_json(reports, rows);
    } else {
      j["reports"] = nlohmann::json::array();
      for (const auto& r : reports) {
        j["reports"].push_back(metrics::to_json(r));
        std::cout << r.label << ": ttr_1=" << (r.ttr.count(1) ? r.ttr.at(1) : 0.0) << '\n';
      }
    }
    if (output) {
      std::ofstream out(*output);
      out << j.dump(2) << '\n';
    } else {
      std::cout << j.dump(2) << '\n';
    }
    return config::kExitOk;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}

struct PersonaArgs {
  std::string dataset = std::string(ENSEMBLAGE_DATA_DIR) + "/anes_synthetic.csv";
  std::string codebook = std::string(ENSEMBLAGE_DATA_DIR) + "/anes_synthetic_codebook.json";
  std::optional<std::string> query;
  std::optional<std::string> ideology;
  int count = 1;
  std::uint64_t seed = 0;
  std::string persona_template = "anes_persona";
};

int cmd_persona_sample(const PersonaArgs& a) {
  try {
    auto dataset = persona::load_dataset(a.dataset, a.codebook);
    if (a.query && a.ideology) throw Error(ErrorCode::InvalidConfig, "use --query or --ideology, not both");
    PersonaProfile profile;
    profile.persona_template = templates::builtin(a.persona_template);
    if (a.query) profile.source = QueryPersona{*a.query};
    else if (a.ideology) profile.source = IdeologyPersona{*a.ideology};
    else profile.source = RandomPersona{};
    AgentSpec spec;
    spec.id = "sample";
    spec.profile = profile;
    Rng rng = derive_rng(a.seed, "cli-sample");
    for (int i = 0; i < a.count; ++i) {
      if (i) std::cout << "\n---\n";
      std::cout << resolve_profile(spec, &dataset, rng).value_or("") << '\n';
    }
    return config::kExitOk;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}

int cmd_persona_describe(const PersonaArgs& a) {
  try {
    std::cout << persona::describe_variables(persona::load_dataset(a.dataset, a.codebook)) << '\n';
    return config::kExitOk;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemblage: persona-bearing model ensembles with auditable traces"};
  app.require_subcommand(1);
  int rc = 0;

  fs::path spec_path;
  auto* validate = app.add_subcommand("validate", "Check a run spec without calling any model");
  validate->add_option("spec", spec_path, "Run spec (.json optional)")->required();
  validate->callback([&] { rc = cmd_validate(spec_path); });

  config::RunOptions run_opts;
  std::optional<std::uint64_t> seed;
  std::string output, dataset, codebook;
  bool sequential = false;
  auto* run = app.add_subcommand("run", "Run a spec and write its trace");
  run->add_option("spec", spec_path, "Run spec (.json optional)")->required();
  run->add_flag("--mock", run_opts.force_mock, "Use the mock backend (no network)");
  run->add_option("--seed", seed, "Override the spec seed");
  run->add_option("--output", output, "Trace file (default: <name>.trace.json)");
  run->add_option("--dataset", dataset, "Persona dataset CSV");
  run->add_option("--codebook", codebook, "Codebook JSON");
  run->add_flag("--sequential", sequential, "Run concurrent stages one agent at a time");
  run->callback([&] {
    run_opts.seed = seed;
    if (!output.empty()) run_opts.output = output;
    if (!dataset.empty()) run_opts.dataset = dataset;
    if (!codebook.empty()) run_opts.codebook = codebook;
    run_opts.parallel = !sequential;
    auto outcome = config::run(spec_path, run_opts, config::default_backend, std::cout, std::cerr);
    if (outcome.trace_path) std::cerr << "trace: " << outcome.trace_path->string() << '\n';
    rc = outcome.exit_code;
  });

  fs::path trace_path;
  auto* replay = app.add_subcommand("replay", "Print a trace as a transcript");
  replay->add_option("trace", trace_path, "Trace file")->required();
  replay->callback([&] { rc = cmd_replay(trace_path); });

  GateArgs gate_args;
  auto* gate = app.add_subcommand("gate", "Accept or reject a task against a value set");
  gate->add_option("--values", gate_args.values, "Value set name (environmental, physical) or text")->required();
  gate->add_option("--task", gate_args.task, "Task to screen")->required();
  gate->add_option("--provider", gate_args.provider, "Provider name");
  gate->add_option("--model", gate_args.model, "Model id");
  gate->add_flag("--mock", gate_args.mock, "Use the mock backend");
  gate->add_option("--mock-reply", gate_args.mock_reply, "Completion the mock returns");
  gate->callback([&] { rc = cmd_gate(gate_args); });

  fs::path corpus_path;
  std::optional<fs::path> report_path;
  int sample_size = metrics::kDefaultSampleSize;
  auto* diversity = app.add_subcommand("diversity", "Lexical diversity of JSON-lines corpora");
  diversity->add_option("corpora", corpus_path, "JSON lines of {label, text}")->required();
  diversity->add_option("--output", report_path, "Report JSON (default: stdout)");
  diversity->add_option("--sample-size", sample_size, "HD-D sample size");
  diversity->callback([&] { rc = cmd_diversity(corpus_path, report_path, sample_size); });

  PersonaArgs persona_args;
  auto* persona = app.add_subcommand("persona", "Persona dataset tools");
  persona->require_subcommand(1);
  for (auto* sub : {persona->add_subcommand("sample", "Sample and render personas"),
                    persona->add_subcommand("describe", "List persona variables")}) {
    sub->add_option("--dataset", persona_args.dataset, "Persona dataset CSV");
    sub->add_option("--codebook", persona_args.codebook, "Codebook JSON");
  }
  auto* sample = persona->get_subcommand("sample");
  sample->add_option("--query", persona_args.query, "Filter, e.g. \"ideology=='Liberal'\"");
  sample->add_option("--ideology", persona_args.ideology, "Ideology label, e.g. conservative");
  sample->add_option("-n,--count", persona_args.count, "How many personas");
  sample->add_option("--seed", persona_args.seed, "Sampling seed");
  sample->add_option("--template", persona_args.persona_template, "Persona template name");
  sample->callback([&] { rc = cmd_persona_sample(persona_args); });
  persona->get_subcommand("describe")->callback([&] { rc = cmd_persona_describe(persona_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : config::kExitValidation;
  }
  return rc;
}
