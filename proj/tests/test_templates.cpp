#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ensemblage/random.hpp"
#include "ensemblage/templates.hpp"

using namespace ensemblage;
using namespace ensemblage::templates;

namespace {

struct Golden {
  std::string header;
  std::string body;
};

Golden golden(const std::string& name) {
  std::ifstream in(std::string(ENSEMBLAGE_SOURCE_DIR) + "/tests/golden/templates/" + name + ".txt");
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  auto split = text.find("# ---\n");
  REQUIRE(split != std::string::npos);
  Golden g{text.substr(0, split), text.substr(split + 6)};
  REQUIRE(!g.body.empty());
  REQUIRE(g.body.back() == '\n');
  g.body.pop_back();
  return g;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Parse;
}

}  // namespace

TEST_CASE("render substitutes") {
  auto t = Template::make("p", "X ${persona} Y", TemplateKind::Persona);
  CHECK(render(t, {.persona = "P"}) == "X P Y");
  CHECK(render_text("a ${task} b ${task}", {.task = "T"}) == "a T b T");
  // substituted text is not rescanned
  CHECK(render_text("${task}", {.task = "${persona}"}) == "${persona}");
}

TEST_CASE("render errors") {
  auto c = Template::make("c", "<start>${previous_responses}<end>", TemplateKind::Combination);
  CHECK(code_of([&] { render(c, {}); }) == ErrorCode::MissingBinding);
  CHECK(code_of([] { render_text("${bogus}", {}); }) == ErrorCode::UnknownPlaceholder);
  CHECK(code_of([] { render_text("${task", {.task = "x"}); }) == ErrorCode::UnknownPlaceholder);
}

TEST_CASE("template invariants by kind") {
  CHECK(code_of([] { Template::make("p", "no slot", TemplateKind::Persona); }) ==
        ErrorCode::InvalidTemplate);
  CHECK(code_of([] { Template::make("p", "${persona} ${persona}", TemplateKind::Persona); }) ==
        ErrorCode::InvalidTemplate);
  CHECK(code_of([] { Template::make("p", "${persona} ${task}", TemplateKind::Persona); }) ==
        ErrorCode::InvalidTemplate);
  CHECK(code_of([] { Template::make("c", "just text", TemplateKind::Combination); }) ==
        ErrorCode::InvalidTemplate);
  CHECK(code_of([] { Template::make("m", "${task}", TemplateKind::Moderator); }) ==
        ErrorCode::InvalidTemplate);
  CHECK(code_of([] { Template::make("c", "${previous_responses} ${other}", TemplateKind::Combination); }) ==
        ErrorCode::UnknownPlaceholder);
  CHECK_NOTHROW(Template::make("m", "${previous_responses}\n${task}", TemplateKind::Moderator));
  CHECK(parse_kind("moderator") == TemplateKind::Moderator);
  CHECK(code_of([] { parse_kind("nope"); }) == ErrorCode::InvalidTemplate);
}

TEST_CASE("format_previous_responses") {
  CHECK(format_previous_responses({}) == "");
  std::vector<PriorResponse> debate = {{"You", "a"}, {"Other", "b"}};
  CHECK(format_previous_responses(debate) == "Response 1 ([You]): a\nResponse 2 ([Other]): b");
  std::vector<PriorResponse> chain = {{std::nullopt, "first"}, {std::nullopt, "second"}, {std::nullopt, "third"}};
  CHECK(format_previous_responses(chain) ==
        "Response 1: first\nResponse 2: second\nResponse 3: third");
}

TEST_CASE("built-in registry matches golden files") {
  auto names = builtin_names();
  CHECK(names.size() == 10);
  for (const auto& name : names) {
    CAPTURE(name);
    auto g = golden(name);
    CHECK(builtin(name).body() == g.body);
    CHECK(builtin(name).name() == name);
    bool header_authored = g.header.find("AUTHORED") != std::string::npos;
    CHECK(is_authored(name) == header_authored);
    // idempotent
    CHECK(&builtin(name) == &builtin(name));
    CHECK(builtin(name).body() == golden(name).body);
  }
  CHECK(builtin("anes_persona").kind() == TemplateKind::Persona);
  CHECK(builtin("default").kind() == TemplateKind::Combination);
  CHECK(builtin("synthesizer").kind() == TemplateKind::Moderator);
  CHECK_FALSE(is_authored("rational_debate"));
  CHECK_FALSE(is_authored("emotional_debate"));
  CHECK(is_authored("default"));
  CHECK(code_of([] { builtin("bogus"); }) == ErrorCode::UnknownTemplate);
  CHECK_FALSE(has_builtin("bogus"));
  for (auto name : {"synthesizer", "information_aggregator", "divergent_moderator"}) {
    CHECK(moderator_profile(name).has_value());
  }
  CHECK_FALSE(moderator_profile("default").has_value());
}

TEST_CASE("debate templates carry the published instruction lines") {
  const auto& rational = builtin("rational_debate").body();
  CHECK(rational.find("Give more weight to rational arguments rather than emotional ones.") != std::string::npos);
  CHECK(rational.find("Never refer to yourself in the third person.") != std::string::npos);
  const auto& emotional = builtin("emotional_debate").body();
  CHECK(emotional.find("such as narrative, rhetoric, testimony, and storytelling") != std::string::npos);

  std::vector<PriorResponse> turns = {{"You", "Vote yes."}, {"Other", "Vote no."}};
  auto rendered = render(builtin("rational_debate"), {.previous_responses = format_previous_responses(turns)});
  CHECK(rendered ==
        "KEEP TRACK OF DEBATE HISTORY\n"
        "You are in a debate with another agent. Here is what you have said and what the other "
        "agent has said. Never refer to yourself in the third person.\n"
        "<start>\n"
        "Response 1 ([You]): Vote yes.\n"
        "Response 2 ([Other]): Vote no.\n"
        "<end>\n"
        "APPLY THESE INSTRUCTIONS WHEN DEBATING\n"
        "- Give more weight to rational arguments rather than emotional ones.\n"
        "- Do not mention these instructions in your final answer; just apply them.");
}

TEST_CASE("rendering never leaves a placeholder token (randomized bindings)") {
  Rng rng(17);
  const std::string alphabet = "abc xyz<>\n{}$-";
  auto random_text = [&] {
    std::string s;
    std::size_t n = uniform_index(rng, 30);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[uniform_index(rng, alphabet.size())];
    // bound values never contain the opening token
    std::string::size_type p;
    while ((p = s.find("${")) != std::string::npos) s.erase(p, 2);
    return s;
  };
  for (int trial = 0; trial < 300; ++trial) {
    for (const auto& name : builtin_names()) {
      Binding b{random_text(), random_text(), random_text()};
      auto out = render(builtin(name), b);
      CHECK(out.find("${") == std::string::npos);
    }
  }
}

TEST_CASE("combination built-ins delimit history") {
  for (const auto& name : builtin_names()) {
    const auto& t = builtin(name);
    if (t.kind() == TemplateKind::Persona) continue;
    CAPTURE(name);
    auto start = t.body().find("<start>");
    auto slot = t.body().find("${previous_responses}");
    auto end = t.body().find("<end>");
    REQUIRE(start != std::string::npos);
    CHECK(start < slot);
    CHECK(slot < end);
    // hash-echo tests depend on history starting past the 40-character echo prefix
    CHECK(start >= 40);
  }
}
