#include <cstdio>

#include "ensemblage/llm.hpp"
#include "ensemblage/random.hpp"

namespace ensemblage::llm {

namespace {

constexpr std::size_t kEchoPrefixCodePoints = 40;

std::string utf8_prefix(const std::string& s, std::size_t code_points) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto c = static_cast<unsigned char>(s[i]);
    if ((c & 0xC0) != 0x80) {
      if (seen == code_points) return s.substr(0, i);
      ++seen;
    }
  }
  return s;
}

void append_field(std::string& out, const std::string& value) {
  out += std::to_string(value.size());
  out += ':';
  out += value;
  out += '\x1f';
}

std::string canonical(const ModelRequest& r) {
  std::string out;
  append_field(out, r.model_id);
  append_field(out, r.system_instructions ? "S" + *r.system_instructions : "-");
  append_field(out, r.user_message);
  append_field(out, r.temperature ? std::to_string(*r.temperature) : "-");
  append_field(out, r.max_tokens ? std::to_string(*r.max_tokens) : "-");
  for (const auto& [key, value] : r.extra_params) {
    append_field(out, key);
    append_field(out, std::visit(
                          [](const auto& v) -> std::string {
                            using T = std::decay_t<decltype(v)>;
                            if constexpr (std::is_same_v<T, std::string>) {
                              return "s" + v;
                            } else if constexpr (std::is_same_v<T, bool>) {
                              return v ? "btrue" : "bfalse";
                            } else {
                              return "n" + std::to_string(v);
                            }
                          },
                          value));
  }
  return out;
}

}  // namespace

ScriptedMode scripted(const std::map<std::string, std::string>& script,
                      std::optional<std::string> fallback) {
  ScriptedMode mode;
  for (const auto& [prompt, reply] : script) {
    mode.rules.push_back({ScriptRule::Match::Exact, prompt, reply});
  }
  mode.fallback = std::move(fallback);
  return mode;
}

std::string hash_echo_text(const ModelRequest& request) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical(request))));
  return std::string("[echo:") + hex + "] " +
         utf8_prefix(request.user_message, kEchoPrefixCodePoints);
}

std::string hash_echo_tag(const std::string& text) {
  constexpr std::string_view open = "[echo:";
  constexpr std::size_t tag_len = open.size() + 16 + 1;
  if (text.size() < tag_len || text.compare(0, open.size(), open) != 0 ||
      text[tag_len - 1] != ']') {
    return {};
  }
  return text.substr(0, tag_len);
}

MockBackend::MockBackend(MockMode mode)
    : RetryingBackend(RetryPolicy{1, std::chrono::milliseconds{0}, 1.0}),
      mode_(std::move(mode)) {}

std::string MockBackend::name() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ScriptedMode>) return "mock:scripted";
        else if constexpr (std::is_same_v<T, HashEchoMode>) return "mock:hash_echo";
        else return "mock:sequence";
      },
      mode_);
}

std::string MockBackend::attempt(const ModelRequest& request) {
  ++calls_;
  if (auto* s = std::get_if<ScriptedMode>(&mode_)) {
    for (const auto& rule : s->rules) {
      bool hit = rule.match == ScriptRule::Match::Exact
                     ? request.user_message == rule.pattern
                     : request.user_message.find(rule.pattern) != std::string::npos;
      if (hit) return rule.reply;
    }
    if (s->fallback) return *s->fallback;
    if (s->fallback_to_hash_echo) return hash_echo_text(request);
    throw ScriptMiss("no scripted reply for prompt: " +
                     utf8_prefix(request.user_message, 60));
  }
  if (auto* q = std::get_if<SequenceMode>(&mode_)) {
    std::lock_guard lock(mutex_);
    if (next_item_ >= q->items.size()) {
      throw SequenceExhausted("mock sequence exhausted after " +
                              std::to_string(q->items.size()) + " replies");
    }
    return q->items[next_item_++];
  }
  return hash_echo_text(request);
}

std::shared_ptr<MockBackend> make_mock_backend(MockMode mode) {
  return std::make_shared<MockBackend>(std::move(mode));
}

}  // namespace ensemblage::llm
