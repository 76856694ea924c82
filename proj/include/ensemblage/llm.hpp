#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ensemblage/error.hpp"

namespace ensemblage::llm {

using ParamValue = std::variant<bool, std::int64_t, double, std::string>;

struct ModelRequest {
  std::string model_id;
  std::optional<std::string> system_instructions;
  std::string user_message;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::map<std::string, ParamValue> extra_params;

  /// Throws Error(InvalidRequest) on an empty user message, a negative or
  /// non-finite temperature, or a non-positive max_tokens.
  void validate() const;

  bool operator==(const ModelRequest&) const = default;
};

struct ModelResponse {
  std::string text;
  std::string model_id;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
  double backoff_multiplier = 2.0;

  /// Delay slept before attempt `next_attempt` (2-based: the first retry is
  /// attempt 2). Non-decreasing in `next_attempt`.
  std::chrono::milliseconds delay_before(int next_attempt) const;
};

/// Retry classification. Network failures, timeouts, 429 and 5xx are
/// transient; everything else surfaces on the first attempt.
bool is_retryable(const BackendError& error) noexcept;

/// A completion endpoint. Implementations must be safe to call from several
/// threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual ModelResponse complete(const ModelRequest& request) = 0;

  /// Short human-readable identity, e.g. "mock:hash_echo" or "openai".
  virtual std::string name() const = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Shared retry loop. Subclasses implement one raw attempt that either
/// returns provider text or throws a BackendError.
class RetryingBackend : public Backend {
 public:
  explicit RetryingBackend(RetryPolicy policy = {});

  ModelResponse complete(const ModelRequest& request) final;

  const RetryPolicy& retry_policy() const noexcept { return policy_; }
  void set_retry_policy(RetryPolicy policy);

  /// Replaces std::this_thread::sleep_for; tests use it to observe delays.
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

 protected:
  virtual std::string attempt(const ModelRequest& request) = 0;

 private:
  RetryPolicy policy_;
  Sleeper sleeper_;
};

// ---------------------------------------------------------------------------
// Mock backend

struct ScriptRule {
  enum class Match { Exact, Contains };
  Match match = Match::Exact;
  std::string pattern;
  std::string reply;
};

struct ScriptedMode {
  /// Checked in order; the first matching rule wins.
  std::vector<ScriptRule> rules;
  std::optional<std::string> fallback;
  /// When no rule matches and there is no fallback text, answer like
  /// hash_echo instead of raising ScriptMiss.
  bool fallback_to_hash_echo = false;
};

struct HashEchoMode {};

struct SequenceMode {
  std::vector<std::string> items;
};

using MockMode = std::variant<ScriptedMode, HashEchoMode, SequenceMode>;

/// Convenience for the common exact-match map.
ScriptedMode scripted(const std::map<std::string, std::string>& script,
                      std::optional<std::string> fallback = std::nullopt);

/// Frozen hash-echo reply: "[echo:<16 hex digits>] <first 40 code points of
/// the user message>". The digest covers every field of the request, so
/// distinct requests give distinct tags.
std::string hash_echo_text(const ModelRequest& request);

/// Tag part of a hash-echo reply ("[echo:...]"), or empty when `text` is not
/// one.
std::string hash_echo_tag(const std::string& text);

class MockBackend final : public RetryingBackend {
 public:
  explicit MockBackend(MockMode mode);

  std::string name() const override;

  /// Number of completions served (successful or not).
  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  std::string attempt(const ModelRequest& request) override;

 private:
  MockMode mode_;
  std::mutex mutex_;
  std::size_t next_item_ = 0;
  std::atomic<std::size_t> calls_{0};
};

std::shared_ptr<MockBackend> make_mock_backend(MockMode mode);

// ---------------------------------------------------------------------------
// OpenAI-compatible chat-completions adapter

struct HttpBackendConfig {
  std::string provider;  // used in error messages and name()
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::chrono::seconds timeout{60};
};

/// Resolves ENSEMBLAGE_API_KEY_<PROVIDER> and ENSEMBLAGE_BASE_URL_<PROVIDER>
/// (provider upper-cased, non-alphanumerics mapped to '_'). Only "openai"
/// has a default base URL. Throws AuthError when the key variable is unset.
HttpBackendConfig http_config_from_env(const std::string& provider);

std::string provider_env_suffix(const std::string& provider);

class OpenAICompatibleBackend final : public RetryingBackend {
 public:
  explicit OpenAICompatibleBackend(HttpBackendConfig config,
                                   RetryPolicy policy = {});

  std::string name() const override { return config_.provider; }

  /// Request body sent for `request`; exposed for tests.
  static std::string request_body(const ModelRequest& request);

 protected:
  std::string attempt(const ModelRequest& request) override;

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

// ---------------------------------------------------------------------------

/// Forwards to another backend and counts completions. Structures use it to
/// check that every backend call made during a run appears in the trace.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  ModelResponse complete(const ModelRequest& request) override {
    ++count_;
    return inner_.complete(request);
  }
  std::string name() const override { return inner_.name(); }
  std::size_t count() const noexcept { return count_.load(); }

 private:
  Backend& inner_;
  std::atomic<std::size_t> count_{0};
};

}  // namespace ensemblage::llm
