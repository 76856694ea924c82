#include <cmath>
#include <thread>

#include "ensemblage/llm.hpp"

namespace ensemblage::llm {

namespace {

void rtrim(std::string& s) {
  auto end = s.find_last_not_of(" \t\r\n\f\v");
  s.erase(end == std::string::npos ? 0 : end + 1);
}

}  // namespace

void ModelRequest::validate() const {
  if (user_message.empty()) {
    throw Error(ErrorCode::InvalidRequest, "user_message must be non-empty");
  }
  if (temperature && (!std::isfinite(*temperature) || *temperature < 0.0)) {
    throw Error(ErrorCode::InvalidRequest,
                "temperature must be finite and >= 0");
  }
  if (max_tokens && *max_tokens <= 0) {
    throw Error(ErrorCode::InvalidRequest, "max_tokens must be positive");
  }
}

std::chrono::milliseconds RetryPolicy::delay_before(int next_attempt) const {
  if (next_attempt <= 1) return std::chrono::milliseconds{0};
  double ms = static_cast<double>(base_backoff.count()) *
              std::pow(backoff_multiplier, next_attempt - 2);
  return std::chrono::milliseconds{static_cast<std::int64_t>(std::llround(ms))};
}

bool is_retryable(const BackendError& error) noexcept {
  switch (error.code()) {
    case ErrorCode::Timeout:
      return true;
    case ErrorCode::Provider: {
      int status = static_cast<const ProviderError&>(error).status();
      return status == 0 || status == 429 || status >= 500;
    }
    default:
      return false;
  }
}

RetryingBackend::RetryingBackend(RetryPolicy policy) {
  set_retry_policy(policy);
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void RetryingBackend::set_retry_policy(RetryPolicy policy) {
  if (policy.max_attempts < 1) {
    throw Error(ErrorCode::InvalidConfig, "RetryPolicy.max_attempts must be >= 1");
  }
  if (!(policy.backoff_multiplier >= 1.0)) {
    throw Error(ErrorCode::InvalidConfig,
                "RetryPolicy.backoff_multiplier must be >= 1");
  }
  if (policy.base_backoff.count() < 0) {
    throw Error(ErrorCode::InvalidConfig, "RetryPolicy.base_backoff must be >= 0");
  }
  policy_ = policy;
}

ModelResponse RetryingBackend::complete(const ModelRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  for (int attempt_no = 1;; ++attempt_no) {
    try {
      std::string text = attempt(request);
      rtrim(text);
      ModelResponse response;
      response.text = std::move(text);
      response.model_id = request.model_id;
      response.attempt_count = attempt_no;
      response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      return response;
    } catch (const BackendError& e) {
      if (!is_retryable(e) || attempt_no >= policy_.max_attempts) throw;
    }
    sleeper_(policy_.delay_before(attempt_no + 1));
  }
}

}  // namespace ensemblage::llm
