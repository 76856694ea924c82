#include <cctype>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "ensemblage/llm.hpp"

namespace ensemblage::llm {

using nlohmann::json;

std::string provider_env_suffix(const std::string& provider) {
  std::string out;
  out.reserve(provider.size());
  for (unsigned char c : provider) {
    out += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  }
  return out;
}

HttpBackendConfig http_config_from_env(const std::string& provider) {
  HttpBackendConfig config;
  config.provider = provider;
  const std::string suffix = provider_env_suffix(provider);
  const std::string key_var = "ENSEMBLAGE_API_KEY_" + suffix;
  const std::string url_var = "ENSEMBLAGE_BASE_URL_" + suffix;

  const char* key = std::getenv(key_var.c_str());
  if (key == nullptr) {
    throw AuthError("missing credential: set " + key_var);
  }
  config.api_key = key;

  if (const char* url = std::getenv(url_var.c_str()); url != nullptr && *url) {
    config.base_url = url;
  } else if (suffix == "OPENAI") {
    config.base_url = "https://api.openai.com/v1";
  } else {
    throw Error(ErrorCode::InvalidConfig,
                "no base URL for provider '" + provider + "': set " + url_var);
  }
  return config;
}

OpenAICompatibleBackend::OpenAICompatibleBackend(HttpBackendConfig config,
                                                 RetryPolicy policy)
    : RetryingBackend(policy), config_(std::move(config)) {
  const std::string& url = config_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "base URL lacks a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string OpenAICompatibleBackend::request_body(const ModelRequest& request) {
  json messages = json::array();
  if (request.system_instructions) {
    messages.push_back({{"role", "system"}, {"content", *request.system_instructions}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_message}});

  json body = {{"model", request.model_id}, {"messages", messages}};
  if (request.temperature) body["temperature"] = *request.temperature;
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  for (const auto& [key, value] : request.extra_params) {
    std::visit([&](const auto& v) { body[key] = v; }, value);
  }
  return body.dump();
}

std::string OpenAICompatibleBackend::attempt(const ModelRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);

  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  auto result = client.Post(path_prefix_ + "/chat/completions", headers,
                            request_body(request), "application/json");
  if (!result) {
    auto err = result.error();
    std::string what = httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw TimeoutError(config_.provider + ": " + what);
    }
    throw ProviderError(0, config_.provider + ": " + what);
  }

  const int status = result->status;
  if (status == 401 || status == 403) {
    throw AuthError(config_.provider + ": credential rejected (status " +
                    std::to_string(status) + ")");
  }
  if (status < 200 || status >= 300) {
    throw ProviderError(status, result->body);
  }

  json parsed = json::parse(result->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw ProviderError(status, "unparseable response body: " + result->body);
  }
  try {
    const json& content = parsed.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string{} : content.get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(status, std::string("unexpected response shape: ") + e.what());
  }
}

}  // namespace ensemblage::llm
