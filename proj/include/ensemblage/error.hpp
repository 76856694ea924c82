#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ensemblage {

enum class ErrorCode {
  // llm_backend
  Auth,
  Provider,
  Timeout,
  ScriptMiss,
  SequenceExhausted,
  InvalidRequest,
  // persona_engine
  Schema,
  CodebookMismatch,
  UnknownColumn,
  TypeMismatch,
  EmptyDataset,
  UnknownLabel,
  QuerySyntax,
  // template_engine
  MissingBinding,
  UnknownPlaceholder,
  UnknownTemplate,
  InvalidTemplate,
  // agent_core / structures / moderator
  MissingTask,
  InvalidConfig,
  CycleDetected,
  DuplicateName,
  UnknownStructure,
  TraceIncomplete,
  EmptyDeliberation,
  UnparseableDecision,
  // metrics
  EmptyCorpus,
  CorpusTooSmall,
  // cli_config
  SchemaVersionUnsupported,
  Parse,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base of every error raised by the library. `code()` identifies the
/// failure class without RTTI so the CLI can map it onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Failures coming out of a model backend. Agents annotate these with their
/// id before rethrowing so a failed run names the agent that hit it.
class BackendError : public Error {
 public:
  using Error::Error;

  const std::string& agent_id() const noexcept { return agent_id_; }
  void set_agent_id(std::string id) { agent_id_ = std::move(id); }

 private:
  std::string agent_id_;
};

class AuthError : public BackendError {
 public:
  explicit AuthError(const std::string& message)
      : BackendError(ErrorCode::Auth, message) {}
};

class ProviderError : public BackendError {
 public:
  ProviderError(int status, std::string body)
      : BackendError(ErrorCode::Provider,
                     "provider returned status " + std::to_string(status) +
                         (body.empty() ? std::string{} : ": " + body)),
        status_(status),
        body_(std::move(body)) {}

  /// HTTP status, or 0 when the request never produced a response.
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

class TimeoutError : public BackendError {
 public:
  explicit TimeoutError(const std::string& message)
      : BackendError(ErrorCode::Timeout, message) {}
};

class ScriptMiss : public BackendError {
 public:
  explicit ScriptMiss(const std::string& message)
      : BackendError(ErrorCode::ScriptMiss, message) {}
};

class SequenceExhausted : public BackendError {
 public:
  explicit SequenceExhausted(const std::string& message)
      : BackendError(ErrorCode::SequenceExhausted, message) {}
};

/// Raised when a turn cannot proceed because no task was given to the agent
/// or to its enclosing structure.
class MissingTask : public Error {
 public:
  explicit MissingTask(const std::string& message)
      : Error(ErrorCode::MissingTask, message) {}
};

class CycleDetected : public Error {
 public:
  CycleDetected(const std::string& message, std::vector<std::string> cycle)
      : Error(ErrorCode::CycleDetected, message), cycle_(std::move(cycle)) {}

  /// One offending cycle, first node repeated at the end.
  const std::vector<std::string>& cycle() const noexcept { return cycle_; }

 private:
  std::vector<std::string> cycle_;
};

}  // namespace ensemblage
