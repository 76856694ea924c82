#include "ensemblage/error.hpp"

namespace ensemblage {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Auth: return "AuthError";
    case ErrorCode::Provider: return "ProviderError";
    case ErrorCode::Timeout: return "TimeoutError";
    case ErrorCode::ScriptMiss: return "ScriptMiss";
    case ErrorCode::SequenceExhausted: return "SequenceExhausted";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::Schema: return "SchemaError";
    case ErrorCode::CodebookMismatch: return "CodebookMismatch";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::QuerySyntax: return "QuerySyntax";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::MissingTask: return "MissingTask";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownStructure: return "UnknownStructure";
    case ErrorCode::TraceIncomplete: return "TraceIncomplete";
    case ErrorCode::EmptyDeliberation: return "EmptyDeliberation";
    case ErrorCode::UnparseableDecision: return "UnparseableDecision";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorCode::Parse: return "ParseError";
  }
  return "Error";
}

}  // namespace ensemblage
