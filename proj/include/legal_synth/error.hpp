#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace legal_synth {

enum class ErrorKind {
  Io,
  Schema,
  NoSectionsFound,
  DuplicateSection,
  DuplicatePassage,
  UnknownLaw,
  EmptySection,
  Arity,
  UnknownLevel,
  TooManyCandidates,
  ParseFailure,
  BackendExhausted,
  Auth,
  Protocol,
  ReplayMiss,
  UnknownQaId,
  DuplicateUnit,
  MissingAssignment,
  Contamination,
  DegenerateItem,
  SetMismatch,
  MissingArtifact,
  Config,
  AllTasksFailed,
};

std::string_view to_string(ErrorKind kind);

// Base exception for everything the pipeline raises on purpose.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace legal_synth
