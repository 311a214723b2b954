#include "legal_synth/error.hpp"

namespace legal_synth {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::NoSectionsFound: return "NoSectionsFound";
    case ErrorKind::DuplicateSection: return "DuplicateSection";
    case ErrorKind::DuplicatePassage: return "DuplicatePassage";
    case ErrorKind::UnknownLaw: return "UnknownLaw";
    case ErrorKind::EmptySection: return "EmptySection";
    case ErrorKind::Arity: return "ArityError";
    case ErrorKind::UnknownLevel: return "UnknownLevel";
    case ErrorKind::TooManyCandidates: return "TooManyCandidates";
    case ErrorKind::ParseFailure: return "ParseFailure";
    case ErrorKind::BackendExhausted: return "BackendExhausted";
    case ErrorKind::Auth: return "AuthError";
    case ErrorKind::Protocol: return "ProtocolError";
    case ErrorKind::ReplayMiss: return "ReplayMiss";
    case ErrorKind::UnknownQaId: return "UnknownQaId";
    case ErrorKind::DuplicateUnit: return "DuplicateUnit";
    case ErrorKind::MissingAssignment: return "MissingAssignment";
    case ErrorKind::Contamination: return "ContaminationError";
    case ErrorKind::DegenerateItem: return "DegenerateItem";
    case ErrorKind::SetMismatch: return "SetMismatch";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::AllTasksFailed: return "AllTasksFailed";
  }
  return "Error";
}

}  // namespace legal_synth
