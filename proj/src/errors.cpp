#include "generallog/errors.hpp"

namespace generallog {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyLine: return "EmptyLine";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::UnknownTemplate: return "UnknownTemplate";
        case ErrorCode::EmptySequence: return "EmptySequence";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyIndex: return "EmptyIndex";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::OneDomainOnly: return "OneDomainOnly";
        case ErrorCode::NoLabels: return "NoLabels";
        case ErrorCode::DivergedTask: return "DivergedTask";
        case ErrorCode::MetaStepFailed: return "MetaStepFailed";
        case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::InconsistentSpec: return "InconsistentSpec";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Config: return "Config";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace generallog
