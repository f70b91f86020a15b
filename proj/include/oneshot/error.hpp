#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oneshot {

enum class ErrorCode {
    NotHermitian,
    NotPSD,
    TraceOutOfRange,
    DimMismatch,
    BadSubsystemIndex,
    BadCut,
    KrausNotTP,
    EpsilonOutOfRange,
    EpsilonRequired,
    AlphaOutOfRange,
    BadInterval,
    NotConverged,
    Infeasible,
    ClassicalOnly,
    InfeasibleTarget,
    DegenerateNullspace,
    NoFeasibleK,
    TooLarge,
    EtaOutOfRange,
    BudgetViolated,
    NotReachedWithinSchedule,
    BadSymbol,
    ParseError,
    IOError,
};

inline const char* codeName(ErrorCode c) {
    switch (c) {
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::TraceOutOfRange: return "TraceOutOfRange";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::BadSubsystemIndex: return "BadSubsystemIndex";
    case ErrorCode::BadCut: return "BadCut";
    case ErrorCode::KrausNotTP: return "KrausNotTP";
    case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorCode::EpsilonRequired: return "EpsilonRequired";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::BadInterval: return "BadInterval";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::ClassicalOnly: return "ClassicalOnly";
    case ErrorCode::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorCode::DegenerateNullspace: return "DegenerateNullspace";
    case ErrorCode::NoFeasibleK: return "NoFeasibleK";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::EtaOutOfRange: return "EtaOutOfRange";
    case ErrorCode::BudgetViolated: return "BudgetViolated";
    case ErrorCode::NotReachedWithinSchedule: return "NotReachedWithinSchedule";
    case ErrorCode::BadSymbol: return "BadSymbol";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IOError: return "IOError";
    }
    return "Unknown";
}

// numeric failures map to CLI exit 3, everything else to 4
inline bool isNumericFailure(ErrorCode c) {
    return c == ErrorCode::NotConverged || c == ErrorCode::Infeasible ||
           c == ErrorCode::DegenerateNullspace || c == ErrorCode::NotReachedWithinSchedule ||
           c == ErrorCode::NoFeasibleK;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg,
          std::vector<std::pair<std::string, double>> fields = {})
        : std::runtime_error(std::string(codeName(code)) + ": " + msg),
          code_(code), fields_(std::move(fields)) {}

    ErrorCode code() const { return code_; }
    const std::vector<std::pair<std::string, double>>& fields() const { return fields_; }

private:
    ErrorCode code_;
    std::vector<std::pair<std::string, double>> fields_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& msg,
                              std::vector<std::pair<std::string, double>> fields = {}) {
    throw Error(c, msg, std::move(fields));
}

} // namespace oneshot
