#pragma once
#include <stdexcept>
#include <string>

namespace fedgen {

enum class ErrorKind {
    NotPositiveDefinite,
    EmptyInput,
    DegenerateData,
    ShapeMismatch,
    InvalidConfig,
    EmptyDataset,
    ParseError,
    IoError,
    InvalidAlpha,
    EmptyPool,
    UnknownEmbedder,
    TooFewPoints,
    NonSquare,
    InvalidFraction,
    TooFewClients,
    InvalidSpec,
    TooMany,
    EmptyClient,
    EmptyRound,
    ZeroWeight,
    EmptyBlock,
    OutOfRangeFeatures,
    NoQualifyingClients,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace fedgen
