#pragma once

#include <stdexcept>
#include <string>

namespace scepipe {

/// Error codes for every failure the pipeline can surface. Loaders, parsers
/// and stage drivers throw Error with one of these codes; the CLI catches
/// per clip and records failures instead of aborting the batch.
enum class Errc {
    MissingFile,
    MalformedRow,
    NonFiniteSample,
    RateMismatch,
    TooFewSamples,
    InvalidValue,
    EmptySeries,
    ClipTooShort,
    WindowTooShort,
    MalformedRecord,
    OutOfRangeBBox,
    OutOfRangeSeverity,
    UnknownProfile,
    FrameCountMismatch,
    MissingBlock,
    BadField,
    EmptyCaption,
    UnknownSceLabel,
    Timeout,
    RateLimited,
    TransportError,
    BadRatios,
    IoError,
    DuplicateExampleId,
    LengthMismatch,
    EmptyInput,
    InvalidProfile,
};

const char* errcName(Errc code);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errcName(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

} // namespace scepipe
