#pragma once

#include <stdexcept>
#include <string>

namespace vli {

// Error taxonomy shared across the toolchain. The CLI maps these onto its
// exit codes: input/parse/config problems -> 2, compression -> 3,
// simulation faults -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed assembly, trace, frequency-table or profile text.
struct ParseError : Error {
    ParseError(const std::string& msg, int line = 0, int column = 0)
        : Error(line > 0 ? "line " + std::to_string(line) +
                               (column > 0 ? ":" + std::to_string(column) : "") + ": " + msg
                         : msg),
          line(line), column(column) {}
    int line;
    int column;
};

// Instruction field out of range for its container.
struct EncodeError : Error {
    using Error::Error;
};

// Unclassifiable or corrupt encoded bytes.
struct DecodeError : Error {
    using Error::Error;
};

// compress() could not produce a legal image (displacement overflow, ...).
struct CompressError : Error {
    using Error::Error;
};

// Bad run configuration (negative frequency, impossible layout, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Internal inconsistency during simulation (trace/stream divergence,
// queue overwrite). Always indicates a bug or a corrupt image.
struct SimFault : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace vli
