#pragma once

#include <stdexcept>
#include <string>

namespace deepfa {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    data = 2,
    component = 3,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::data; }
};

class UsageError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// Malformed input file. The message names the line or byte offset.
class ParseError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid parameter combination (split fractions, seeds, t-SNE params...).
class SpecError : public Error {
public:
    using Error::Error;
};

class StratificationError : public Error {
public:
    using Error::Error;
};

class SeedError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DegenerateRowError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::component; }
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long iteration)
        : Error(what), iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }
    ExitCode exit_code() const noexcept override { return ExitCode::component; }

private:
    long iteration_;
};

// Failure of an external extractor process; carries its captured stderr.
class ExtractorError : public Error {
public:
    ExtractorError(const std::string& what, std::string diagnostics = {})
        : Error(diagnostics.empty() ? what : what + "\n" + diagnostics),
          diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const noexcept { return diagnostics_; }
    ExitCode exit_code() const noexcept override { return ExitCode::component; }

private:
    std::string diagnostics_;
};

}  // namespace deepfa
