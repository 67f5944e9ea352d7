#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fasids {

/// Bad or inconsistent configuration: rule files, signature tables, fuzzy
/// configs, CLI arguments. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax error in a text input, carrying the 1-based line it was found on.
class ParseError : public ConfigError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Input source could not be opened or read.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fasids
