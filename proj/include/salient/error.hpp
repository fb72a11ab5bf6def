#pragma once

#include <stdexcept>
#include <string>

namespace salient {

/// Failure category; the CLI maps each to a distinct exit code.
enum class ErrorKind { config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorKind::numeric, what}; }

}  // namespace salient
