#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fbent {

// Invalid configuration values or unparsable config files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input data that cannot be analysed (empty sets, malformed files, missing sidebands).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An iterative solver hit its limits; the payload describes the best iterate.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-fatal diagnostics (Taylor validity, unresolved resonances). Default sink is stderr.
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

} // namespace fbent
