#pragma once

#include <stdexcept>
#include <string>

namespace railscope {

/// Raised for malformed or inconsistent input data (scenario, trace, window).
/// The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace railscope
