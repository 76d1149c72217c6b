#pragma once

#include <stdexcept>
#include <string>

namespace rkhsmm {

/// Raised when an argument violates a documented precondition.
class invalid_argument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot produce a finite answer.
/// `context()` names the offending group or tuning pair.
class numeric_failure : public std::runtime_error {
public:
    explicit numeric_failure(const std::string& what, std::string context = {})
        : std::runtime_error(context.empty() ? what : what + " [" + context + "]"),
          context_(std::move(context)) {}

    const std::string& context() const noexcept { return context_; }

private:
    std::string context_;
};

} // namespace rkhsmm
