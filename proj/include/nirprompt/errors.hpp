#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nirprompt {

// All recoverable failures carry a short category tag so the CLI can print
// categorized error text and tests can match on the failure kind.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error("[" + category + "] " + message),
          category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

[[noreturn]] inline void fail(const std::string& category, const std::string& message) {
    throw Error(category, message);
}

inline void require(bool cond, const std::string& category, const std::string& message) {
    if (!cond) fail(category, message);
}

}  // namespace nirprompt
