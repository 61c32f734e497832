#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace trec {

// Thrown when a caller violates a documented precondition.
class ContractViolation : public std::runtime_error {
public:
    explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
[[noreturn]] inline void raise_contract(const char* expr, const std::string& msg) {
    std::ostringstream os;
    os << "contract violation: " << msg << " (" << expr << ")";
    throw ContractViolation(os.str());
}
}  // namespace detail

}  // namespace trec

#define TREC_CHECK(cond, msg)                              \
    do {                                                   \
        if (!(cond)) {                                     \
            ::trec::detail::raise_contract(#cond, (msg));  \
        }                                                  \
    } while (0)
