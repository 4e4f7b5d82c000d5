#ifndef CEGATE_CHECK_HPP
#define CEGATE_CHECK_HPP

#include <stdexcept>
#include <string>

namespace cegate {

// Argument/shape violations.
inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Numeric-domain violations (NaN inputs, invalid distributions).
inline void check_numeric(bool cond, const std::string& msg) {
    if (!cond) throw std::domain_error(msg);
}

// Index violations (labels, ids).
inline void check_index(bool cond, const std::string& msg) {
    if (!cond) throw std::out_of_range(msg);
}

// File/format violations (checkpoints, manifests, configs).
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_io(bool cond, const std::string& msg) {
    if (!cond) throw io_error(msg);
}

}  // namespace cegate

#endif
