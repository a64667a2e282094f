#pragma once

#include <stdexcept>
#include <string>

namespace gvdoc {

// Malformed input: bad file format, schema violation, unparseable field.
// CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A validated internal contract does not hold: bad geometry, shape mismatch,
// non-finite value, failed check. CLI maps this to exit code 3.
struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InvariantError(msg);
}

}  // namespace gvdoc
