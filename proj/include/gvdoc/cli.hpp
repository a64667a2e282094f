#pragma once

namespace gvdoc {

// Entry point behind the `gvdoc` binary. Exit codes: 0 success, 1 usage
// error, 2 malformed data, 3 violated invariant.
int run_cli(int argc, const char* const* argv);

}  // namespace gvdoc
