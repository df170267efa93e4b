#pragma once

namespace mopred {

// Parses and runs one CLI invocation. Returns 0 on success, 2 on usage
// errors, 1 on any runtime failure (with a diagnostic on stderr).
int cli_dispatch(int argc, const char* const* argv);

}  // namespace mopred
