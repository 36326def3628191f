#pragma once

#include <ostream>

namespace otomo::app {

// Runs one subcommand. Returns 0 on success, 1 on a runtime failure and 2
// on a usage error (no subcommand, unknown subcommand or flag).
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace otomo::app
