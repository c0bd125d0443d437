#pragma once

namespace fsnc {

// Command-line entry point (thin main() lives in tools/).  Returns the
// process exit code: 0 on success, 1 for invalid input of any kind (bad
// flags, malformed files, impossible settings, failed audits), 2 for
// unexpected runtime failures.
int run_cli(int argc, const char* const* argv);

}  // namespace fsnc
