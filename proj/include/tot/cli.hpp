#pragma once

namespace tot {

// Parses argv, runs the selected subcommand, and maps the error taxonomy to
// process exit codes: 0 success, 2 config/usage, 3 numeric, 4 I/O.
int run_cli(int argc, char** argv);

}  // namespace tot
