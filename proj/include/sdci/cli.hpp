#pragma once

namespace sdci {

// Full command-line entry point: gen / train / eval / report.
// Returns the process exit code: 0 success, 1 runtime failure,
// 2 usage or configuration error.
int run_cli(int argc, const char* const* argv);

} // namespace sdci
