#pragma once

namespace sentinel {

/// Entry point for the erc-sentinel command-line tool.
/// Exit codes: 0 success / no findings, 1 findings or validation issues,
/// 2 operational error.
int run_cli(int argc, const char* const* argv);

}  // namespace sentinel
