#pragma once

namespace mimik {

/// Experiment driver entry point. Exit codes: 0 success, 1 config/schema
/// error, 2 numeric precondition violation, 3 fit did not converge (artifacts
/// still written).
int run_cli(int argc, const char* const* argv);

}  // namespace mimik
