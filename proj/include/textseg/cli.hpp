// Command-line entry point (separated from main() so tests can call it).

#pragma once

namespace textseg {

inline constexpr const char* kToolVersion = "0.1.0";

// Dispatches generate / skeletonize / train / eval / predict / ablate / viz.
// Returns 0 on success, 2 on usage errors, 1 on runtime errors.
int run_cli(int argc, const char* const* argv);

}  // namespace textseg
