#pragma once

#include <iostream>

namespace sil::cli {

/// Runs one `sil` invocation. Returns the process exit code:
/// 0 success, 1 usage/validation error, 2 runtime or numeric error.
int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace sil::cli
