#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace zsl {

/// Runs one CLI invocation. `args` excludes the program name. Returns the
/// process exit code; failures print a one-line diagnostic to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies ZSL_EMBED_LOG (error, info, debug) to the global logger.
void configure_logging();

}  // namespace zsl
