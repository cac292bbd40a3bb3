#pragma once

#include <ostream>
#include <string_view>
#include <vector>

#include "dynalloc/config.hpp"

namespace dynalloc::cli {

const std::vector<std::string_view>& command_names();

/// Runs one pipeline stage, writing artifacts under cfg.out. Throws
/// dynalloc::Error on failure.
void dispatch(std::string_view command, const RunConfig& cfg, std::ostream& log);

}  // namespace dynalloc::cli
