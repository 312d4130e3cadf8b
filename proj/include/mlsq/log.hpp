#pragma once

#include <string_view>

namespace mlsq {

/// Progress and warnings go to stderr; machine-readable output goes to files.
void set_quiet(bool quiet) noexcept;
void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace mlsq
