#pragma once

#include <string>

namespace ddar {

// Writes to a sibling temp file then renames, so readers never observe a
// truncated artifact.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace ddar
