#pragma once

#include <string>

namespace fsnc {

// Reads an entire file; throws std::invalid_argument naming the path if it
// cannot be opened.
std::string read_text_file(const std::string& path);

// Writes via a temp file in the same directory followed by an atomic rename,
// so readers never observe a half-written file.
void atomic_write_file(const std::string& path, const std::string& bytes);

}  // namespace fsnc
