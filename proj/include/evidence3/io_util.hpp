#pragma once

#include <string>

namespace ev3 {

// Writes content to path via a temp file in the same directory followed by
// an atomic rename, so readers never observe a partial file.
void atomic_write_text(const std::string& path, const std::string& content);

// Writes raw bytes the same way.
void atomic_write_bytes(const std::string& path, const std::string& bytes);

std::string read_file_bytes(const std::string& path);

}  // namespace ev3
