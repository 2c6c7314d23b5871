#include "evidence3/io_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "evidence3/errors.hpp"

namespace ev3 {

namespace fs = std::filesystem;

namespace {

void write_then_rename(const std::string& path, const std::string& bytes, bool binary) {
  fs::path target(path);
  fs::path dir = target.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? (std::ios::out | std::ios::binary) : std::ios::out);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
  write_then_rename(path, content, false);
}

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  write_then_rename(path, bytes, true);
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ev3
