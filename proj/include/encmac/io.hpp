// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

namespace encmac {

// Shortest round-trip decimal rendering; integers print without a fraction.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Writes via a sibling temp file plus rename so readers never observe a
// half-written artifact.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (!dir.empty() && !fs::exists(dir)) {
    throw fs::filesystem_error(
        "output directory does not exist", dir,
        std::make_error_code(std::errc::no_such_file_or_directory));
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw fs::filesystem_error(
          "cannot open file for writing", tmp,
          std::make_error_code(std::errc::permission_denied));
    }
    out << content;
    if (!out.flush()) {
      throw fs::filesystem_error("write failed", tmp,
                                 std::make_error_code(std::errc::io_error));
    }
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::filesystem::filesystem_error(
        "cannot open file", path,
        std::make_error_code(std::errc::no_such_file_or_directory));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace encmac
