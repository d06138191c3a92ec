// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "toxred/errors.hpp"

namespace toxred::jsonl {

using json = nlohmann::json;

// Reads a JSONL file, one object per non-empty line. Line numbers are
// 1-based in error messages.
inline std::vector<json> read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorKind::kIo, "cannot open " + path.string());
  }
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded()) {
      raise(ErrorKind::kFormat,
            path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    raise(ErrorKind::kIo, "cannot write " + path.string());
  }
  for (const json& row : rows) {
    out << row.dump() << '\n';
  }
  if (!out) {
    raise(ErrorKind::kIo, "write failed for " + path.string());
  }
}

}  // namespace toxred::jsonl
