// Copyright 2026 The rpm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "rpm/types.hpp"

// RFC-4180 CSV with '.' decimals and 17 significant digits.

namespace rpm {

inline std::string csv_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    rows_.push_back(std::move(header));
  }

  class Row {
   public:
    Row& operator<<(const std::string& s) {
      cells_.push_back(s);
      return *this;
    }
    Row& operator<<(const char* s) { return *this << std::string(s); }
    Row& operator<<(double x) { return *this << csv_number(x); }
    Row& operator<<(int x) { return *this << std::to_string(x); }
    Row& operator<<(long x) { return *this << std::to_string(x); }
    Row& operator<<(long long x) { return *this << std::to_string(x); }
    Row& operator<<(unsigned long x) { return *this << std::to_string(x); }
    Row& operator<<(unsigned long long x) { return *this << std::to_string(x); }
    ~Row() noexcept(false) { owner_.commit(std::move(cells_)); }

   private:
    friend class CsvWriter;
    explicit Row(CsvWriter& owner) : owner_(owner) {}
    CsvWriter& owner_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }

  std::string str() const {
    std::string out;
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += csv_field(r[i]);
      }
      out += "\r\n";
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + path);
    f << str();
  }

  std::size_t size() const { return rows_.size() - 1; }

 private:
  void commit(std::vector<std::string> cells) {
    if (cells.size() != columns_) throw InvalidInput("CsvWriter: row width differs from header");
    rows_.push_back(std::move(cells));
  }

  std::size_t columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace rpm
