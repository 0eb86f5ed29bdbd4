// Copyright 2026 The MPE-PSN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mpepsn/tensor_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mpepsn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t parse_extent(std::string_view text, std::size_t line) {
  text = trim(text);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError(line, "bad extent '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

double parse_real(std::string_view text, std::size_t line) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ParseError(line, "bad number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void write_tensor_csv(std::ostream& out, const Tensor& x) {
  out << "# shape: ";
  for (std::size_t i = 0; i < x.rank(); ++i) out << (i ? "," : "") << x.shape()[i];
  out << '\n';
  const std::size_t cols = x.rank() == 0 ? 1 : x.shape().back();
  const std::size_t rows = cols == 0 ? 0 : x.size() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << format_real(x[r * cols + c]);
    }
    out << '\n';
  }
}

Tensor read_tensor_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(0, "empty tensor file");
  ++lineno;
  constexpr std::string_view kHeader = "# shape:";
  std::string_view head = trim(line);
  if (head.substr(0, kHeader.size()) != kHeader) {
    throw ParseError(lineno, "expected '# shape: ...' header");
  }
  Tensor::Shape shape;
  std::string_view dims = trim(head.substr(kHeader.size()));
  if (!dims.empty()) {
    for (auto field : split_csv(dims)) shape.push_back(parse_extent(field, lineno));
  }
  if (shape.size() > 3) throw ParseError(lineno, "tensor rank above 3");

  const std::size_t cols = shape.empty() ? 1 : shape.back();
  const std::size_t total = shape_size(shape);
  const std::size_t rows = cols == 0 ? 0 : total / cols;
  std::vector<double> data;
  data.reserve(total);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw ParseError(lineno + 1, "missing row " + std::to_string(r + 1) + " of " +
                                       std::to_string(rows));
    }
    ++lineno;
    auto fields = split_csv(line);
    if (fields.size() != cols) {
      throw ParseError(lineno, "expected " + std::to_string(cols) + " values, found " +
                                   std::to_string(fields.size()));
    }
    for (auto f : fields) data.push_back(parse_real(f, lineno));
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) throw ParseError(lineno, "unexpected trailing row");
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& x) {
  std::ostringstream out;
  write_tensor_csv(out, x);
  write_file_atomic(path, out.str());
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_tensor_csv(in);
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename onto " + path);
  }
}

}  // namespace mpepsn
