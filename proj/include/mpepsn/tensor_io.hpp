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

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "mpepsn/tensor.hpp"

namespace mpepsn {

/// `v` with 17 significant digits, which always parses back to the same double.
std::string format_real(double v);
/// Parses a real written by format_real; throws ParseError on junk.
double parse_real(std::string_view text, std::size_t line);

/// Tensor CSV: a `# shape: d0,d1,...` header, then one row per slice over
/// all but the last axis, each row holding the last-axis values.
void write_tensor_csv(std::ostream& out, const Tensor& x);
Tensor read_tensor_csv(std::istream& in);

void save_tensor(const std::string& path, const Tensor& x);
Tensor load_tensor(const std::string& path);

/// Writes `contents` to `path` via a temporary sibling and a rename.
void write_file_atomic(const std::string& path, std::string_view contents);

/// Splits one CSV line on commas, trimming surrounding blanks.
std::vector<std::string_view> split_csv(std::string_view line);

}  // namespace mpepsn
