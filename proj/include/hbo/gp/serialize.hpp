// Copyright 2026 The hbo-tune Authors
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

// Line-oriented text records for kernels and datasets:
//
//   kernel <kind> <signal_variance> <d> <ell_1> ... <ell_d>
//   dataset <n> <d> <noise_variance>
//   row <xi_1> ... <xi_d> <y>          (n lines)
//
// Numbers are written with 17 significant digits so a write/read cycle
// reproduces every double exactly.

#pragma once

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "hbo/core.hpp"
#include "hbo/gp/kernel.hpp"
#include "hbo/gp/posterior.hpp"

namespace hbo::gp {

namespace detail {

inline std::ostream& full_precision(std::ostream& os) {
  return os << std::setprecision(std::numeric_limits<double>::max_digits10);
}

inline std::istringstream next_record(std::istream& is, const std::string& tag) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream rec(line);
    std::string got;
    rec >> got;
    if (got != tag) {
      throw InvalidArgument("expected '" + tag + "' record, got '" + got + "'");
    }
    return rec;
  }
  throw InvalidArgument("unexpected end of input looking for '" + tag + "'");
}

inline double read_double(std::istringstream& rec, const std::string& what) {
  std::string token;
  if (!(rec >> token)) throw InvalidArgument("missing field: " + what);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("malformed number for " + what + ": " + token);
  }
  if (used != token.size()) {
    throw InvalidArgument("malformed number for " + what + ": " + token);
  }
  return v;
}

}  // namespace detail

inline void write_kernel(std::ostream& os, const KernelSpec& k) {
  detail::full_precision(os);
  os << "kernel " << to_string(k.kind) << ' ' << k.signal_variance << ' '
     << k.dim();
  for (Eigen::Index i = 0; i < k.dim(); ++i) os << ' ' << k.lengthscales[i];
  os << '\n';
}

inline KernelSpec read_kernel(std::istream& is) {
  auto rec = detail::next_record(is, "kernel");
  std::string kind;
  rec >> kind;
  double sf2 = detail::read_double(rec, "signal_variance");
  long d = 0;
  if (!(rec >> d) || d <= 0) throw InvalidArgument("kernel: bad dimension");
  Vector ell(d);
  for (long i = 0; i < d; ++i) ell[i] = detail::read_double(rec, "lengthscale");
  return KernelSpec(kernel_kind_from_string(kind), sf2, ell);
}

inline void write_dataset(std::ostream& os, const GpDataset& data) {
  detail::full_precision(os);
  os << "dataset " << data.size() << ' ' << data.dim() << ' '
     << data.noise_variance << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    os << "row";
    for (Eigen::Index j = 0; j < data.dim(); ++j) os << ' ' << data.inputs(i, j);
    os << ' ' << data.outputs[i] << '\n';
  }
}

inline GpDataset read_dataset(std::istream& is) {
  auto head = detail::next_record(is, "dataset");
  long n = -1, d = -1;
  if (!(head >> n >> d) || n < 0 || d < 0) {
    throw InvalidArgument("dataset: bad header");
  }
  double noise = detail::read_double(head, "noise_variance");
  Matrix x(n, d);
  Vector y(n);
  for (long i = 0; i < n; ++i) {
    auto rec = detail::next_record(is, "row");
    for (long j = 0; j < d; ++j) x(i, j) = detail::read_double(rec, "input");
    y[i] = detail::read_double(rec, "output");
  }
  return GpDataset(std::move(x), std::move(y), noise);
}

}  // namespace hbo::gp
