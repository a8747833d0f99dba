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

#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "hbo/bo/optimizers.hpp"
#include "hbo/core.hpp"
#include "hbo/gp/serialize.hpp"
#include "hbo/surrogate.hpp"

namespace hbo::harness {

namespace fs = std::filesystem;

/// Lowercase hex SHA-256 of `data`.
inline std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                               &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

/// Shortest round-trip text for finite values; empty for NaN.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) cells.push_back(cell);
  if (!line.empty() && line.back() == sep) cells.emplace_back();
  return cells;
}

inline double parse_or_nan(const std::string& s) {
  return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
}

inline constexpr const char* kHistoryHeader =
    "t,method,task,seed,theta1,theta2,theta3,theta4,theta5,J,best_so_far,"
    "cumulative,J_hat,chi,episode_seed,aborted,posterior_mean,posterior_var";

inline std::string history_csv(const bo::BoHistory& h) {
  std::ostringstream os;
  os << kHistoryHeader << '\n';
  for (const auto& r : h.records) {
    os << r.t << ',' << bo::to_string(h.method) << ',' << h.task << ',' << h.seed;
    for (int i = 0; i < kParamDim; ++i) os << ',' << fmt(r.theta[i]);
    os << ',' << fmt(r.cost) << ',' << fmt(r.best_so_far) << ',' << fmt(r.cumulative)
       << ',' << fmt(r.surrogate_cost) << ',' << fmt(r.bound) << ',' << r.seed << ','
       << (r.aborted ? 1 : 0) << ',' << fmt(r.posterior_mean) << ','
       << fmt(r.posterior_variance) << '\n';
  }
  return os.str();
}

inline bo::BoHistory parse_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,method,task,seed", 0) != 0) {
    throw InvalidArgument("history csv: missing header");
  }
  bo::BoHistory h;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = split(line, ',');
    if (c.size() < 14) throw InvalidArgument("history csv: short row '" + line + "'");
    try {
      if (first) {
        h.method = bo::method_from_string(c[1]);
        h.task = c[2];
        h.seed = std::stoull(c[3]);
        first = false;
      }
      bo::IterationRecord r;
      r.t = std::stoi(c[0]);
      ParamVector::Values v;
      for (int i = 0; i < kParamDim; ++i) v[i] = std::stod(c[4 + static_cast<std::size_t>(i)]);
      r.theta = ParamVector(v);
      r.cost = std::stod(c[9]);
      r.best_so_far = std::stod(c[10]);
      r.cumulative = std::stod(c[11]);
      r.surrogate_cost = parse_or_nan(c[12]);
      r.bound = parse_or_nan(c[13]);
      if (c.size() >= 18) {
        r.seed = std::stoull(c[14]);
        r.aborted = c[15] == "1";
        r.posterior_mean = parse_or_nan(c[16]);
        r.posterior_variance = parse_or_nan(c[17]);
      }
      h.records.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw InvalidArgument(std::string("history csv: bad row: ") + e.what());
    }
  }
  if (h.records.empty()) throw InvalidArgument("history csv: no rows");
  return h;
}

/// Per-iteration check of the surrogate bound: iteration, theta, J_hat, chi,
/// observed J, and whether |J_hat - J| <= chi held.
inline std::string bounds_csv(const bo::BoHistory& h) {
  std::ostringstream os;
  os << "iteration,theta1,theta2,theta3,theta4,theta5,J_hat,chi,J,held\n";
  for (const auto& r : h.records) {
    os << r.t;
    for (int i = 0; i < kParamDim; ++i) os << ',' << fmt(r.theta[i]);
    const bool known = !std::isnan(r.surrogate_cost) && !std::isnan(r.bound);
    const bool held = known && std::abs(r.surrogate_cost - r.cost) <= r.bound;
    os << ',' << fmt(r.surrogate_cost) << ',' << fmt(r.bound) << ',' << fmt(r.cost)
       << ',' << (known ? (held ? "1" : "0") : "") << '\n';
  }
  return os.str();
}

/// The learned dynamics GP: one kernel/dataset pair per output of z, in the
/// format of gp::write_kernel / gp::write_dataset. Inputs and outputs are
/// standardized; the comment lines give the affine maps back to raw units.
inline std::string dynamics_model_text(const DynamicsModel& m) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# outputs=" << m.gp().size() << " residual=" << (m.residual() ? 1 : 0)
     << " rows=" << m.training_rows() << " lipschitz=" << m.lipschitz() << '\n';
  os << "# feature_mean";
  for (int j = 0; j < kFeatureDim; ++j) os << ' ' << m.feature_mean()[j];
  os << "\n# feature_scale";
  for (int j = 0; j < kFeatureDim; ++j) os << ' ' << m.feature_scale()[j];
  os << '\n';
  for (int i = 0; i < m.gp().size(); ++i) {
    const gp::ScaledGp& out = m.gp().output(i);
    os << "# output " << i << " offset=" << out.offset() << " scale=" << out.scale() << '\n';
    gp::write_kernel(os, out.kernel());
    gp::write_dataset(os, out.posterior().data());
  }
  return os.str();
}

inline std::string run_stem(bo::Method m, const std::string& task, std::uint64_t seed) {
  return bo::to_string(m) + "_" + task + "_seed" + std::to_string(seed);
}

/// key=value lines, written in key order.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string get(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? std::string() : it->second;
  }

  std::string text() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
    return os.str();
  }

  static Manifest parse(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw InvalidArgument("manifest: bad line '" + line + "'");
      m.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace hbo::harness
