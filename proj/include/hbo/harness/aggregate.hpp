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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "hbo/bo/optimizers.hpp"
#include "hbo/core.hpp"
#include "hbo/harness/io.hpp"

namespace hbo::harness {

/// Lower median: element floor((n - 1) / 2) of the sorted values.
inline double lower_median(std::vector<double> v) {
  require(!v.empty(), "median of an empty sample");
  auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

inline double mean_of(const std::vector<double>& v) {
  require(!v.empty(), "mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); zero for a single value.
inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct SeriesStats {
  std::vector<double> mean, sd, median;
};

/// Per-index statistics across equally long series.
inline SeriesStats series_stats(const std::vector<std::vector<double>>& series) {
  require(!series.empty(), "series_stats: no series");
  const std::size_t n = series.front().size();
  SeriesStats s;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> col;
    for (const auto& row : series) {
      require(row.size() == n, "series_stats: series lengths differ");
      col.push_back(row[t]);
    }
    s.mean.push_back(mean_of(col));
    s.sd.push_back(sample_sd(col));
    s.median.push_back(lower_median(col));
  }
  return s;
}

struct GroupAggregate {
  bo::Method method = bo::Method::kBlackbox;
  std::string task;
  std::vector<std::uint64_t> seeds;
  SeriesStats best;        // best-so-far
  SeriesStats cost;        // per-iteration J
  SeriesStats cumulative;  // sum of J
  std::vector<std::vector<double>> cumulative_by_seed;
  // Paired share of seeds where best-so-far is below the black-box run's
  // (ties count one half); NaN without a baseline.
  std::vector<double> win_rate;
  double slope = std::numeric_limits<double>::quiet_NaN();

  std::size_t length() const { return best.mean.size(); }
};

struct AggregateResult {
  std::vector<GroupAggregate> groups;
  int slope_first = 10;

  const GroupAggregate* find(bo::Method m, const std::string& task) const {
    for (const auto& g : groups) {
      if (g.method == m && g.task == task) return &g;
    }
    return nullptr;
  }

  std::vector<std::string> tasks() const {
    std::vector<std::string> out;
    for (const auto& g : groups) {
      if (std::find(out.begin(), out.end(), g.task) == out.end()) out.push_back(g.task);
    }
    return out;
  }
};

/// Groups histories by (method, task); every history of a group must have
/// the same length. Seeds are ordered numerically within a group.
inline AggregateResult aggregate(std::vector<bo::BoHistory> histories,
                                 int slope_first = 10) {
  require(!histories.empty(), "aggregate: no histories");
  std::stable_sort(histories.begin(), histories.end(),
                   [](const bo::BoHistory& a, const bo::BoHistory& b) {
                     return std::tie(a.method, a.task, a.seed) <
                            std::tie(b.method, b.task, b.seed);
                   });
  AggregateResult res;
  res.slope_first = slope_first;
  std::map<std::tuple<bo::Method, std::string>, std::vector<const bo::BoHistory*>> groups;
  std::vector<std::tuple<bo::Method, std::string>> order;
  for (const auto& h : histories) {
    require(!h.empty(), "aggregate: empty history");
    auto key = std::make_tuple(h.method, h.task);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&h);
  }
  std::map<std::tuple<std::string, std::uint64_t>, const bo::BoHistory*> baseline;
  for (const auto& h : histories) {
    if (h.method == bo::Method::kBlackbox) baseline[{h.task, h.seed}] = &h;
  }
  for (const auto& key : order) {
    const auto& members = groups[key];
    GroupAggregate g;
    g.method = std::get<0>(key);
    g.task = std::get<1>(key);
    const std::size_t n = members.front()->size();
    std::vector<std::vector<double>> best, cost, cum;
    for (const bo::BoHistory* h : members) {
      if (h->size() != n) {
        throw InvalidArgument("aggregate: histories of " + bo::to_string(g.method) + "/" +
                              g.task + " differ in length");
      }
      g.seeds.push_back(h->seed);
      best.push_back(h->best_series());
      cost.push_back(h->costs());
      cum.push_back(h->cumulative_series());
    }
    g.best = series_stats(best);
    g.cost = series_stats(cost);
    g.cumulative = series_stats(cum);
    g.cumulative_by_seed = cum;
    for (std::size_t t = 0; t < n; ++t) {
      double wins = 0.0;
      int pairs = 0;
      for (const bo::BoHistory* h : members) {
        auto it = baseline.find({g.task, h->seed});
        if (it == baseline.end() || it->second->size() <= t) continue;
        const double a = h->records[t].best_so_far;
        const double b = it->second->records[t].best_so_far;
        wins += a < b ? 1.0 : (a == b ? 0.5 : 0.0);
        ++pairs;
      }
      g.win_rate.push_back(pairs > 0 ? wins / pairs
                                     : std::numeric_limits<double>::quiet_NaN());
    }
    if (static_cast<int>(n) > slope_first) {
      g.slope = bo::power_law_slope(g.cumulative.mean, slope_first, static_cast<int>(n));
    }
    res.groups.push_back(std::move(g));
  }
  return res;
}

inline std::string aggregate_csv(const GroupAggregate& g) {
  std::ostringstream os;
  os << "iteration,best_mean,best_sd,best_median,win_rate_vs_blackbox,cost_mean,"
        "cost_sd,cost_median,cumulative_mean,cumulative_sd,cumulative_median\n";
  for (std::size_t t = 0; t < g.length(); ++t) {
    os << t + 1 << ',' << fmt(g.best.mean[t]) << ',' << fmt(g.best.sd[t]) << ','
       << fmt(g.best.median[t]) << ',' << fmt(g.win_rate[t]) << ','
       << fmt(g.cost.mean[t]) << ',' << fmt(g.cost.sd[t]) << ','
       << fmt(g.cost.median[t]) << ',' << fmt(g.cumulative.mean[t]) << ','
       << fmt(g.cumulative.sd[t]) << ',' << fmt(g.cumulative.median[t]) << '\n';
  }
  return os.str();
}

inline std::string cumulative_by_seed_csv(const GroupAggregate& g) {
  std::ostringstream os;
  os << "iteration";
  for (auto s : g.seeds) os << ",seed" << s;
  os << '\n';
  for (std::size_t t = 0; t < g.length(); ++t) {
    os << t + 1;
    for (const auto& row : g.cumulative_by_seed) os << ',' << fmt(row[t]);
    os << '\n';
  }
  return os.str();
}

inline std::string slopes_csv(const AggregateResult& r) {
  std::ostringstream os;
  os << "method,task,first,last,slope\n";
  for (const auto& g : r.groups) {
    os << bo::to_string(g.method) << ',' << g.task << ',' << r.slope_first << ','
       << g.length() << ',' << fmt(g.slope) << '\n';
  }
  return os.str();
}

enum class PlotKind { kBestCost, kCost, kCumulative };

inline std::string to_string(PlotKind k) {
  switch (k) {
    case PlotKind::kBestCost: return "best";
    case PlotKind::kCost: return "cost";
    case PlotKind::kCumulative: return "cumulative";
  }
  return "?";
}

/// Whitespace-separated "iteration center lower upper" rows, band = one sd,
/// clipped at zero.
inline std::string band_data(const SeriesStats& s) {
  std::ostringstream os;
  os << "# iteration center lower upper\n";
  for (std::size_t t = 0; t < s.mean.size(); ++t) {
    os << t + 1 << ' ' << fmt(s.mean[t]) << ' ' << fmt(std::max(0.0, s.mean[t] - s.sd[t]))
       << ' ' << fmt(std::max(0.0, s.mean[t] + s.sd[t])) << '\n';
  }
  return os.str();
}

/// Linear-growth reference for cumulative plots: t times the mean cost of
/// the shared first iteration.
inline std::string linear_reference_data(const AggregateResult& r, const std::string& task,
                                         std::size_t length) {
  std::vector<double> first;
  for (const auto& g : r.groups) {
    if (g.task == task && g.length() > 0) first.push_back(g.cost.mean.front());
  }
  require(!first.empty(), "linear reference: no series for task " + task);
  const double c = mean_of(first);
  std::ostringstream os;
  os << "# iteration reference\n";
  for (std::size_t t = 1; t <= length; ++t) {
    os << t << ' ' << fmt(c * static_cast<double>(t)) << '\n';
  }
  return os.str();
}

/// Writes one file per (method, task) under dir/plots; returns the paths
/// relative to `dir`.
inline std::vector<std::string> emit_plot_data(const AggregateResult& r, PlotKind kind,
                                               const fs::path& dir) {
  std::vector<std::string> written;
  const std::string prefix = to_string(kind);
  for (const auto& g : r.groups) {
    const SeriesStats& s = kind == PlotKind::kBestCost ? g.best
                           : kind == PlotKind::kCost   ? g.cost
                                                       : g.cumulative;
    std::string rel = "plots/" + prefix + "_" + bo::to_string(g.method) + "_" + g.task + ".dat";
    write_file(dir / rel, band_data(s));
    written.push_back(rel);
  }
  if (kind == PlotKind::kCumulative) {
    for (const auto& task : r.tasks()) {
      std::size_t len = 0;
      for (const auto& g : r.groups) {
        if (g.task == task) len = std::max(len, g.length());
      }
      std::string rel = "plots/cumulative_reference_" + task + ".dat";
      write_file(dir / rel, linear_reference_data(r, task, len));
      written.push_back(rel);
    }
  }
  return written;
}

/// All aggregate CSVs under dir/aggregate; returns relative paths.
inline std::vector<std::string> write_aggregate(const AggregateResult& r, const fs::path& dir) {
  std::vector<std::string> written;
  for (const auto& g : r.groups) {
    const std::string stem = "aggregate/" + bo::to_string(g.method) + "_" + g.task;
    write_file(dir / (stem + ".csv"), aggregate_csv(g));
    write_file(dir / (stem + "_cumulative_by_seed.csv"), cumulative_by_seed_csv(g));
    written.push_back(stem + ".csv");
    written.push_back(stem + "_cumulative_by_seed.csv");
  }
  write_file(dir / "aggregate/slopes.csv", slopes_csv(r));
  written.push_back("aggregate/slopes.csv");
  return written;
}

}  // namespace hbo::harness
