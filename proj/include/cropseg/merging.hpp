// Copyright 2026 The cropseg Authors.
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
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cropseg/error.hpp"
#include "cropseg/partition.hpp"
#include "cropseg/rng.hpp"
#include "cropseg/scoring.hpp"

namespace cropseg {

/// How subcluster pairs are weighted and merged.
///
/// The threshold variants merge every pair with positive affinity and take
/// the transitive closure; they differ only in the per-view weight
/// (1, visibility, consistency or reliability). kFullLpa runs label
/// propagation on the reliability-weighted graph.
enum class MergeVariant {
  kBaseline,
  kVisibility,
  kMask,
  kReliabilityThreshold,
  kFullLpa,
};

inline constexpr MergeVariant kAllMergeVariants[] = {
    MergeVariant::kBaseline, MergeVariant::kVisibility, MergeVariant::kMask,
    MergeVariant::kReliabilityThreshold, MergeVariant::kFullLpa};

inline std::string_view to_string(MergeVariant v) {
  switch (v) {
    case MergeVariant::kBaseline: return "baseline";
    case MergeVariant::kVisibility: return "visibility";
    case MergeVariant::kMask: return "mask";
    case MergeVariant::kReliabilityThreshold: return "reliability-threshold";
    case MergeVariant::kFullLpa: return "full-lpa";
  }
  return "unknown";
}

inline MergeVariant parse_merge_variant(std::string_view name) {
  for (const MergeVariant v : kAllMergeVariants) {
    if (to_string(v) == name) return v;
  }
  throw UsageError("unknown merge variant '" + std::string(name) + "'");
}

/// Complete signed graph over the subclusters of one supercluster.
class AffinityGraph {
 public:
  AffinityGraph() = default;
  explicit AffinityGraph(std::size_t nodes) : n_(nodes), w_(nodes * nodes, 0.0) {}

  std::size_t size() const { return n_; }
  double weight(std::size_t a, std::size_t b) const { return w_[a * n_ + b]; }
  void set_weight(std::size_t a, std::size_t b, double w) {
    if (a == b) return;
    w_[a * n_ + b] = w;
    w_[b * n_ + a] = w;
  }

  friend bool operator==(const AffinityGraph&, const AffinityGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> w_;
};

/// Partition of one supercluster's subclusters; ids are contiguous from 0
/// in order of first appearance.
struct InstanceLabeling {
  std::vector<int> assignment;

  int count() const {
    return assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
  }
  friend bool operator==(const InstanceLabeling&, const InstanceLabeling&) = default;
};

inline InstanceLabeling make_contiguous(const std::vector<int>& raw) {
  std::map<int, int> remap;
  InstanceLabeling out;
  out.assignment.reserve(raw.size());
  for (const int label : raw) {
    const auto [it, inserted] = remap.emplace(label, static_cast<int>(remap.size()));
    out.assignment.push_back(it->second);
  }
  return out;
}

namespace detail {

inline double view_weight(const ViewScore& s, MergeVariant variant) {
  switch (variant) {
    case MergeVariant::kBaseline: return s.label ? 1.0 : 0.0;
    case MergeVariant::kVisibility: return s.v;
    case MergeVariant::kMask: return s.c;
    case MergeVariant::kReliabilityThreshold:
    case MergeVariant::kFullLpa: return s.r;
  }
  return 0.0;
}

}  // namespace detail

/// Signed affinity between subclusters i and k under a variant's per-view
/// weight. Views where either label is missing contribute nothing.
inline double variant_affinity(const ScoreTable& table, std::size_t i, std::size_t k,
                               MergeVariant variant) {
  double sum = 0.0;
  for (std::size_t j = 0; j < table.views(); ++j) {
    const ViewScore& a = table.at(i, j);
    const ViewScore& b = table.at(k, j);
    if (!a.label || !b.label) continue;
    const double w = detail::view_weight(a, variant) * detail::view_weight(b, variant);
    sum += *a.label == *b.label ? w : -w;
  }
  return sum;
}

/// Reliability-weighted affinity: sum over views of r_i * r_k, positive
/// where the two subclusters carry the same mask label.
inline double affinity(const ScoreTable& table, std::size_t i, std::size_t k) {
  return variant_affinity(table, i, k, MergeVariant::kFullLpa);
}

inline AffinityGraph build_affinity_graph(const ScoreTable& table,
                                          MergeVariant variant = MergeVariant::kFullLpa) {
  AffinityGraph graph(table.subclusters());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t k = i + 1; k < graph.size(); ++k) {
      graph.set_weight(i, k, variant_affinity(table, i, k, variant));
    }
  }
  return graph;
}

inline constexpr int kMaxPropagationPasses = 100;

/// Signed label propagation from a given starting labeling.
///
/// Nodes are visited asynchronously in a fresh seeded order every pass. A
/// node moves to the label with the largest summed edge weight, provided
/// that sum is positive and beats its current label; ties keep the current
/// label, then prefer the smallest id. A node whose current group pulls
/// negative and that has no positive alternative returns to a singleton.
inline InstanceLabeling propagate_labels(const AffinityGraph& graph, std::uint64_t seed,
                                         std::vector<int> labels) {
  const std::size_t m = graph.size();
  if (labels.size() != m) throw UsageError("initial labeling size does not match the graph");
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      if (!std::isfinite(graph.weight(i, k))) throw DataError("affinity graph has a non-finite weight");
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::map<int, double> sums;
  for (int pass = 0; pass < kMaxPropagationPasses; ++pass) {
    rng.shuffle(order);
    bool changed = false;
    for (const std::size_t u : order) {
      sums.clear();
      for (std::size_t k = 0; k < m; ++k) {
        if (k != u) sums[labels[k]] += graph.weight(u, k);
      }
      const int current = labels[u];
      const auto own = sums.find(current);
      const double own_sum = own == sums.end() ? 0.0 : own->second;
      int best = current;
      double best_sum = own_sum;
      for (const auto& [label, sum] : sums) {  // ascending label id
        if (label == current) continue;
        if (sum > 0.0 && sum > best_sum) {
          best = label;
          best_sum = sum;
        }
      }
      if (best == current && own_sum < 0.0) {
        // Fresh singleton: the node's original id if free, else the
        // smallest unused id.
        int fresh = static_cast<int>(u);
        auto taken = [&](int id) {
          for (std::size_t k = 0; k < m; ++k) {
            if (k != u && labels[k] == id) return true;
          }
          return false;
        };
        if (taken(fresh)) {
          fresh = 0;
          while (taken(fresh)) ++fresh;
        }
        best = fresh;
      }
      if (best != current) {
        labels[u] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return make_contiguous(labels);
}

inline InstanceLabeling label_propagation(const AffinityGraph& graph, std::uint64_t seed) {
  std::vector<int> labels(graph.size());
  std::iota(labels.begin(), labels.end(), 0);
  return propagate_labels(graph, seed, std::move(labels));
}

/// Connected components of the positive-weight edges.
inline InstanceLabeling threshold_merge(const AffinityGraph& graph) {
  const std::size_t m = graph.size();
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = i + 1; k < m; ++k) {
      if (graph.weight(i, k) > 0.0) {
        const std::size_t a = find(i);
        const std::size_t b = find(k);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<int> roots(m);
  for (std::size_t i = 0; i < m; ++i) roots[i] = static_cast<int>(find(i));
  return make_contiguous(roots);
}

inline InstanceLabeling merge_strategy_ablation(const ScoreTable& table, MergeVariant variant,
                                                std::uint64_t seed = 42) {
  const AffinityGraph graph = build_affinity_graph(table, variant);
  if (variant == MergeVariant::kFullLpa) return label_propagation(graph, seed);
  return threshold_merge(graph);
}

inline InstanceLabeling merge_strategy_ablation(const ScoreTable& table, std::string_view variant,
                                                std::uint64_t seed = 42) {
  return merge_strategy_ablation(table, parse_merge_variant(variant), seed);
}

/// One supercluster's subclusters and their merged labeling.
struct SuperclusterResult {
  std::vector<Subcluster> subclusters;
  InstanceLabeling labeling;
};

struct CountReport {
  std::vector<int> supercluster_counts;
  int total = 0;
  // Global instance id per crop point; -1 for points dropped as noise.
  std::vector<std::int64_t> point_instance;
};

/// Sums per-supercluster instance counts and maps every subcluster point to
/// a global instance id (superclusters numbered consecutively).
inline CountReport count_instances(const std::vector<SuperclusterResult>& results,
                                   std::size_t cloud_size = 0) {
  CountReport report;
  report.point_instance.assign(cloud_size, -1);
  std::int64_t offset = 0;
  for (const auto& result : results) {
    const int count = result.labeling.count();
    report.supercluster_counts.push_back(count);
    report.total += count;
    for (std::size_t i = 0; i < result.subclusters.size() && i < result.labeling.assignment.size();
         ++i) {
      for (const std::size_t p : result.subclusters[i].point_indices) {
        if (p < cloud_size) report.point_instance[p] = offset + result.labeling.assignment[i];
      }
    }
    offset += count;
  }
  return report;
}

/// Whitespace-separated edge list "i k weight" over unordered pairs.
inline void write_edge_list(std::ostream& out, const AffinityGraph& graph) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t k = i + 1; k < graph.size(); ++k) {
      out << i << ' ' << k << ' ' << graph.weight(i, k) << '\n';
    }
  }
}

}  // namespace cropseg
