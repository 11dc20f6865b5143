#pragma once

// Shared helpers and independent oracles for the test suites. Nothing here
// calls into the matching or workload code paths it is used to check.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "annoloop.hpp"

namespace annoloop::testing {

inline std::string fixture(const std::string& rel) { return std::string(ANNOLOOP_FIXTURES) + "/" + rel; }
inline std::string golden(const std::string& rel) { return std::string(ANNOLOOP_GOLDEN) + "/" + rel; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Compares `actual` with a frozen golden file. With ANNOLOOP_UPDATE_GOLDEN
/// set, (re)writes the file instead and reports a match.
inline bool matches_golden(const std::string& name, const std::string& actual) {
  const auto path = golden(name);
  if (std::getenv("ANNOLOOP_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(path, std::ios::binary) << actual;
    return true;
  }
  return slurp(path) == actual;
}

/// Integer-coordinate box for raster checks.
struct IntBox {
  int x0, y0, x1, y1;
};

/// IoU by counting unit pixels covered by each box.
inline double raster_iou(const IntBox& a, const IntBox& b) {
  const int lo_x = std::min(a.x0, b.x0), hi_x = std::max(a.x1, b.x1);
  const int lo_y = std::min(a.y0, b.y0), hi_y = std::max(a.y1, b.y1);
  long inter = 0, uni = 0;
  for (int y = lo_y; y < hi_y; ++y) {
    for (int x = lo_x; x < hi_x; ++x) {
      const bool in_a = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
      const bool in_b = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
      inter += (in_a && in_b) ? 1 : 0;
      uni += (in_a || in_b) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline BoundingBox to_box(const IntBox& b) { return {double(b.x0), double(b.y0), double(b.x1), double(b.y1)}; }

/// Micro-instance: integer boxes on a small canvas with random labels.
struct MicroObject {
  IntBox box;
  int label;
};
struct MicroDetection {
  IntBox box;
  int label;
  double confidence;
};
struct MicroImage {
  std::vector<MicroObject> gt;
  std::vector<MicroDetection> det;
};

inline IntBox random_int_box(Rng& rng, int canvas) {
  const int x0 = static_cast<int>(rng.below(canvas - 1));
  const int y0 = static_cast<int>(rng.below(canvas - 1));
  const int x1 = x0 + 1 + static_cast<int>(rng.below(canvas - x0));
  const int y1 = y0 + 1 + static_cast<int>(rng.below(canvas - y0));
  return {x0, y0, x1, y1};
}

/// A box near `b`, so that matches above 0.5 IoU actually occur.
inline IntBox perturb(Rng& rng, const IntBox& b, int canvas) {
  auto j = [&](int v) { return v + static_cast<int>(rng.below(5)) - 2; };
  int x0 = std::clamp(j(b.x0), 0, canvas - 1), y0 = std::clamp(j(b.y0), 0, canvas - 1);
  int x1 = std::clamp(j(b.x1), x0 + 1, canvas), y1 = std::clamp(j(b.y1), y0 + 1, canvas);
  return {x0, y0, x1, y1};
}

inline MicroImage random_micro_image(Rng& rng, int max_boxes, int num_labels, int canvas = 24) {
  MicroImage img;
  const int n_gt = static_cast<int>(rng.below(max_boxes + 1));
  const int n_det = static_cast<int>(rng.below(max_boxes + 1));
  for (int i = 0; i < n_gt; ++i) img.gt.push_back({random_int_box(rng, canvas), int(rng.below(num_labels))});
  for (int i = 0; i < n_det; ++i) {
    IntBox b = (!img.gt.empty() && rng.uniform01() < 0.7) ? perturb(rng, img.gt[rng.below(img.gt.size())].box, canvas)
                                                          : random_int_box(rng, canvas);
    // Coarse confidences so ties happen.
    img.det.push_back({b, int(rng.below(num_labels)), double(rng.below(5)) / 4.0});
  }
  return img;
}

inline std::vector<GroundTruthObject> to_gt(const MicroImage& m) {
  std::vector<GroundTruthObject> out;
  for (const auto& o : m.gt) out.push_back({"c" + std::to_string(o.label), to_box(o.box), {}});
  return out;
}

inline std::vector<Detection> to_det(const MicroImage& m, const std::string& id = "img") {
  std::vector<Detection> out;
  for (const auto& d : m.det) out.push_back({id, "c" + std::to_string(d.label), to_box(d.box), d.confidence});
  return out;
}

/// Greedy rule evaluated over the full raster IoU table: detections by
/// confidence descending (input order on ties); each takes the free,
/// same-label gt with the largest IoU >= threshold (lowest index on ties).
/// Returns the matched gt index per detection, or -1.
inline std::vector<int> oracle_greedy(const MicroImage& m, double threshold, bool class_aware = true) {
  const std::size_t nd = m.det.size(), ng = m.gt.size();
  std::vector<std::vector<double>> table(nd, std::vector<double>(ng));
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t g = 0; g < ng; ++g) table[d][g] = raster_iou(m.det[d].box, m.gt[g].box);
  }
  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < nd; ++d) order.push_back(d);
  // Insertion sort: stable by construction.
  for (std::size_t i = 1; i < order.size(); ++i) {
    for (std::size_t k = i; k > 0 && m.det[order[k]].confidence > m.det[order[k - 1]].confidence; --k) {
      std::swap(order[k], order[k - 1]);
    }
  }
  std::vector<int> assigned(nd, -1);
  std::vector<bool> used(ng, false);
  for (auto d : order) {
    int best = -1;
    for (std::size_t g = 0; g < ng; ++g) {
      if (used[g] || table[d][g] < threshold) continue;
      if (class_aware && m.gt[g].label != m.det[d].label) continue;
      if (best < 0 || table[d][g] > table[d][static_cast<std::size_t>(best)]) best = static_cast<int>(g);
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      assigned[d] = best;
    }
  }
  return assigned;
}

/// Maximum-cardinality matching over eligible (same label, IoU >= threshold)
/// pairs by exhaustive search. Small instances only.
inline int oracle_max_matching(const MicroImage& m, double threshold) {
  const std::size_t ng = m.gt.size();
  std::vector<bool> used(ng, false);
  std::function<int(std::size_t)> go = [&](std::size_t d) -> int {
    if (d == m.det.size()) return 0;
    int best = go(d + 1);
    for (std::size_t g = 0; g < ng; ++g) {
      if (used[g] || m.gt[g].label != m.det[d].label || raster_iou(m.det[d].box, m.gt[g].box) < threshold) continue;
      used[g] = true;
      best = std::max(best, 1 + go(d + 1));
      used[g] = false;
    }
    return best;
  };
  return go(0);
}

/// Small dataset with random object counts, optional sequence indices.
inline Dataset random_dataset(Rng& rng, std::size_t n_images, bool temporal) {
  Dataset d;
  d.provenance = Provenance::synthetic;
  std::vector<std::uint64_t> seq(n_images);
  for (std::size_t i = 0; i < n_images; ++i) seq[i] = i;
  for (std::size_t i = n_images; i > 1; --i) std::swap(seq[i - 1], seq[rng.below(i)]);
  for (std::size_t i = 0; i < n_images; ++i) {
    ImageRecord img;
    img.image_id = "im" + std::to_string(rng.below(1000000)) + "_" + std::to_string(i);
    img.source_name = "f" + std::to_string(rng.below(50)) + ".jpg";
    img.width = 100;
    img.height = 100;
    if (temporal) img.sequence_index = seq[i];
    const auto n = rng.below(6);
    for (std::uint64_t k = 0; k < n; ++k) {
      img.objects.push_back({rng.below(2) ? "cat" : "dog", BoundingBox(1, 1, 10 + double(k), 20), {}});
    }
    d.images.push_back(std::move(img));
  }
  d.classes = collect_classes(d.images);
  return d;
}

}  // namespace annoloop::testing
