#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "annoloop/dataset.hpp"
#include "annoloop/geometry.hpp"

namespace annoloop {

/// A proposed box.
struct Detection {
  std::string image_id;
  std::string class_label;
  BoundingBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct MatchPair {
  std::string image_id;  // empty for single-image results
  std::size_t detection = 0;
  std::size_t ground_truth = 0;
  double iou = 0.0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  /// Leftover (FP, FN) pairs that overlap at the threshold but disagree on
  /// the class. Only filled by count_relabels; zero otherwise.
  std::size_t relabels = 0;
  std::vector<MatchPair> pairs;

  std::size_t num_detections() const noexcept { return true_positives + false_positives; }
  std::size_t num_ground_truth() const noexcept { return true_positives + false_negatives; }

  MatchResult& operator+=(const MatchResult& other) {
    true_positives += other.true_positives;
    false_positives += other.false_positives;
    false_negatives += other.false_negatives;
    relabels += other.relabels;
    pairs.insert(pairs.end(), other.pairs.begin(), other.pairs.end());
    return *this;
  }

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Indices of `det` in processing order: confidence descending, ties by
/// input order.
inline std::vector<std::size_t> confidence_order(std::span<const Detection> det) {
  std::vector<std::size_t> order(det.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return det[a].confidence > det[b].confidence; });
  return order;
}

/// Greedy matching for one image. Each detection, in confidence order, claims
/// the unmatched ground-truth box (of the same class when `class_aware`)
/// with the highest IoU, provided IoU >= `iou_threshold`; equal IoU goes to
/// the lowest ground-truth index.
inline MatchResult match_image(std::span<const GroundTruthObject> gt, std::span<const Detection> det,
                               double iou_threshold, bool class_aware = true) {
  MatchResult r;
  std::vector<bool> taken(gt.size(), false);
  for (const std::size_t d : confidence_order(det)) {
    std::size_t best = gt.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      if (class_aware && gt[g].class_label != det[d].class_label) continue;
      const double v = iou(gt[g].box, det[d].box);
      if (v >= iou_threshold && v > best_iou) {
        best = g;
        best_iou = v;
      }
    }
    if (best < gt.size()) {
      taken[best] = true;
      r.pairs.push_back({{}, d, best, best_iou});
    }
  }
  r.true_positives = r.pairs.size();
  r.false_positives = det.size() - r.true_positives;
  r.false_negatives = gt.size() - r.true_positives;
  return r;
}

/// Number of wrong-label detections sitting on a missed ground-truth box:
/// the leftovers of a class-aware `m` re-matched greedily ignoring classes.
inline std::size_t count_relabels(std::span<const GroundTruthObject> gt, std::span<const Detection> det,
                                  const MatchResult& m, double iou_threshold) {
  std::vector<bool> det_used(det.size(), false), gt_used(gt.size(), false);
  for (const auto& p : m.pairs) {
    det_used[p.detection] = true;
    gt_used[p.ground_truth] = true;
  }
  std::vector<GroundTruthObject> gt_left;
  std::vector<Detection> det_left;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_used[g]) gt_left.push_back(gt[g]);
  }
  for (std::size_t d = 0; d < det.size(); ++d) {
    if (!det_used[d]) det_left.push_back(det[d]);
  }
  return match_image(gt_left, det_left, iou_threshold, /*class_aware=*/false).true_positives;
}

/// Per-image matching summed over a batch. Throws UnknownImage when a
/// detection list is keyed by an image outside `batch_gt`.
inline MatchResult match_batch(const std::map<std::string, std::vector<GroundTruthObject>>& batch_gt,
                               const std::map<std::string, std::vector<Detection>>& batch_det, double iou_threshold,
                               bool class_aware = true) {
  for (const auto& [id, dets] : batch_det) {
    if (!batch_gt.contains(id)) throw UnknownImage("detections for image '" + id + "' outside the batch");
  }
  static const std::vector<Detection> kNone;
  MatchResult total;
  for (const auto& [id, gt] : batch_gt) {
    const auto it = batch_det.find(id);
    auto r = match_image(gt, it == batch_det.end() ? kNone : it->second, iou_threshold, class_aware);
    for (auto& p : r.pairs) p.image_id = id;
    total += r;
  }
  return total;
}

/// TP/(TP+FP); 1 when nothing was proposed.
inline double precision(const MatchResult& m) noexcept {
  const auto denom = m.true_positives + m.false_positives;
  return denom == 0 ? 1.0 : static_cast<double>(m.true_positives) / static_cast<double>(denom);
}

/// TP/(TP+FN); 1 when there is nothing to find.
inline double recall(const MatchResult& m) noexcept {
  const auto denom = m.true_positives + m.false_negatives;
  return denom == 0 ? 1.0 : static_cast<double>(m.true_positives) / static_cast<double>(denom);
}

/// Drops detections scoring below `min_confidence`; order is preserved.
inline std::vector<Detection> filter_confident(std::span<const Detection> det, double min_confidence) {
  std::vector<Detection> out;
  for (const auto& d : det) {
    if (d.confidence >= min_confidence) out.push_back(d);
  }
  return out;
}

}  // namespace annoloop
