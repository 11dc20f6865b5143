#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "annoloop/errors.hpp"
#include "annoloop/matching.hpp"

namespace annoloop {

/// How a detection with the right box but the wrong class is charged.
enum class RelabelCost { one, two };

/// Manual correction work for one annotation batch.
struct BatchWorkload {
  std::size_t batch_index = 0;
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  double precision = 1.0;
  double recall = 1.0;
  std::size_t additions = 0;
  std::size_t removals = 0;
  std::size_t relabels = 0;  // nonzero only under RelabelCost::one
  std::size_t corrections = 0;
  std::size_t manually_drawn = 0;  // nonzero only for the manual first batch

  friend bool operator==(const BatchWorkload&, const BatchWorkload&) = default;
};

/// The fully manual batch B0: every ground-truth box is drawn by hand.
inline BatchWorkload manual_batch(std::size_t num_gt) {
  BatchWorkload w;
  w.batch_index = 0;
  w.num_gt = num_gt;
  w.manually_drawn = num_gt;
  return w;
}

/// additions = #gt * (1 - recall) and removals = #detections * (1 - precision).
/// Both are exact integers: they reduce to FN and FP.
inline BatchWorkload batch_workload(const MatchResult& m, std::size_t batch_index,
                                    RelabelCost cost = RelabelCost::two) {
  BatchWorkload w;
  w.batch_index = batch_index;
  w.num_gt = m.num_ground_truth();
  w.num_detections = m.num_detections();
  w.precision = precision(m);
  w.recall = recall(m);
  w.additions = m.false_negatives;
  w.removals = m.false_positives;
  if (cost == RelabelCost::one) {
    w.relabels = m.relabels;
    w.additions -= m.relabels;
    w.removals -= m.relabels;
  }
  w.corrections = w.additions + w.removals + w.relabels;
  return w;
}

/// 100 * (1 - corrections / gt). May be negative.
inline double reduction_percent(double corrections, double gt) {
  if (!(gt > 0.0)) throw UndefinedReduction("no ground-truth boxes in the proposal batches");
  return 100.0 * (1.0 - corrections / gt);
}

/// Workload reduction over the proposal batches (batch_index >= 1); the
/// manually drawn B0 boxes are excluded from both sums.
inline double workload_reduction(std::span<const BatchWorkload> batches) {
  std::size_t corrections = 0, gt = 0, proposal_batches = 0;
  for (const auto& b : batches) {
    if (b.batch_index == 0) continue;
    ++proposal_batches;
    corrections += b.corrections;
    gt += b.num_gt;
  }
  if (proposal_batches == 0) throw EmptyCampaign("no proposal batches");
  return reduction_percent(static_cast<double>(corrections), static_cast<double>(gt));
}

/// Whole-campaign variant: B0's hand-drawn boxes count as work and its
/// ground truth joins the denominator.
inline double workload_reduction_whole(std::span<const BatchWorkload> batches) {
  std::size_t work = 0, gt = 0;
  for (const auto& b : batches) {
    work += b.corrections + b.manually_drawn;
    gt += b.num_gt;
  }
  return reduction_percent(static_cast<double>(work), static_cast<double>(gt));
}

struct ImageCounts {
  std::size_t gt = 0;
  std::size_t predicted = 0;
  std::size_t corrections = 0;
};

struct CurvePoint {
  std::size_t image_count = 0;
  std::size_t cum_gt = 0;
  std::size_t cum_pred = 0;
  std::size_t cum_corrections = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Prefix sums over per-image counts in annotation order.
inline std::vector<CurvePoint> cumulative_curves(std::span<const ImageCounts> per_image) {
  std::vector<CurvePoint> out;
  out.reserve(per_image.size());
  CurvePoint p;
  for (const auto& c : per_image) {
    ++p.image_count;
    p.cum_gt += c.gt;
    p.cum_pred += c.predicted;
    p.cum_corrections += c.corrections;
    out.push_back(p);
  }
  return out;
}

}  // namespace annoloop
