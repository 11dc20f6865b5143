#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "annoloop/dataset.hpp"
#include "annoloop/detector.hpp"
#include "annoloop/matching.hpp"
#include "annoloop/scheduling.hpp"
#include "annoloop/workload.hpp"

namespace annoloop {

enum class Regime { iterative, cumulative, two_stage };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::iterative: return "iterative";
    case Regime::cumulative: return "cumulative";
    case Regime::two_stage: return "two-stage";
  }
  return "?";
}

inline std::optional<Regime> regime_from_string(std::string_view s) {
  for (auto r : {Regime::iterative, Regime::cumulative, Regime::two_stage}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

struct CampaignConfig {
  std::size_t batch_size = 50;
  OrderingStrategy ordering = OrderingStrategy::shuffled(0);
  double iou_threshold = 0.5;
  double confidence_threshold = 0.5;
  Regime regime = Regime::iterative;
  double first_fold_fraction = 0.1;  // two_stage only
  std::optional<std::string> class_scope;
  bool keep_distractors = false;
  bool class_aware_matching = true;
  RelabelCost relabel_cost = RelabelCost::two;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw ConfigError("IoU threshold must be in (0, 1)");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw ConfigError("confidence threshold must be in [0, 1]");
    }
    if (regime == Regime::two_stage && !(first_fold_fraction > 0.0 && first_fold_fraction < 1.0)) {
      throw ConfigError("two-stage split fraction must be in (0, 1)");
    }
  }

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

struct PhaseTimings {
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  double score_seconds = 0.0;

  double total() const noexcept { return train_seconds + predict_seconds + score_seconds; }
};

struct CampaignReport {
  CampaignConfig config;
  std::string detector;
  std::size_t num_images = 0;
  std::vector<BatchWorkload> batches;
  std::vector<CurvePoint> curves;
  std::size_t total_gt = 0;
  std::size_t total_corrections = 0;  // proposal batches only
  std::size_t manual_b0_boxes = 0;
  std::optional<double> reduction_excluding_b0;  // empty when undefined
  std::optional<double> reduction_whole_campaign;
  PhaseTimings timings;  // not part of equality or report.json

  friend bool operator==(const CampaignReport& a, const CampaignReport& b) {
    return a.config == b.config && a.detector == b.detector && a.num_images == b.num_images &&
           a.batches == b.batches && a.curves == b.curves && a.total_gt == b.total_gt &&
           a.total_corrections == b.total_corrections && a.manual_b0_boxes == b.manual_b0_boxes &&
           a.reduction_excluding_b0 == b.reduction_excluding_b0 &&
           a.reduction_whole_campaign == b.reduction_whole_campaign;
  }
};

namespace detail {

class Stopwatch {
 public:
  explicit Stopwatch(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() { sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

/// Resolved images for a list of ids.
inline std::vector<ImageRecord> gather(const std::unordered_map<std::string, const ImageRecord*>& index,
                                       const std::vector<std::string>& ids) {
  std::vector<ImageRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(*index.at(id));
  return out;
}

inline std::size_t count_gt(const std::vector<ImageRecord>& images) {
  std::size_t n = 0;
  for (const auto& img : images) n += img.objects.size();
  return n;
}

/// Scores predictions for `images`, appending per-image counts.
inline MatchResult score_images(const std::vector<ImageRecord>& images,
                                const std::vector<std::vector<Detection>>& predictions, const CampaignConfig& cfg,
                                std::vector<ImageCounts>& per_image) {
  if (predictions.size() != images.size()) {
    throw ProtocolError("detector returned " + std::to_string(predictions.size()) + " prediction lists for " +
                        std::to_string(images.size()) + " images");
  }
  MatchResult total;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const auto dets = filter_confident(predictions[k], cfg.confidence_threshold);
    auto m = match_image(images[k].objects, dets, cfg.iou_threshold, cfg.class_aware_matching);
    if (cfg.relabel_cost == RelabelCost::one && cfg.class_aware_matching) {
      m.relabels = count_relabels(images[k].objects, dets, m, cfg.iou_threshold);
    }
    for (auto& p : m.pairs) p.image_id = images[k].image_id;
    const auto w = batch_workload(m, 1, cfg.relabel_cost);
    per_image.push_back({images[k].objects.size(), dets.size(), w.corrections});
    total += m;
  }
  return total;
}

inline Dataset scope_for(const Dataset& d, const CampaignConfig& cfg) {
  Dataset scoped = cfg.class_scope ? class_scope(d, *cfg.class_scope, cfg.keep_distractors) : d;
  if (scoped.images.empty()) throw EmptyCampaign("dataset has no images to annotate");
  return scoped;
}

inline void finish(CampaignReport& r, const std::vector<ImageCounts>& per_image) {
  r.curves = cumulative_curves(per_image);
  r.total_gt = 0;
  r.total_corrections = 0;
  for (const auto& b : r.batches) {
    r.total_gt += b.num_gt;
    if (b.batch_index >= 1) r.total_corrections += b.corrections;
  }
  r.manual_b0_boxes = r.batches.empty() ? 0 : r.batches.front().manually_drawn;
  try {
    r.reduction_excluding_b0 = workload_reduction(r.batches);
  } catch (const EmptyCampaign&) {
  } catch (const UndefinedReduction&) {
  }
  try {
    r.reduction_whole_campaign = workload_reduction_whole(r.batches);
  } catch (const UndefinedReduction&) {
  }
}

}  // namespace detail

/// Runs the two-stage baseline: the first ceil(fraction * N) images (in
/// schedule order) are annotated by hand and used to train once; the rest is
/// predicted in a single pass without further training. The remainder is
/// scored in batch_size chunks.
inline CampaignReport run_two_stage(const Dataset& d, const CampaignConfig& cfg, DetectorSession& det) {
  cfg.validate();
  if (cfg.regime != Regime::two_stage) throw ConfigError("run_two_stage requires the two-stage regime");
  const Dataset scoped = detail::scope_for(d, cfg);
  std::unordered_map<std::string, const ImageRecord*> index;
  for (const auto& img : scoped.images) index.emplace(img.image_id, &img);

  CampaignReport r;
  r.config = cfg;
  r.detector = det.descriptor();
  r.num_images = scoped.images.size();

  const auto order = order_images(scoped, cfg.ordering);
  const auto fold = std::min(order.size(), static_cast<std::size_t>(std::ceil(cfg.first_fold_fraction *
                                                                               static_cast<double>(order.size()))));
  const std::vector<std::string> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(fold));
  const std::vector<std::string> rest(order.begin() + static_cast<std::ptrdiff_t>(fold), order.end());

  std::vector<ImageCounts> per_image;
  const auto manual = detail::gather(index, first);
  for (const auto& img : manual) per_image.push_back({img.objects.size(), 0, 0});
  r.batches.push_back(manual_batch(detail::count_gt(manual)));
  {
    detail::Stopwatch sw(r.timings.train_seconds);
    det.begin_batch(0);
    det.train(manual);
  }

  if (!rest.empty()) {
    const auto images = detail::gather(index, rest);
    std::vector<std::vector<Detection>> predictions;
    {
      detail::Stopwatch sw(r.timings.predict_seconds);
      det.begin_batch(1);
      predictions = det.predict(images);
    }
    detail::Stopwatch sw(r.timings.score_seconds);
    if (predictions.size() != images.size()) throw ProtocolError("detector returned the wrong number of lists");
    for (std::size_t start = 0, b = 1; start < images.size(); start += cfg.batch_size, ++b) {
      const auto end = std::min(images.size(), start + cfg.batch_size);
      const std::vector<ImageRecord> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                           images.begin() + static_cast<std::ptrdiff_t>(end));
      const std::vector<std::vector<Detection>> chunk_pred(predictions.begin() + static_cast<std::ptrdiff_t>(start),
                                                           predictions.begin() + static_cast<std::ptrdiff_t>(end));
      r.batches.push_back(batch_workload(detail::score_images(chunk, chunk_pred, cfg, per_image), b, cfg.relabel_cost));
    }
  }
  detail::finish(r, per_image);
  return r;
}

/// The annotation loop. B0 is annotated by hand and trains the first model;
/// each later batch is proposed by the current model, scored against ground
/// truth (the simulated annotator adopts the truth exactly), and then used
/// for training: iterative trains on that batch alone, cumulative resets and
/// retrains on every batch so far.
///
/// A dataset that fits in B0 yields a report whose reductions are empty.
inline CampaignReport run_campaign(const Dataset& d, const CampaignConfig& cfg, DetectorSession& det) {
  cfg.validate();
  if (cfg.regime == Regime::two_stage) return run_two_stage(d, cfg, det);
  const Dataset scoped = detail::scope_for(d, cfg);
  std::unordered_map<std::string, const ImageRecord*> index;
  for (const auto& img : scoped.images) index.emplace(img.image_id, &img);

  CampaignReport r;
  r.config = cfg;
  r.detector = det.descriptor();
  r.num_images = scoped.images.size();

  const auto batches = make_batches(order_images(scoped, cfg.ordering), cfg.batch_size);
  std::vector<ImageCounts> per_image;
  std::vector<ImageRecord> annotated = detail::gather(index, batches.front().image_ids);
  for (const auto& img : annotated) per_image.push_back({img.objects.size(), 0, 0});
  r.batches.push_back(manual_batch(detail::count_gt(annotated)));
  {
    detail::Stopwatch sw(r.timings.train_seconds);
    det.begin_batch(0);
    det.train(annotated);
  }

  for (std::size_t i = 1; i < batches.size(); ++i) {
    const auto images = detail::gather(index, batches[i].image_ids);
    std::vector<std::vector<Detection>> predictions;
    {
      detail::Stopwatch sw(r.timings.predict_seconds);
      det.begin_batch(i);
      predictions = det.predict(images);
    }
    {
      detail::Stopwatch sw(r.timings.score_seconds);
      r.batches.push_back(batch_workload(detail::score_images(images, predictions, cfg, per_image), i,
                                         cfg.relabel_cost));
    }
    detail::Stopwatch sw(r.timings.train_seconds);
    if (cfg.regime == Regime::iterative) {
      det.train(images);
    } else {
      annotated.insert(annotated.end(), images.begin(), images.end());
      det.reset();
      det.begin_batch(i);
      det.train(annotated);
    }
  }
  detail::finish(r, per_image);
  return r;
}

struct PerClassResult {
  std::map<std::string, CampaignReport> reports;
  std::optional<double> average_reduction;  // unweighted mean over classes with a defined reduction
};

/// One campaign per class on the class-scoped dataset, each with a fresh
/// detector from `factory`.
inline PerClassResult run_per_class(const Dataset& d, const std::vector<std::string>& classes, CampaignConfig cfg,
                                    const DetectorFactory& factory) {
  for (const auto& c : classes) {
    if (!std::binary_search(d.classes.begin(), d.classes.end(), c)) {
      throw UnknownClass("class '" + c + "' is not in the dataset vocabulary");
    }
  }
  PerClassResult out;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : classes) {
    cfg.class_scope = c;
    auto det = factory();
    auto report = run_campaign(d, cfg, *det);
    if (report.reduction_excluding_b0) {
      sum += *report.reduction_excluding_b0;
      ++n;
    }
    out.reports.emplace(c, std::move(report));
  }
  if (n > 0) out.average_reduction = sum / static_cast<double>(n);
  return out;
}

/// Unweighted mean of per-class reductions.
inline double mean_reduction(std::span<const double> reductions) {
  if (reductions.empty()) throw EmptyCampaign("no per-class reductions");
  double s = 0.0;
  for (double v : reductions) s += v;
  return s / static_cast<double>(reductions.size());
}

}  // namespace annoloop
