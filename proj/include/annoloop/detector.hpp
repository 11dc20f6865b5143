#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "annoloop/canonical.hpp"
#include "annoloop/dataset.hpp"
#include "annoloop/matching.hpp"
#include "annoloop/random.hpp"

namespace annoloop {

/// A trainable proposal source driven by the campaign loop.
///
/// `predict` receives full image records; only oracle-corruption simulators
/// may look at `objects`. Real detectors (the bridge) see ids and sizes only.
class DetectorSession {
 public:
  virtual ~DetectorSession() = default;

  /// Fine-tunes on images whose `objects` are the corrected annotations.
  virtual void train(std::span<const ImageRecord> annotated) = 0;

  /// One detection list per input image, in input order.
  virtual std::vector<std::vector<Detection>> predict(std::span<const ImageRecord> images) = 0;

  /// Back to the freshly constructed state.
  virtual void reset() = 0;

  virtual std::string descriptor() const = 0;

  /// Announces the batch index of the next train/predict calls.
  virtual void begin_batch(std::size_t /*index*/) {}
};

using DetectorFactory = std::function<std::unique_ptr<DetectorSession>()>;

/// Proposes exactly the ground truth with confidence 1.
class PerfectDetector final : public DetectorSession {
 public:
  void train(std::span<const ImageRecord>) override {}
  std::vector<std::vector<Detection>> predict(std::span<const ImageRecord> images) override {
    std::vector<std::vector<Detection>> out;
    for (const auto& img : images) {
      auto& dets = out.emplace_back();
      for (const auto& o : img.objects) dets.push_back({img.image_id, o.class_label, o.box, 1.0});
    }
    return out;
  }
  void reset() override {}
  std::string descriptor() const override { return "perfect"; }
};

/// Never proposes anything.
class NullDetector final : public DetectorSession {
 public:
  void train(std::span<const ImageRecord>) override {}
  std::vector<std::vector<Detection>> predict(std::span<const ImageRecord> images) override {
    return std::vector<std::vector<Detection>>(images.size());
  }
  void reset() override {}
  std::string descriptor() const override { return "null"; }
};

/// Detection fixture: one JSON object per line,
///   {"detections":[{"box":[x0,y0,x1,y1],"class_label":"cat","confidence":0.9}],"image_id":"000001"}
using DetectionScript = std::map<std::string, std::vector<Detection>>;

inline nlohmann::json detection_to_json(const Detection& d) {
  return {{"class_label", d.class_label}, {"box", canonical::box_to_json(d.box)}, {"confidence", d.confidence}};
}

inline void write_detection_script(const DetectionScript& script, std::ostream& out) {
  for (const auto& [id, dets] : script) {
    auto arr = nlohmann::json::array();
    for (const auto& d : dets) arr.push_back(detection_to_json(d));
    out << nlohmann::json{{"image_id", id}, {"detections", std::move(arr)}}.dump() << '\n';
  }
}

inline DetectionScript read_detection_script(std::istream& in) {
  DetectionScript script;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("image_id").get<std::string>();
      auto& dets = script[id];
      for (const auto& d : j.at("detections")) {
        dets.push_back({id, d.at("class_label").get<std::string>(), canonical::box_from_json(d.at("box")),
                        d.at("confidence").get<double>()});
      }
    } catch (const std::exception& e) {
      throw ParseError("detection script line " + std::to_string(line_no), e.what());
    }
  }
  return script;
}

/// Replays fixed detections per image id (empty for unknown ids); training
/// is ignored.
class ScriptedDetector final : public DetectorSession {
 public:
  explicit ScriptedDetector(DetectionScript script, std::string descriptor = "scripted")
      : script_(std::move(script)), descriptor_(std::move(descriptor)) {}

  void train(std::span<const ImageRecord>) override {}
  std::vector<std::vector<Detection>> predict(std::span<const ImageRecord> images) override {
    std::vector<std::vector<Detection>> out;
    for (const auto& img : images) {
      const auto it = script_.find(img.image_id);
      out.push_back(it == script_.end() ? std::vector<Detection>{} : it->second);
    }
    return out;
  }
  void reset() override {}
  std::string descriptor() const override { return descriptor_; }

 private:
  DetectionScript script_;
  std::string descriptor_;
};

/// Saturating learning curve: 1 - exp(-exposure / tau).
inline double skill(double exposure, double tau) { return 1.0 - std::exp(-exposure / tau); }

struct SyntheticDetectorConfig {
  std::uint64_t seed = 0;
  double tau = 500.0;               // exposure scale, in ground-truth boxes
  double detect_floor = 0.2;        // detection probability at skill 0
  double detect_ceiling = 0.95;     // detection probability at skill 1
  double jitter_scale = 0.3;        // corner noise, fraction of box size, at skill 0
  double fp_rate_initial = 1.0;     // expected false positives per image at skill 0
  double confidence_noise = 0.1;
  double confidence_threshold = 0.5;  // lower bound of false-positive confidences
  double forgetting = 1.0;          // per-class exposure decay for classes absent from a batch
  std::vector<std::string> vocabulary;  // fallback classes for false positives

  void validate() const {
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(detect_floor >= 0.0 && detect_floor <= detect_ceiling && detect_ceiling <= 1.0)) {
      throw ConfigError("need 0 <= detect_floor <= detect_ceiling <= 1");
    }
    if (!(jitter_scale >= 0.0) || !(fp_rate_initial >= 0.0) || !(confidence_noise >= 0.0)) {
      throw ConfigError("jitter_scale, fp_rate_initial and confidence_noise must be nonnegative");
    }
    if (!(forgetting > 0.0 && forgetting <= 1.0)) throw ConfigError("forgetting must be in (0, 1]");
  }
};

/// Oracle-corruption stand-in for a fine-tuned detector.
///
/// Training only accumulates per-class exposure (ground-truth boxes seen).
/// Prediction perturbs each image's hidden ground truth. Every image draws
/// from its own stream Rng(splitmix64(seed ^ fnv1a64(image_id))), so
/// predictions depend only on the exposure state and the image. Per image:
///
///   for each true box, in stored order, five draws: u_detect, four corner
///   offsets, confidence noise. The box is detected when u_detect < p with
///   p = floor + (ceiling - floor) * s_class; corners move by
///   offset * jitter_scale * (1 - s_class) * box size; confidence is
///   clamp(s_class + noise * confidence_noise, 0, 1).
///
///   then one draw for the false-positive count, Poisson(fp_rate_initial *
///   (1 - s)) with s the skill of the total exposure, and for each false
///   positive: class, width, height, x, y, confidence (uniform in
///   [confidence_threshold, 1]).
///
/// Draws are consumed whether or not the box is emitted, which pairs the
/// randomness across skill levels.
class SyntheticDetector final : public DetectorSession {
 public:
  using State = std::map<std::string, double>;

  explicit SyntheticDetector(SyntheticDetectorConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  void train(std::span<const ImageRecord> annotated) override {
    std::map<std::string, double> counts;
    for (const auto& img : annotated) {
      for (const auto& o : img.objects) counts[o.class_label] += 1.0;
    }
    if (cfg_.forgetting < 1.0) {
      for (auto& [label, e] : exposure_) {
        if (!counts.contains(label)) e *= cfg_.forgetting;
      }
    }
    for (const auto& [label, n] : counts) exposure_[label] += n;
  }

  std::vector<std::vector<Detection>> predict(std::span<const ImageRecord> images) override {
    std::vector<std::vector<Detection>> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(predict_image(img));
    return out;
  }

  void reset() override { exposure_.clear(); }

  std::string descriptor() const override { return "synthetic"; }

  const SyntheticDetectorConfig& config() const noexcept { return cfg_; }
  const State& state() const noexcept { return exposure_; }
  void restore(State s) { exposure_ = std::move(s); }

  double total_exposure() const {
    double t = 0.0;
    for (const auto& [label, e] : exposure_) t += e;
    return t;
  }

  double class_skill(const std::string& label) const {
    const auto it = exposure_.find(label);
    return skill(it == exposure_.end() ? 0.0 : it->second, cfg_.tau);
  }

  double overall_skill() const { return skill(total_exposure(), cfg_.tau); }

  std::vector<Detection> predict_image(const ImageRecord& img) const {
    Rng rng(splitmix64(cfg_.seed ^ fnv1a64(img.image_id)));
    std::vector<Detection> dets;
    const double w = img.width, h = img.height;

    for (const auto& o : img.objects) {
      const double s = class_skill(o.class_label);
      const double u = rng.uniform01();
      const double dx0 = rng.centered(1.0), dy0 = rng.centered(1.0), dx1 = rng.centered(1.0), dy1 = rng.centered(1.0);
      const double noise = rng.centered(1.0);
      const double p = cfg_.detect_floor + (cfg_.detect_ceiling - cfg_.detect_floor) * s;
      if (!(u < p)) continue;
      const double mag = cfg_.jitter_scale * (1.0 - s);
      const double bw = o.box.width(), bh = o.box.height();
      try {
        const BoundingBox moved(o.box.xmin() + dx0 * mag * bw, o.box.ymin() + dy0 * mag * bh,
                                o.box.xmax() + dx1 * mag * bw, o.box.ymax() + dy1 * mag * bh);
        dets.push_back({img.image_id, o.class_label, clamp_to_image(moved, w, h),
                        std::clamp(s + noise * cfg_.confidence_noise, 0.0, 1.0)});
      } catch (const DegenerateBox&) {
        // Jitter collapsed the box: nothing is proposed for it.
      }
    }

    const auto count = poisson_from_uniform(cfg_.fp_rate_initial * (1.0 - overall_skill()), rng.uniform01());
    const auto classes = fp_classes();
    if (classes.empty()) return dets;
    for (std::uint64_t k = 0; k < count; ++k) {
      const auto& label = classes[static_cast<std::size_t>(rng.below(classes.size()))];
      const double bw = rng.uniform(0.05, 0.5) * w;
      const double bh = rng.uniform(0.05, 0.5) * h;
      const double x = rng.uniform(0.0, w - bw);
      const double y = rng.uniform(0.0, h - bh);
      const double conf = rng.uniform(cfg_.confidence_threshold, 1.0);
      dets.push_back({img.image_id, label, BoundingBox(x, y, x + bw, y + bh), conf});
    }
    return dets;
  }

 private:
  std::vector<std::string> fp_classes() const {
    std::vector<std::string> out;
    for (const auto& [label, e] : exposure_) out.push_back(label);
    return out.empty() ? cfg_.vocabulary : out;
  }

  SyntheticDetectorConfig cfg_;
  State exposure_;
};

}  // namespace annoloop
