#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "annoloop/dataset.hpp"
#include "annoloop/random.hpp"

namespace annoloop {

struct SyntheticDatasetConfig {
  std::size_t num_images = 2000;
  std::uint64_t seed = 1;
  int width = 640;
  int height = 480;
  double mean_objects = 2.5;  // Poisson mean of boxes per image
  std::size_t max_objects = 12;
  std::vector<std::string> classes = {"bicycle", "car", "dog", "person", "chair"};
};

/// Random dataset of video-like frames: ids "000000".., file names
/// "frame_000000.jpg".., sequence_index equal to the frame number. Box sides
/// are 10%..40% of the image, uniformly placed; labels uniform over `classes`.
inline Dataset make_synthetic_dataset(const SyntheticDatasetConfig& cfg) {
  if (cfg.classes.empty()) throw ConfigError("synthetic dataset needs at least one class");
  Rng rng(derive_seed(cfg.seed, "synthetic-dataset"));
  Dataset d;
  d.provenance = Provenance::synthetic;
  const double w = cfg.width, h = cfg.height;
  for (std::size_t i = 0; i < cfg.num_images; ++i) {
    ImageRecord img;
    img.image_id = fmt::format("{:06d}", i);
    img.source_name = fmt::format("frame_{:06d}.jpg", i);
    img.width = cfg.width;
    img.height = cfg.height;
    img.sequence_index = i;
    const auto n = std::min<std::uint64_t>(cfg.max_objects, poisson_from_uniform(cfg.mean_objects, rng.uniform01()));
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto& label = cfg.classes[static_cast<std::size_t>(rng.below(cfg.classes.size()))];
      const double bw = rng.uniform(0.1, 0.4) * w;
      const double bh = rng.uniform(0.1, 0.4) * h;
      const double x = rng.uniform(0.0, w - bw);
      const double y = rng.uniform(0.0, h - bh);
      img.objects.push_back({label, BoundingBox(x, y, x + bw, y + bh), {}});
    }
    d.images.push_back(std::move(img));
  }
  d.classes = collect_classes(d.images);
  return d;
}

}  // namespace annoloop
