#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "annoloop/dataset.hpp"
#include "annoloop/random.hpp"

namespace annoloop {

/// The order images are presented to the annotator.
struct OrderingStrategy {
  enum class Kind { shuffled, sorted_by_object_count, original };

  Kind kind = Kind::shuffled;
  std::uint64_t seed = 0;  // used by shuffled only

  static OrderingStrategy shuffled(std::uint64_t seed) { return {Kind::shuffled, seed}; }
  static OrderingStrategy sorted() { return {Kind::sorted_by_object_count, 0}; }
  static OrderingStrategy original() { return {Kind::original, 0}; }

  friend bool operator==(const OrderingStrategy&, const OrderingStrategy&) = default;
};

inline std::string_view to_string(OrderingStrategy::Kind k) {
  switch (k) {
    case OrderingStrategy::Kind::shuffled: return "shuffled";
    case OrderingStrategy::Kind::sorted_by_object_count: return "sorted";
    case OrderingStrategy::Kind::original: return "original";
  }
  return "?";
}

inline std::optional<OrderingStrategy::Kind> ordering_from_string(std::string_view s) {
  using K = OrderingStrategy::Kind;
  for (auto k : {K::shuffled, K::sorted_by_object_count, K::original}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// Returns the image ids in presentation order.
///
///  - shuffled: Fisher-Yates over the dataset order, drawing j = below(i+1)
///    for i = n-1 .. 1 from Rng(seed).
///  - sorted: object count descending, ties by image_id ascending.
///  - original: sequence_index ascending when every image has one, otherwise
///    source_name ascending (ties by image_id).
inline std::vector<std::string> order_images(const Dataset& d, const OrderingStrategy& s) {
  std::vector<const ImageRecord*> imgs;
  imgs.reserve(d.images.size());
  for (const auto& img : d.images) imgs.push_back(&img);

  switch (s.kind) {
    case OrderingStrategy::Kind::shuffled: {
      Rng rng(s.seed);
      for (std::size_t i = imgs.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(imgs[i - 1], imgs[j]);
      }
      break;
    }
    case OrderingStrategy::Kind::sorted_by_object_count:
      std::sort(imgs.begin(), imgs.end(), [](const ImageRecord* a, const ImageRecord* b) {
        if (a->objects.size() != b->objects.size()) return a->objects.size() > b->objects.size();
        return a->image_id < b->image_id;
      });
      break;
    case OrderingStrategy::Kind::original: {
      const bool temporal =
          std::all_of(imgs.begin(), imgs.end(), [](const ImageRecord* i) { return i->sequence_index.has_value(); });
      std::sort(imgs.begin(), imgs.end(), [temporal](const ImageRecord* a, const ImageRecord* b) {
        if (temporal) return *a->sequence_index < *b->sequence_index;
        if (a->source_name != b->source_name) return a->source_name < b->source_name;
        return a->image_id < b->image_id;
      });
      break;
    }
  }

  std::vector<std::string> ids;
  ids.reserve(imgs.size());
  for (const auto* img : imgs) ids.push_back(img->image_id);
  return ids;
}

struct Batch {
  std::size_t index = 0;
  std::vector<std::string> image_ids;

  friend bool operator==(const Batch&, const Batch&) = default;
};

/// Consecutive chunks of `batch_size`; the last one may be shorter.
inline std::vector<Batch> make_batches(const std::vector<std::string>& order, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + batch_size);
    out.push_back({out.size(), {order.begin() + static_cast<std::ptrdiff_t>(start),
                                order.begin() + static_cast<std::ptrdiff_t>(end)}});
  }
  return out;
}

/// Restricts the dataset to one class: keeps images with at least one box of
/// `class_label`. Other-class boxes are removed unless `keep_distractors`, in
/// which case they stay (and the vocabulary keeps their labels).
inline Dataset class_scope(const Dataset& d, const std::string& class_label, bool keep_distractors = false) {
  if (!std::binary_search(d.classes.begin(), d.classes.end(), class_label)) {
    throw UnknownClass("class '" + class_label + "' is not in the dataset vocabulary");
  }
  Dataset out;
  out.provenance = d.provenance;
  for (const auto& img : d.images) {
    const bool has = std::any_of(img.objects.begin(), img.objects.end(),
                                 [&](const GroundTruthObject& o) { return o.class_label == class_label; });
    if (!has) continue;
    ImageRecord kept = img;
    if (!keep_distractors) {
      std::erase_if(kept.objects, [&](const GroundTruthObject& o) { return o.class_label != class_label; });
    }
    out.images.push_back(std::move(kept));
  }
  out.classes = keep_distractors ? collect_classes(out.images) : std::vector<std::string>{class_label};
  return out;
}

}  // namespace annoloop
