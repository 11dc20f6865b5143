#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "annoloop/errors.hpp"
#include "annoloop/geometry.hpp"

namespace annoloop {

enum class ObjectFlag : std::uint8_t {
  occluded = 1u << 0,
  truncated = 1u << 1,
  group = 1u << 2,
  difficult = 1u << 3,
  depiction = 1u << 4,
};

/// Small bit set over ObjectFlag.
class FlagSet {
 public:
  constexpr FlagSet() = default;
  constexpr FlagSet(std::initializer_list<ObjectFlag> flags) {
    for (auto f : flags) insert(f);
  }

  constexpr void insert(ObjectFlag f) noexcept { bits_ |= static_cast<std::uint8_t>(f); }
  constexpr bool contains(ObjectFlag f) const noexcept { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  constexpr bool intersects(FlagSet other) const noexcept { return (bits_ & other.bits_) != 0; }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::uint8_t bits() const noexcept { return bits_; }

  friend constexpr bool operator==(FlagSet, FlagSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

inline constexpr ObjectFlag kAllFlags[] = {ObjectFlag::occluded, ObjectFlag::truncated, ObjectFlag::group,
                                           ObjectFlag::difficult, ObjectFlag::depiction};

inline std::string_view to_string(ObjectFlag f) {
  switch (f) {
    case ObjectFlag::occluded: return "occluded";
    case ObjectFlag::truncated: return "truncated";
    case ObjectFlag::group: return "group";
    case ObjectFlag::difficult: return "difficult";
    case ObjectFlag::depiction: return "depiction";
  }
  return "?";
}

inline std::optional<ObjectFlag> flag_from_string(std::string_view s) {
  for (auto f : kAllFlags) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

/// Parses a comma-separated flag list such as "occluded,truncated,group".
inline FlagSet parse_flag_list(std::string_view text) {
  FlagSet out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    if (!item.empty()) {
      const auto f = flag_from_string(item);
      if (!f) throw ConfigError("unknown object flag '" + std::string(item) + "'");
      out.insert(*f);
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

struct GroundTruthObject {
  std::string class_label;
  BoundingBox box;
  FlagSet flags;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct ImageRecord {
  std::string image_id;
  std::string source_name;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthObject> objects;
  std::optional<std::uint64_t> sequence_index;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

enum class Provenance { voc, coco, openimages, canonical, synthetic };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::voc: return "voc";
    case Provenance::coco: return "coco";
    case Provenance::openimages: return "openimages";
    case Provenance::canonical: return "canonical";
    case Provenance::synthetic: return "synthetic";
  }
  return "?";
}

inline std::optional<Provenance> provenance_from_string(std::string_view s) {
  for (auto p : {Provenance::voc, Provenance::coco, Provenance::openimages, Provenance::canonical,
                 Provenance::synthetic}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<std::string> classes;  // lexicographically sorted
  Provenance provenance = Provenance::canonical;

  std::size_t object_count() const {
    std::size_t n = 0;
    for (const auto& img : images) n += img.objects.size();
    return n;
  }

  const ImageRecord* find(std::string_view image_id) const {
    for (const auto& img : images) {
      if (img.image_id == image_id) return &img;
    }
    return nullptr;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Sorted, de-duplicated vocabulary of the labels used by `images`.
inline std::vector<std::string> collect_classes(const std::vector<ImageRecord>& images) {
  std::set<std::string> labels;
  for (const auto& img : images) {
    for (const auto& obj : img.objects) labels.insert(obj.class_label);
  }
  return {labels.begin(), labels.end()};
}

/// Checks the dataset invariants; throws ParseError naming the first violation.
inline void validate(const Dataset& d) {
  if (!std::is_sorted(d.classes.begin(), d.classes.end()) ||
      std::adjacent_find(d.classes.begin(), d.classes.end()) != d.classes.end()) {
    throw ParseError("dataset", "class vocabulary must be sorted and unique");
  }
  std::unordered_set<std::string> ids;
  std::unordered_set<std::uint64_t> seq;
  for (const auto& img : d.images) {
    if (!ids.insert(img.image_id).second) throw ParseError(img.image_id, "duplicate image_id");
    if (img.sequence_index && !seq.insert(*img.sequence_index).second) {
      throw ParseError(img.image_id, "duplicate sequence_index");
    }
    if (img.width <= 0 || img.height <= 0) throw ParseError(img.image_id, "image dimensions must be positive");
    for (const auto& obj : img.objects) {
      if (obj.class_label.empty()) throw ParseError(img.image_id, "empty class label");
      if (!std::binary_search(d.classes.begin(), d.classes.end(), obj.class_label)) {
        throw ParseError(img.image_id, "class '" + obj.class_label + "' not in vocabulary");
      }
      if (obj.box.xmin() < 0 || obj.box.ymin() < 0 || obj.box.xmax() > img.width || obj.box.ymax() > img.height) {
        throw ParseError(img.image_id, "box outside image bounds");
      }
    }
  }
}

/// Removes objects carrying any of `drop`. Images and vocabulary are kept.
inline Dataset filter_objects(const Dataset& d, FlagSet drop) {
  Dataset out = d;
  if (drop.empty()) return out;
  for (auto& img : out.images) {
    std::erase_if(img.objects, [drop](const GroundTruthObject& o) { return o.flags.intersects(drop); });
  }
  return out;
}

/// One problem found while ingesting a source; ingestion continues past it.
struct ParseIssue {
  std::string document;
  std::string reason;
};

/// Parsed dataset plus every record that could not be used.
struct IngestResult {
  Dataset dataset;
  std::vector<ParseIssue> issues;
  std::vector<std::string> missing_dimensions;  // OpenImages: image ids without metadata

  bool ok() const noexcept { return issues.empty() && missing_dimensions.empty(); }
};

namespace detail {

/// Sorts by image_id and fills the vocabulary; shared by all parsers.
inline void finalize(Dataset& d) {
  std::sort(d.images.begin(), d.images.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  d.classes = collect_classes(d.images);
}

}  // namespace detail

}  // namespace annoloop
