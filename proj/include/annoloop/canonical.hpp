#pragma once

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "annoloop/dataset.hpp"

namespace annoloop {

/// Line-delimited canonical dataset format.
///
/// Line 1 is a header record
///   {"classes":[...],"format":"annoloop-dataset","provenance":"voc","version":1}
/// followed by one record per image, in dataset order:
///   {"height":375,"image_id":"000005","objects":[{"box":[x0,y0,x1,y1],
///    "class_label":"chair","flags":["difficult"]}],"sequence_index":3,
///    "source_name":"000005.jpg","width":500}
/// Keys are emitted in sorted order and doubles in shortest round-trip form,
/// so equal datasets serialize to identical bytes. `sequence_index` is
/// omitted when absent.
namespace canonical {

inline constexpr const char* kFormat = "annoloop-dataset";
inline constexpr int kVersion = 1;

inline nlohmann::json box_to_json(const BoundingBox& b) { return {b.xmin(), b.ymin(), b.xmax(), b.ymax()}; }

inline BoundingBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be an array of 4 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

inline nlohmann::json flags_to_json(FlagSet flags) {
  auto arr = nlohmann::json::array();
  for (auto f : kAllFlags) {
    if (flags.contains(f)) arr.push_back(std::string(to_string(f)));
  }
  return arr;
}

inline FlagSet flags_from_json(const nlohmann::json& j) {
  FlagSet out;
  for (const auto& item : j) {
    const auto f = flag_from_string(item.get<std::string>());
    if (!f) throw std::invalid_argument("unknown flag '" + item.get<std::string>() + "'");
    out.insert(*f);
  }
  return out;
}

inline nlohmann::json image_to_json(const ImageRecord& img) {
  nlohmann::json j;
  j["image_id"] = img.image_id;
  j["source_name"] = img.source_name;
  j["width"] = img.width;
  j["height"] = img.height;
  if (img.sequence_index) j["sequence_index"] = *img.sequence_index;
  auto objs = nlohmann::json::array();
  for (const auto& o : img.objects) {
    objs.push_back({{"class_label", o.class_label}, {"box", box_to_json(o.box)}, {"flags", flags_to_json(o.flags)}});
  }
  j["objects"] = std::move(objs);
  return j;
}

inline ImageRecord image_from_json(const nlohmann::json& j) {
  ImageRecord img;
  img.image_id = j.at("image_id").get<std::string>();
  img.source_name = j.at("source_name").get<std::string>();
  img.width = j.at("width").get<int>();
  img.height = j.at("height").get<int>();
  if (auto it = j.find("sequence_index"); it != j.end()) img.sequence_index = it->get<std::uint64_t>();
  for (const auto& o : j.at("objects")) {
    img.objects.push_back({o.at("class_label").get<std::string>(), box_from_json(o.at("box")),
                           flags_from_json(o.at("flags"))});
  }
  return img;
}

}  // namespace canonical

inline void write_canonical(const Dataset& d, std::ostream& out) {
  nlohmann::json header;
  header["format"] = canonical::kFormat;
  header["version"] = canonical::kVersion;
  header["classes"] = d.classes;
  header["provenance"] = std::string(to_string(d.provenance));
  out << header.dump() << '\n';
  for (const auto& img : d.images) out << canonical::image_to_json(img).dump() << '\n';
}

/// Throws ParseError ("line N: ...") on malformed input and VersionMismatch
/// on an unknown format version.
inline Dataset read_canonical(std::istream& in) {
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  auto fail = [&](const std::string& why) { throw ParseError("line " + std::to_string(line_no), why); };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != canonical::kFormat) fail("missing annoloop-dataset header");
        const int version = j.at("version").get<int>();
        if (version != canonical::kVersion) {
          throw VersionMismatch("unsupported canonical dataset version " + std::to_string(version));
        }
        d.classes = j.at("classes").get<std::vector<std::string>>();
        const auto prov = provenance_from_string(j.at("provenance").get<std::string>());
        if (!prov) fail("unknown provenance");
        d.provenance = *prov;
        have_header = true;
      } else {
        d.images.push_back(canonical::image_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    } catch (const DegenerateBox& e) {
      fail(e.what());
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (!have_header) throw ParseError("line 1", "empty canonical stream");
  try {
    validate(d);
  } catch (const ParseError& e) {
    throw ParseError("canonical", e.what());
  }
  return d;
}

}  // namespace annoloop
