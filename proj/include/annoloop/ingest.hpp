#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <boost/tokenizer.hpp>
#include <json.hpp>

#include "annoloop/dataset.hpp"

namespace annoloop {

/// A named in-memory source document (file name plus content).
struct SourceDocument {
  std::string name;
  std::string content;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError(p.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// All `*.xml` files in `dir`, sorted by file name.
inline std::vector<SourceDocument> read_xml_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ParseError(dir.string(), "not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<SourceDocument> docs;
  for (const auto& p : paths) docs.push_back({p.filename().string(), read_file(p)});
  return docs;
}

namespace detail {

inline bool truthy_flag(const boost::optional<std::string>& v) {
  if (!v) return false;
  try {
    return std::stod(*v) > 0.0;
  } catch (...) {
    return false;
  }
}

}  // namespace detail

/// PASCAL VOC annotation XML. VOC corners are 1-based inclusive pixel
/// indices; min corners are shifted by -1 so that (10,20,110,220) becomes
/// (9,19,110,220) in continuous 0-based coordinates.
inline IngestResult parse_voc(const std::vector<SourceDocument>& documents) {
  namespace pt = boost::property_tree;
  IngestResult result;
  result.dataset.provenance = Provenance::voc;

  for (const auto& doc : documents) {
    try {
      pt::ptree tree;
      std::istringstream in(doc.content);
      pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
      const auto& ann = tree.get_child("annotation");

      ImageRecord img;
      const auto filename = ann.get_optional<std::string>("filename");
      img.source_name = filename ? *filename : doc.name;
      img.image_id = std::filesystem::path(img.source_name).stem().string();
      if (img.image_id.empty()) throw ParseError(doc.name, "cannot derive image id");
      img.width = ann.get<int>("size.width");
      img.height = ann.get<int>("size.height");
      if (img.width <= 0 || img.height <= 0) throw ParseError(doc.name, "non-positive image size");

      for (const auto& [key, obj] : ann) {
        if (key != "object") continue;
        GroundTruthObject o{obj.get<std::string>("name"), BoundingBox(0, 0, 1, 1), {}};
        if (o.class_label.empty()) throw ParseError(doc.name, "object without name");
        const double xmin = obj.get<double>("bndbox.xmin") - 1.0;
        const double ymin = obj.get<double>("bndbox.ymin") - 1.0;
        const double xmax = obj.get<double>("bndbox.xmax");
        const double ymax = obj.get<double>("bndbox.ymax");
        o.box = clamp_to_image(BoundingBox(xmin, ymin, xmax, ymax), img.width, img.height);
        if (detail::truthy_flag(obj.get_optional<std::string>("difficult"))) o.flags.insert(ObjectFlag::difficult);
        if (detail::truthy_flag(obj.get_optional<std::string>("truncated"))) o.flags.insert(ObjectFlag::truncated);
        if (detail::truthy_flag(obj.get_optional<std::string>("occluded"))) o.flags.insert(ObjectFlag::occluded);
        img.objects.push_back(std::move(o));
      }
      result.dataset.images.push_back(std::move(img));
    } catch (const ParseError& e) {
      result.issues.push_back({doc.name, e.reason()});
    } catch (const std::exception& e) {
      result.issues.push_back({doc.name, e.what()});
    }
  }
  detail::finalize(result.dataset);
  return result;
}

/// COCO detection JSON (images[], annotations[], categories[]). Boxes are
/// [x,y,width,height]; iscrowd=1 maps to the group flag. Image ids are the
/// decimal COCO ids.
inline IngestResult parse_coco(std::string_view json_text, std::string_view document_name = "coco") {
  IngestResult result;
  result.dataset.provenance = Provenance::coco;
  const std::string doc(document_name);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    result.issues.push_back({doc, std::string("invalid JSON: ") + e.what()});
    return result;
  }

  auto id_string = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };

  try {
    std::map<std::string, std::string> categories;
    for (const auto& c : j.at("categories")) categories[id_string(c.at("id"))] = c.at("name").get<std::string>();

    std::map<std::string, std::size_t> image_index;
    for (const auto& im : j.at("images")) {
      ImageRecord img;
      img.image_id = id_string(im.at("id"));
      img.source_name = im.value("file_name", img.image_id);
      img.width = im.at("width").get<int>();
      img.height = im.at("height").get<int>();
      if (img.width <= 0 || img.height <= 0) {
        result.issues.push_back({doc, "image " + img.image_id + ": non-positive size"});
        continue;
      }
      if (!image_index.emplace(img.image_id, result.dataset.images.size()).second) {
        result.issues.push_back({doc, "duplicate image id " + img.image_id});
        continue;
      }
      result.dataset.images.push_back(std::move(img));
    }

    for (const auto& a : j.at("annotations")) {
      const auto ann_id = a.contains("id") ? id_string(a.at("id")) : std::string("?");
      const auto where = "annotation " + ann_id;
      try {
        const auto img_it = image_index.find(id_string(a.at("image_id")));
        if (img_it == image_index.end()) {
          result.issues.push_back({doc, where + ": unknown image_id " + id_string(a.at("image_id"))});
          continue;
        }
        const auto cat_it = categories.find(id_string(a.at("category_id")));
        if (cat_it == categories.end()) {
          result.issues.push_back({doc, where + ": unknown category_id " + id_string(a.at("category_id"))});
          continue;
        }
        auto& img = result.dataset.images[img_it->second];
        const auto& bb = a.at("bbox");
        const auto box = BoundingBox::from_xywh(bb.at(0).get<double>(), bb.at(1).get<double>(),
                                                bb.at(2).get<double>(), bb.at(3).get<double>());
        GroundTruthObject o{cat_it->second, clamp_to_image(box, img.width, img.height), {}};
        if (a.value("iscrowd", 0) == 1) o.flags.insert(ObjectFlag::group);
        img.objects.push_back(std::move(o));
      } catch (const std::exception& e) {
        result.issues.push_back({doc, where + ": " + e.what()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    result.issues.push_back({doc, e.what()});
  }
  detail::finalize(result.dataset);
  return result;
}

namespace detail {

/// One RFC 4180 line split into fields.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  return {tok.begin(), tok.end()};
}

/// Reads a headed CSV; returns rows as column-name -> value maps.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline CsvTable read_csv(std::string_view text) {
  CsvTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      t.rows.push_back(std::move(fields));
      t.line_numbers.push_back(n);
    }
  }
  return t;
}

}  // namespace detail

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Image-dimension table: CSV with columns ImageID,Width,Height.
inline std::map<std::string, ImageSize> parse_image_sizes(std::string_view csv_text) {
  const auto t = detail::read_csv(csv_text);
  const auto id = t.column("ImageID"), w = t.column("Width"), h = t.column("Height");
  if (!id || !w || !h) throw ParseError("image sizes", "expected columns ImageID,Width,Height");
  std::map<std::string, ImageSize> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      out[row.at(*id)] = {std::stoi(row.at(*w)), std::stoi(row.at(*h))};
    } catch (const std::exception&) {
      throw ParseError("image sizes", "line " + std::to_string(t.line_numbers[r]) + ": malformed row");
    }
  }
  return out;
}

/// OpenImages box CSV (normalized XMin,XMax,YMin,YMax plus IsOccluded,
/// IsTruncated, IsGroupOf, IsDepiction). Rows whose image has no entry in
/// `sizes` are reported in `missing_dimensions`. Only images that have at
/// least one box row appear in the dataset.
inline IngestResult parse_openimages(std::string_view box_csv, const std::map<std::string, ImageSize>& sizes,
                                     std::string_view document_name = "boxes") {
  IngestResult result;
  result.dataset.provenance = Provenance::openimages;
  const std::string doc(document_name);
  const auto t = detail::read_csv(box_csv);

  const auto c_id = t.column("ImageID"), c_label = t.column("LabelName"), c_x0 = t.column("XMin"),
             c_x1 = t.column("XMax"), c_y0 = t.column("YMin"), c_y1 = t.column("YMax");
  if (!c_id || !c_label || !c_x0 || !c_x1 || !c_y0 || !c_y1) {
    result.issues.push_back({doc, "missing one of the columns ImageID,LabelName,XMin,XMax,YMin,YMax"});
    return result;
  }
  const auto c_occ = t.column("IsOccluded"), c_trunc = t.column("IsTruncated"), c_group = t.column("IsGroupOf"),
             c_dep = t.column("IsDepiction");

  std::map<std::string, ImageRecord> images;
  std::set<std::string> missing;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = doc + ":" + std::to_string(t.line_numbers[r]);
    try {
      if (row.size() != t.header.size()) throw ParseError(where, "wrong number of fields");
      const auto& image_id = row[*c_id];
      const auto size_it = sizes.find(image_id);
      if (size_it == sizes.end()) {
        missing.insert(image_id);
        continue;
      }
      const auto [w, h] = size_it->second;
      auto [it, inserted] = images.try_emplace(image_id);
      if (inserted) {
        it->second.image_id = image_id;
        it->second.source_name = image_id + ".jpg";
        it->second.width = w;
        it->second.height = h;
      }
      const BoundingBox box(std::stod(row[*c_x0]) * w, std::stod(row[*c_y0]) * h, std::stod(row[*c_x1]) * w,
                            std::stod(row[*c_y1]) * h);
      GroundTruthObject o{row[*c_label], clamp_to_image(box, w, h), {}};
      if (o.class_label.empty()) throw ParseError(where, "empty LabelName");
      auto flag_col = [&](std::optional<std::size_t> c, ObjectFlag f) {
        if (c && row[*c] == "1") o.flags.insert(f);
      };
      flag_col(c_occ, ObjectFlag::occluded);
      flag_col(c_trunc, ObjectFlag::truncated);
      flag_col(c_group, ObjectFlag::group);
      flag_col(c_dep, ObjectFlag::depiction);
      it->second.objects.push_back(std::move(o));
    } catch (const ParseError& e) {
      result.issues.push_back({where, e.reason()});
    } catch (const std::exception& e) {
      result.issues.push_back({where, e.what()});
    }
  }
  result.missing_dimensions.assign(missing.begin(), missing.end());
  for (auto& [id, img] : images) result.dataset.images.push_back(std::move(img));
  detail::finalize(result.dataset);
  return result;
}

}  // namespace annoloop
