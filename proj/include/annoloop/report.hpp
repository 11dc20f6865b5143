#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "annoloop/campaign.hpp"

namespace annoloop {

// report.json ----------------------------------------------------------------

inline nlohmann::json config_to_json(const CampaignConfig& c) {
  nlohmann::json j;
  j["batch_size"] = c.batch_size;
  j["ordering"] = std::string(to_string(c.ordering.kind));
  j["ordering_seed"] = c.ordering.seed;
  j["iou_threshold"] = c.iou_threshold;
  j["confidence_threshold"] = c.confidence_threshold;
  j["regime"] = std::string(to_string(c.regime));
  j["first_fold_fraction"] = c.first_fold_fraction;
  j["class_scope"] = c.class_scope ? nlohmann::json(*c.class_scope) : nlohmann::json(nullptr);
  j["keep_distractors"] = c.keep_distractors;
  j["class_aware_matching"] = c.class_aware_matching;
  j["relabel_cost"] = c.relabel_cost == RelabelCost::one ? "one" : "two";
  j["seed"] = c.seed;
  return j;
}

inline CampaignConfig config_from_json(const nlohmann::json& j) {
  CampaignConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  const auto kind = ordering_from_string(j.at("ordering").get<std::string>());
  if (!kind) throw ParseError("report", "unknown ordering");
  c.ordering = {*kind, j.at("ordering_seed").get<std::uint64_t>()};
  c.iou_threshold = j.at("iou_threshold").get<double>();
  c.confidence_threshold = j.at("confidence_threshold").get<double>();
  const auto regime = regime_from_string(j.at("regime").get<std::string>());
  if (!regime) throw ParseError("report", "unknown regime");
  c.regime = *regime;
  c.first_fold_fraction = j.at("first_fold_fraction").get<double>();
  if (!j.at("class_scope").is_null()) c.class_scope = j.at("class_scope").get<std::string>();
  c.keep_distractors = j.at("keep_distractors").get<bool>();
  c.class_aware_matching = j.at("class_aware_matching").get<bool>();
  c.relabel_cost = j.at("relabel_cost").get<std::string>() == "one" ? RelabelCost::one : RelabelCost::two;
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline nlohmann::json batch_to_json(const BatchWorkload& b) {
  return {{"batch_index", b.batch_index}, {"num_gt", b.num_gt},           {"num_detections", b.num_detections},
          {"precision", b.precision},     {"recall", b.recall},           {"additions", b.additions},
          {"removals", b.removals},       {"relabels", b.relabels},       {"corrections", b.corrections},
          {"manually_drawn", b.manually_drawn}};
}

inline BatchWorkload batch_from_json(const nlohmann::json& j) {
  BatchWorkload b;
  b.batch_index = j.at("batch_index").get<std::size_t>();
  b.num_gt = j.at("num_gt").get<std::size_t>();
  b.num_detections = j.at("num_detections").get<std::size_t>();
  b.precision = j.at("precision").get<double>();
  b.recall = j.at("recall").get<double>();
  b.additions = j.at("additions").get<std::size_t>();
  b.removals = j.at("removals").get<std::size_t>();
  b.relabels = j.at("relabels").get<std::size_t>();
  b.corrections = j.at("corrections").get<std::size_t>();
  b.manually_drawn = j.at("manually_drawn").get<std::size_t>();
  return b;
}

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

/// Full report minus wall-clock timings (which are not reproducible).
inline nlohmann::json report_to_json(const CampaignReport& r) {
  nlohmann::json j;
  j["format"] = "annoloop-report";
  j["version"] = 1;
  j["config"] = config_to_json(r.config);
  j["detector"] = r.detector;
  j["num_images"] = r.num_images;
  auto batches = nlohmann::json::array();
  for (const auto& b : r.batches) batches.push_back(batch_to_json(b));
  j["batches"] = std::move(batches);
  auto curves = nlohmann::json::array();
  for (const auto& p : r.curves) curves.push_back({p.image_count, p.cum_gt, p.cum_pred, p.cum_corrections});
  j["curves"] = std::move(curves);
  j["total_gt"] = r.total_gt;
  j["total_corrections"] = r.total_corrections;
  j["manual_b0_boxes"] = r.manual_b0_boxes;
  j["reduction_excluding_b0"] = optional_number(r.reduction_excluding_b0);
  j["reduction_whole_campaign"] = optional_number(r.reduction_whole_campaign);
  return j;
}

inline CampaignReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "annoloop-report") throw ParseError("report", "not an annoloop report");
    if (j.at("version") != 1) throw VersionMismatch("unsupported report version " + j.at("version").dump());
    CampaignReport r;
    r.config = config_from_json(j.at("config"));
    r.detector = j.at("detector").get<std::string>();
    r.num_images = j.at("num_images").get<std::size_t>();
    for (const auto& b : j.at("batches")) r.batches.push_back(batch_from_json(b));
    for (const auto& p : j.at("curves")) {
      r.curves.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(), p.at(2).get<std::size_t>(),
                          p.at(3).get<std::size_t>()});
    }
    r.total_gt = j.at("total_gt").get<std::size_t>();
    r.total_corrections = j.at("total_corrections").get<std::size_t>();
    r.manual_b0_boxes = j.at("manual_b0_boxes").get<std::size_t>();
    if (!j.at("reduction_excluding_b0").is_null()) r.reduction_excluding_b0 = j["reduction_excluding_b0"].get<double>();
    if (!j.at("reduction_whole_campaign").is_null()) {
      r.reduction_whole_campaign = j["reduction_whole_campaign"].get<double>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("report", e.what());
  }
}

inline void write_report_json(const CampaignReport& r, std::ostream& out) { out << report_to_json(r).dump(2) << '\n'; }

inline void write_timings_json(const CampaignReport& r, std::ostream& out) {
  out << nlohmann::json{{"train_seconds", r.timings.train_seconds},
                        {"predict_seconds", r.timings.predict_seconds},
                        {"score_seconds", r.timings.score_seconds}}
             .dump(2)
      << '\n';
}

// CSV --------------------------------------------------------------------------

/// RFC 4180 field quoting.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_batches_csv(const CampaignReport& r, std::ostream& out) {
  out << "index,num_gt,num_detections,precision,recall,additions,removals,corrections\r\n";
  for (const auto& b : r.batches) {
    out << fmt::format("{},{},{},{:.6f},{:.6f},{},{},{}\r\n", b.batch_index, b.num_gt, b.num_detections, b.precision,
                       b.recall, b.additions, b.removals, b.corrections);
  }
}

inline void write_curves_csv(const CampaignReport& r, std::ostream& out) {
  out << "image_count,cum_gt,cum_pred,cum_corrections\r\n";
  for (const auto& p : r.curves) {
    out << fmt::format("{},{},{},{}\r\n", p.image_count, p.cum_gt, p.cum_pred, p.cum_corrections);
  }
}

inline std::string format_reduction(const std::optional<double>& v) {
  return v ? fmt::format("{:.2f}%", *v) : std::string("undefined");
}

/// Human-readable summary of one campaign.
inline std::string summarize(const CampaignReport& r) {
  std::string s;
  s += fmt::format("detector {}  order {}  regime {}  batch size {}  iou {}\n", r.detector,
                   to_string(r.config.ordering.kind), to_string(r.config.regime), r.config.batch_size,
                   r.config.iou_threshold);
  s += fmt::format("images {}  batches {}  ground-truth boxes {}  manual B0 boxes {}\n", r.num_images,
                   r.batches.size(), r.total_gt, r.manual_b0_boxes);
  s += fmt::format("corrections (proposal batches) {}\n", r.total_corrections);
  s += fmt::format("workload reduction excluding B0: {}\n", format_reduction(r.reduction_excluding_b0));
  s += fmt::format("workload reduction whole campaign: {}\n", format_reduction(r.reduction_whole_campaign));
  s += fmt::format("wall time: train {:.3f}s  predict {:.3f}s  score {:.3f}s\n", r.timings.train_seconds,
                   r.timings.predict_seconds, r.timings.score_seconds);
  return s;
}

// Comparison tables ---------------------------------------------------------------

struct ComparisonRow {
  std::string detector;
  OrderingStrategy::Kind strategy = OrderingStrategy::Kind::shuffled;
  Regime regime = Regime::iterative;
  std::size_t repeats = 0;
  double mean_reduction_excluding_b0 = 0.0;
  double std_reduction_excluding_b0 = 0.0;
  double mean_reduction_whole_campaign = 0.0;
  double std_reduction_whole_campaign = 0.0;
  double mean_total_corrections = 0.0;
  double mean_total_gt = 0.0;
  double wall_seconds = 0.0;
  bool best = false;
};

/// Sample standard deviation; 0 for fewer than two values.
inline double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Aggregates the repeats of one cell. Every report must carry a defined
/// reduction; a cell with an undefined one is rejected.
inline ComparisonRow aggregate_cell(const std::vector<CampaignReport>& runs) {
  if (runs.empty()) throw ConfigError("comparison cell without runs");
  ComparisonRow row;
  row.detector = runs.front().detector;
  row.strategy = runs.front().config.ordering.kind;
  row.regime = runs.front().config.regime;
  row.repeats = runs.size();
  std::vector<double> ex, whole;
  for (const auto& r : runs) {
    if (!r.reduction_excluding_b0 || !r.reduction_whole_campaign) {
      throw EmptyCampaign("comparison run without a defined reduction");
    }
    ex.push_back(*r.reduction_excluding_b0);
    whole.push_back(*r.reduction_whole_campaign);
    row.mean_total_corrections += static_cast<double>(r.total_corrections);
    row.mean_total_gt += static_cast<double>(r.total_gt);
    row.wall_seconds += r.timings.total();
  }
  const double n = static_cast<double>(runs.size());
  for (double x : ex) row.mean_reduction_excluding_b0 += x / n;
  for (double x : whole) row.mean_reduction_whole_campaign += x / n;
  row.std_reduction_excluding_b0 = sample_stddev(ex);
  row.std_reduction_whole_campaign = sample_stddev(whole);
  row.mean_total_corrections /= n;
  row.mean_total_gt /= n;
  return row;
}

/// Flags the row with the highest mean reduction (first one on ties).
inline void mark_best(std::vector<ComparisonRow>& rows) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].best = false;
    if (rows[i].mean_reduction_excluding_b0 > rows[best].mean_reduction_excluding_b0) best = i;
  }
  if (!rows.empty()) rows[best].best = true;
}

inline void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out) {
  out << "detector,strategy,regime,repeats,reduction_excluding_b0_mean,reduction_excluding_b0_std,"
         "reduction_whole_campaign_mean,reduction_whole_campaign_std,total_corrections_mean,total_gt_mean,"
         "wall_time_s,best\r\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{:.4f},{:.4f},{:.4f},{:.4f},{:.2f},{:.2f},{:.3f},{}\r\n", csv_field(r.detector),
                       to_string(r.strategy), to_string(r.regime), r.repeats, r.mean_reduction_excluding_b0,
                       r.std_reduction_excluding_b0, r.mean_reduction_whole_campaign, r.std_reduction_whole_campaign,
                       r.mean_total_corrections, r.mean_total_gt, r.wall_seconds, r.best ? 1 : 0);
  }
}

inline std::string format_comparison_table(const std::vector<ComparisonRow>& rows) {
  std::string s = fmt::format("{:<12} {:<10} {:<11} {:>7} {:>18} {:>18} {:>12} {:>10}\n", "detector", "strategy",
                              "regime", "repeats", "reduction(ex B0)", "reduction(whole)", "corrections", "gt");
  for (const auto& r : rows) {
    s += fmt::format("{:<12} {:<10} {:<11} {:>7} {:>11.2f}±{:<6.2f} {:>11.2f}±{:<6.2f} {:>12.1f} {:>10.1f}{}\n",
                     r.detector, to_string(r.strategy), to_string(r.regime), r.repeats, r.mean_reduction_excluding_b0,
                     r.std_reduction_excluding_b0, r.mean_reduction_whole_campaign, r.std_reduction_whole_campaign,
                     r.mean_total_corrections, r.mean_total_gt, r.best ? "  *best" : "");
  }
  return s;
}

}  // namespace annoloop
