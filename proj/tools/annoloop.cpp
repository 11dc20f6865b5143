// annoloop: dataset conversion, annotation-campaign simulation and strategy
// comparison.
//
// Exit codes: 0 success, 1 unexpected failure, 2 parse error, 3 detector or
// bridge failure, 4 invalid configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "annoloop.hpp"

namespace fs = std::filesystem;
using namespace annoloop;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kParse = 2, kDetector = 3, kConfig = 4 };

void setup_logging() {
  auto logger = spdlog::stderr_color_st("annoloop");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("ANNOLOOP_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  return out;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open dataset");
  return read_canonical(in);
}

// convert ----------------------------------------------------------------------

struct ConvertOptions {
  std::string from;
  std::string in;
  std::string dims;
  std::string drop;
  std::string out;
};

int cmd_convert(const ConvertOptions& o) {
  IngestResult result;
  if (o.from == "voc") {
    result = parse_voc(read_xml_directory(o.in));
  } else if (o.from == "coco") {
    result = parse_coco(read_file(o.in), fs::path(o.in).filename().string());
  } else {
    if (o.dims.empty()) throw ConfigError("--from openimages needs --dims <ImageID,Width,Height csv>");
    result = parse_openimages(read_file(o.in), parse_image_sizes(read_file(o.dims)), fs::path(o.in).filename().string());
  }
  for (const auto& issue : result.issues) std::cerr << "parse error: " << issue.document << ": " << issue.reason << '\n';
  for (const auto& id : result.missing_dimensions) std::cerr << "parse error: missing dimensions for image " << id << '\n';
  if (!result.ok()) return kParse;

  const auto dataset = filter_objects(result.dataset, parse_flag_list(o.drop));
  auto out = open_out(o.out);
  write_canonical(dataset, out);
  std::cout << fmt::format("{} images, {} objects, {} classes -> {}\n", dataset.images.size(), dataset.object_count(),
                           dataset.classes.size(), o.out);
  return kOk;
}

// simulate / compare -------------------------------------------------------------

struct RunOptions {
  std::string dataset;
  std::vector<std::string> orders{"shuffled"};
  std::vector<std::string> regimes{"iterative"};
  std::size_t batch_size = 50;
  double iou = 0.5;
  double conf = 0.5;
  double split = 0.1;
  std::string class_label;
  bool per_class = false;
  bool keep_distractors = false;
  std::string relabel_cost = "two";
  std::string detector = "synthetic";
  std::string cmd;
  std::string connect;
  std::string images;
  double timeout_s = 300.0;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::size_t jobs = 1;
  std::string out = "annoloop-out";
  double tau = 500.0;
  double forgetting = 1.0;
};

OrderingStrategy::Kind parse_order(const std::string& s) {
  const auto k = ordering_from_string(s);
  if (!k) throw ConfigError("unknown --order '" + s + "'");
  return *k;
}

Regime parse_regime(const std::string& s) {
  const auto r = regime_from_string(s);
  if (!r) throw ConfigError("unknown --regime '" + s + "'");
  return *r;
}

CampaignConfig base_config(const RunOptions& o) {
  CampaignConfig cfg;
  cfg.batch_size = o.batch_size;
  cfg.iou_threshold = o.iou;
  cfg.confidence_threshold = o.conf;
  cfg.first_fold_fraction = o.split;
  cfg.keep_distractors = o.keep_distractors;
  if (!o.class_label.empty()) cfg.class_scope = o.class_label;
  if (o.relabel_cost != "one" && o.relabel_cost != "two") throw ConfigError("--relabel-cost must be one or two");
  cfg.relabel_cost = o.relabel_cost == "one" ? RelabelCost::one : RelabelCost::two;
  cfg.regime = parse_regime(o.regimes.front());
  cfg = seeded_config(cfg, parse_order(o.orders.front()), o.seed);
  cfg.validate();
  return cfg;
}

SeededDetectorFactory make_factory(const RunOptions& o, const Dataset& d) {
  if (o.detector == "perfect") return [](std::uint64_t) { return std::make_unique<PerfectDetector>(); };
  if (o.detector == "null") return [](std::uint64_t) { return std::make_unique<NullDetector>(); };
  if (o.detector == "synthetic") {
    SyntheticDetectorConfig base;
    base.tau = o.tau;
    base.forgetting = o.forgetting;
    base.confidence_threshold = o.conf;
    base.vocabulary = d.classes;
    base.validate();
    return [base](std::uint64_t seed) {
      auto cfg = base;
      cfg.seed = derive_seed(seed, "detector");
      return std::make_unique<SyntheticDetector>(cfg);
    };
  }
  if (o.detector == "bridge") {
    if (o.cmd.empty() == o.connect.empty()) throw ConfigError("--detector bridge needs exactly one of --cmd, --connect");
    BridgeOptions bo;
    bo.request_timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout_s * 1000.0));
    bo.vocabulary = d.classes;
    return [o, bo](std::uint64_t) -> std::unique_ptr<DetectorSession> {
      if (!o.connect.empty()) return BridgeSession::connect(o.connect, bo);
      return BridgeSession::launch(o.cmd, o.images, bo);
    };
  }
  throw ConfigError("unknown --detector '" + o.detector + "'");
}

void write_campaign_files(const CampaignReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "report.json");
    write_report_json(r, out);
  }
  {
    auto out = open_out(dir / "batches.csv");
    write_batches_csv(r, out);
  }
  {
    auto out = open_out(dir / "curves.csv");
    write_curves_csv(r, out);
  }
  auto out = open_out(dir / "timings.json");
  write_timings_json(r, out);
}

int cmd_simulate(const RunOptions& o) {
  const auto cfg = base_config(o);
  const auto dataset = load_dataset(o.dataset);
  const auto factory = make_factory(o, dataset);
  const fs::path out_dir(o.out);

  if (o.per_class) {
    std::vector<std::string> classes = dataset.classes;
    if (cfg.class_scope) classes = {*cfg.class_scope};
    auto per_class_cfg = cfg;
    per_class_cfg.class_scope.reset();
    const auto result = run_per_class(dataset, classes, per_class_cfg, [&] { return factory(cfg.seed); });
    fs::create_directories(out_dir);
    auto table = open_out(out_dir / "per_class.csv");
    table << "class,reduction_excluding_b0,reduction_whole_campaign,total_corrections,total_gt\r\n";
    for (const auto& [label, report] : result.reports) {
      write_campaign_files(report, out_dir / label);
      auto num = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string(); };
      table << fmt::format("{},{},{},{},{}\r\n", csv_field(label), num(report.reduction_excluding_b0),
                           num(report.reduction_whole_campaign), report.total_corrections, report.total_gt);
      std::cout << fmt::format("{:<20} {}\n", label, format_reduction(report.reduction_excluding_b0));
    }
    std::cout << "average reduction: " << format_reduction(result.average_reduction) << '\n';
    return kOk;
  }

  auto det = factory(cfg.seed);
  const auto report = run_campaign(dataset, cfg, *det);
  write_campaign_files(report, out_dir);
  std::cout << summarize(report);
  if (!report.reduction_excluding_b0) spdlog::warn("campaign has no proposal batches; reduction is undefined");
  return kOk;
}

int cmd_compare(const RunOptions& o) {
  const auto cfg = base_config(o);
  const auto dataset = load_dataset(o.dataset);
  ComparisonPlan plan;
  for (const auto& s : o.orders) plan.strategies.push_back(parse_order(s));
  for (const auto& r : o.regimes) plan.regimes.push_back(parse_regime(r));
  plan.repeats = o.repeats;
  plan.base_seed = o.seed;
  plan.base = cfg;
  for (auto r : plan.regimes) {
    auto check = cfg;
    check.regime = r;
    check.validate();
  }
  const auto rows = run_comparison(dataset, plan, make_factory(o, dataset), o.jobs);
  fs::create_directories(o.out);
  auto out = open_out(fs::path(o.out) / "comparison.csv");
  write_comparison_csv(rows, out);
  std::cout << format_comparison_table(rows);
  return kOk;
}

// synth ------------------------------------------------------------------------------

int cmd_synth(const SyntheticDatasetConfig& cfg, const std::string& out_path) {
  const auto d = make_synthetic_dataset(cfg);
  auto out = open_out(out_path);
  write_canonical(d, out);
  std::cout << fmt::format("{} images, {} objects, {} classes -> {}\n", d.images.size(), d.object_count(),
                           d.classes.size(), out_path);
  return kOk;
}

void add_run_options(CLI::App* app, RunOptions& o, bool multi) {
  app->add_option("--dataset", o.dataset, "Canonical dataset (.jsonl)")->required()->check(CLI::ExistingFile);
  if (multi) {
    app->add_option("--order", o.orders, "Ordering strategies")->delimiter(',')->check(
        CLI::IsMember({"shuffled", "sorted", "original"}));
    app->add_option("--regime", o.regimes, "Training regimes")->delimiter(',')->check(
        CLI::IsMember({"iterative", "cumulative", "two-stage"}));
    app->add_option("--repeats", o.repeats, "Runs per cell (seeds seed..seed+repeats-1)")->check(CLI::PositiveNumber);
    app->add_option("--jobs", o.jobs, "Parallel campaign runs")->check(CLI::PositiveNumber);
  } else {
    app->add_option("--order", o.orders.front(), "Ordering strategy")->check(
        CLI::IsMember({"shuffled", "sorted", "original"}));
    app->add_option("--regime", o.regimes.front(), "Training regime")->check(
        CLI::IsMember({"iterative", "cumulative", "two-stage"}));
    app->add_flag("--per-class", o.per_class, "One campaign per class, averaged");
  }
  app->add_option("--batch-size", o.batch_size, "Images per batch")->check(CLI::PositiveNumber);
  app->add_option("--iou", o.iou, "IoU threshold for a correct box");
  app->add_option("--conf", o.conf, "Confidence cutoff for proposals");
  app->add_option("--split", o.split, "First-fold fraction (two-stage)");
  app->add_option("--class", o.class_label, "Annotate a single class");
  app->add_flag("--keep-distractors", o.keep_distractors, "With --class: keep other-class boxes");
  app->add_option("--relabel-cost", o.relabel_cost, "Cost of a wrong class label: one or two");
  app->add_option("--detector", o.detector, "Proposal source")->check(
      CLI::IsMember({"synthetic", "bridge", "perfect", "null"}));
  app->add_option("--cmd", o.cmd, "Adapter command line (bridge)");
  app->add_option("--connect", o.connect, "Adapter TCP address host:port (bridge)");
  app->add_option("--images", o.images, "Image directory handed to the adapter");
  app->add_option("--timeout", o.timeout_s, "Per-request adapter deadline in seconds");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--tau", o.tau, "Synthetic detector exposure scale");
  app->add_option("--forgetting", o.forgetting, "Synthetic detector per-class exposure decay");
  app->add_option("--out", o.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"annoloop: human-in-the-loop annotation campaign simulator"};
  app.require_subcommand(1);

  ConvertOptions conv;
  auto* convert = app.add_subcommand("convert", "Convert VOC / COCO / OpenImages annotations to canonical .jsonl");
  convert->add_option("--from", conv.from, "Input format")->required()->check(CLI::IsMember({"voc", "coco", "openimages"}));
  convert->add_option("--in", conv.in, "VOC directory, COCO json or OpenImages box csv")->required();
  convert->add_option("--dims", conv.dims, "OpenImages image sizes csv (ImageID,Width,Height)");
  convert->add_option("--drop", conv.drop, "Drop boxes with these flags, e.g. occluded,truncated,group");
  convert->add_option("--out", conv.out, "Output .jsonl")->required();

  RunOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run one annotation campaign");
  add_run_options(simulate, sim, false);

  RunOptions cmp;
  auto* compare = app.add_subcommand("compare", "Compare strategies x regimes over repeated seeds");
  add_run_options(compare, cmp, true);

  SyntheticDatasetConfig syn;
  std::string syn_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic canonical dataset");
  synth->add_option("--num-images", syn.num_images, "Number of images");
  synth->add_option("--seed", syn.seed, "Seed");
  synth->add_option("--mean-objects", syn.mean_objects, "Mean boxes per image");
  synth->add_option("--out", syn_out, "Output .jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*convert) return cmd_convert(conv);
    if (*simulate) return cmd_simulate(sim);
    if (*compare) return cmd_compare(cmp);
    if (*synth) return cmd_synth(syn, syn_out);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const VersionMismatch& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const DetectorError& e) {
    std::cerr << "detector error: " << e.what() << '\n';
    return kDetector;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const UnknownClass& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const EmptyCampaign& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
