#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "annoloop/campaign.hpp"
#include "annoloop/random.hpp"
#include "annoloop/report.hpp"

namespace annoloop {

/// Creates a detector for a campaign run with the given master seed.
using SeededDetectorFactory = std::function<std::unique_ptr<DetectorSession>(std::uint64_t seed)>;

/// Config for one run: the master seed is stored in `seed`, the shuffle
/// seed is derive_seed(seed, "order").
inline CampaignConfig seeded_config(CampaignConfig cfg, OrderingStrategy::Kind kind, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.ordering = {kind, kind == OrderingStrategy::Kind::shuffled ? derive_seed(seed, "order") : 0};
  return cfg;
}

struct ComparisonPlan {
  std::vector<OrderingStrategy::Kind> strategies;
  std::vector<Regime> regimes;
  std::size_t repeats = 1;
  std::uint64_t base_seed = 0;
  CampaignConfig base;
};

/// Runs strategies x regimes, each `repeats` times with seeds base_seed ..
/// base_seed + repeats - 1, on up to `jobs` threads. Rows come out in
/// strategy-major order regardless of completion order. Any failing run
/// aborts the whole comparison (the first failure in plan order is rethrown).
inline std::vector<ComparisonRow> run_comparison(const Dataset& d, const ComparisonPlan& plan,
                                                 const SeededDetectorFactory& factory, std::size_t jobs = 1) {
  if (plan.repeats == 0) throw ConfigError("repeats must be positive");
  if (plan.strategies.empty() || plan.regimes.empty()) throw ConfigError("need at least one strategy and regime");

  struct Task {
    CampaignConfig cfg;
  };
  std::vector<Task> tasks;
  for (auto s : plan.strategies) {
    for (auto r : plan.regimes) {
      for (std::size_t k = 0; k < plan.repeats; ++k) {
        auto cfg = seeded_config(plan.base, s, plan.base_seed + k);
        cfg.regime = r;
        tasks.push_back({cfg});
      }
    }
  }

  std::vector<CampaignReport> reports(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size() && !failed; i = next++) {
      try {
        auto det = factory(tasks[i].cfg.seed);
        reports[i] = run_campaign(d, tasks[i].cfg, *det);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const auto n_threads = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<ComparisonRow> rows;
  for (std::size_t start = 0; start < reports.size(); start += plan.repeats) {
    rows.push_back(aggregate_cell({reports.begin() + static_cast<std::ptrdiff_t>(start),
                                   reports.begin() + static_cast<std::ptrdiff_t>(start + plan.repeats)}));
  }
  mark_best(rows);
  return rows;
}

}  // namespace annoloop
