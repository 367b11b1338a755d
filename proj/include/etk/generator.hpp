#pragma once

// Synthetic populations: antigen tables, donor panel, centers, waiting-list
// registrations with status streams, donors, balance history, offer and
// post-transplant models, policies and a settings file.

#include <cstdint>
#include <filesystem>
#include <string>

#include "etk/date.hpp"

namespace etk {

struct GeneratorConfig {
  int registrations = 2000;  // including those listed before the window
  int donors = 600;
  Date window_start = Date::parse("2021-04-01");
  Date window_end = Date::parse("2024-01-01");
  double initial_fraction = 0.4;  // share registered before the window
  int panel_size = 10000;
  int relist_pool_size = 400;
  int balance_history_events = 120;
  std::uint64_t seed = 1;
  int runs = 20;  // seeds 1..runs go into settings.json
};

struct GeneratedCounts {
  int registrations = 0;
  int status_updates = 0;
  int donors = 0;
};

/// Writes a complete dataset under `dir` (created if needed) and returns the
/// row counts. Output depends only on the config.
GeneratedCounts generate_dataset(const GeneratorConfig& cfg, const std::filesystem::path& dir);

}  // namespace etk
