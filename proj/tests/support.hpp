#pragma once

// Shared helpers for the unit tests and the acceptance binary.

#include <filesystem>
#include <string>
#include <vector>

#include "etk/balance.hpp"
#include "etk/entities.hpp"
#include "etk/hla.hpp"
#include "etk/match_list.hpp"
#include "etk/policy.hpp"

namespace etk::testing {

inline std::filesystem::path source_dir() { return ETK_SOURCE_DIR; }
inline std::filesystem::path fixture_dir(const std::string& name) {
  return source_dir() / "tests" / "fixtures" / name;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::path(ETK_BINARY_DIR) / "scratch" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// A single donor and the candidates of one of the example match lists.
struct ListFixture {
  HlaDictionary dict;
  CenterRegistry centers;
  std::vector<Candidate> candidates;
  std::vector<Donor> donors;
  BalanceLedger ledger;
  PolicyConfig policy;

  explicit ListFixture(const std::string& name) {
    const auto dir = fixture_dir(name);
    dict = HlaDictionary::load(dir / "antigens.csv");
    centers = CenterRegistry::load(dir / "centers.csv");
    candidates = load_candidates(Table::read(dir / "candidates.csv"), dict, centers);
    donors = load_donors(Table::read(dir / "donors.csv"), dict, centers);
    if (std::filesystem::exists(dir / "policy.json")) policy = load_policy(dir / "policy.json");
    ledger = BalanceLedger(policy.members);
    if (std::filesystem::exists(dir / "balance.csv")) {
      ledger = init_ledger(load_balance_events(Table::read(dir / "balance.csv")), now(),
                           policy.members);
    }
    for (auto& c : candidates) {
      c.listed = true;
      refresh_derived(c, HlaResources{&dict, nullptr, nullptr}, policy);
    }
  }

  [[nodiscard]] const Donor& donor() const { return donors.front(); }
  [[nodiscard]] Date now() const { return donors.front().date; }
  [[nodiscard]] MatchContext context() const { return {dict, centers, ledger, policy}; }
  [[nodiscard]] MatchList build(Program p) const {
    return build_match_list(donor(), candidates, now(), context(), p);
  }
  [[nodiscard]] const Candidate& candidate(const MatchRecord& r) const {
    return candidates[static_cast<std::size_t>(r.candidate)];
  }
};

/// One printed row of the first example list.
struct PrintedRow {
  const char* id;
  const char* mm;
  int total;
  int dialysis;
  int hla;
  int pediatric;
  int balance;
  int distance;
  int mmp;
};

inline const std::vector<PrintedRow>& printed_etkas_rows() {
  static const std::vector<PrintedRow> rows = {
      {"R01", "000", 722, 298, 400, 0, 0, 0, 24},      {"R02", "111", 1343, 249, 400, 100, 550, 0, 44},
      {"R03", "111", 1300, 155, 200, 0, 550, 300, 95}, {"R04", "111", 1219, 100, 200, 0, 550, 300, 69},
      {"R05", "202", 1156, 90, 133, 0, 550, 300, 83},  {"R06", "001", 1147, 0, 667, 100, 370, 0, 10},
      {"R07", "101", 1143, 7, 267, 0, 550, 300, 19},   {"R08", "102", 1130, 0, 200, 0, 550, 300, 80},
      {"R09", "101", 1113, 172, 267, 0, 550, 100, 24}, {"R10", "111", 1097, 5, 200, 0, 550, 300, 42},
      {"R11", "111", 1066, 0, 200, 0, 550, 300, 16},   {"R12", "110", 1059, 60, 267, 0, 550, 100, 82},
      {"R13", "202", 1053, 24, 133, 0, 550, 300, 46},  {"R14", "110", 1049, 47, 267, 0, 550, 100, 85},
  };
  return rows;
}

/// Dialysis days of the second example list, in printed order.
inline const std::vector<int>& printed_esp_days() {
  static const std::vector<int> days = {1143, 964, 890, 871, 867, 855, 715, 714, 596, 423, 419};
  return days;
}

}  // namespace etk::testing
