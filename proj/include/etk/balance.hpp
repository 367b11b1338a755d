#pragma once

// National kidney exchange balances, stratified by donor age group, and the
// Austrian regional sub-ledger.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etk/date.hpp"
#include "etk/table.hpp"

namespace etk {

enum class DonorAgeGroup : std::uint8_t { Pediatric, Adult, Older, Senior };  // 0-17, 18-49, 50-64, 65+
inline constexpr std::size_t kNumAgeGroups = 4;

DonorAgeGroup donor_age_group(int donor_age);
std::string_view to_string(DonorAgeGroup g);

inline constexpr std::string_view kAustria = "AT";

struct BalanceEvent {
  Date date;
  std::string donor_country;
  std::string recipient_country;
  int donor_age = 0;
  std::string program;  // AM, combined, ETKAS or ESP
  std::string donor_region;      // used for the Austrian sub-ledger only
  std::string recipient_region;  // idem
};

/// Rows: date, donor_country, recipient_country, donor_age, program, and
/// optional donor_region / recipient_region.
std::vector<BalanceEvent> load_balance_events(const Table& table);

class BalanceLedger {
 public:
  BalanceLedger() = default;
  explicit BalanceLedger(std::vector<std::string> countries);

  /// Donor country +1, recipient country -1 in the donor's age group. Austrian
  /// regions move in the sub-ledger whenever either side is Austrian. Throws
  /// std::invalid_argument for an unknown country.
  void record_transfer(const BalanceEvent& e);

  [[nodiscard]] int net_export(const std::string& country, DonorAgeGroup g) const;
  [[nodiscard]] int regional_export(const std::string& region, DonorAgeGroup g) const;
  /// Sum over member countries; stays zero for transfers between members.
  [[nodiscard]] long country_sum(DonorAgeGroup g) const;
  [[nodiscard]] const std::vector<std::string>& countries() const { return countries_; }
  [[nodiscard]] bool knows(const std::string& country) const {
    return national_.count(country) > 0;
  }

  /// (export(country) - min over countries of export) * weight, in the age
  /// group of `donor_age`.
  [[nodiscard]] double balance_points(const std::string& country, int donor_age,
                                      double weight) const;

  [[nodiscard]] const std::map<std::string, std::array<int, kNumAgeGroups>>& national() const {
    return national_;
  }
  [[nodiscard]] const std::map<std::string, std::array<int, kNumAgeGroups>>& regional() const {
    return regional_;
  }

  bool operator==(const BalanceLedger&) const = default;

 private:
  std::vector<std::string> countries_;
  std::map<std::string, std::array<int, kNumAgeGroups>> national_;
  std::map<std::string, std::array<int, kNumAgeGroups>> regional_;
};

/// Folds every event dated on or before `start` into a fresh ledger.
BalanceLedger init_ledger(const std::vector<BalanceEvent>& history, Date start,
                          std::vector<std::string> countries);

}  // namespace etk
