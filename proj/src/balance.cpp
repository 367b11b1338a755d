#include "etk/balance.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace etk {

DonorAgeGroup donor_age_group(int donor_age) {
  if (donor_age < 18) return DonorAgeGroup::Pediatric;
  if (donor_age < 50) return DonorAgeGroup::Adult;
  if (donor_age < 65) return DonorAgeGroup::Older;
  return DonorAgeGroup::Senior;
}

std::string_view to_string(DonorAgeGroup g) {
  switch (g) {
    case DonorAgeGroup::Pediatric: return "0-17";
    case DonorAgeGroup::Adult: return "18-49";
    case DonorAgeGroup::Older: return "50-64";
    case DonorAgeGroup::Senior: return "65+";
  }
  return "?";
}

std::vector<BalanceEvent> load_balance_events(const Table& table) {
  table.require_columns({"date", "donor_country", "recipient_country", "donor_age"});
  std::vector<BalanceEvent> out;
  for (const auto& row : table.rows()) {
    try {
      BalanceEvent e;
      e.date = Date::parse(row.at("date"));
      e.donor_country = row.at("donor_country");
      e.recipient_country = row.at("recipient_country");
      e.donor_age = static_cast<int>(row.integer("donor_age"));
      e.program = row.opt("program").value_or("ETKAS");
      e.donor_region = row.opt("donor_region").value_or("");
      e.recipient_region = row.opt("recipient_region").value_or("");
      if (e.donor_age < 0) throw std::invalid_argument("negative donor age");
      out.push_back(std::move(e));
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& ex) {
      throw row.error(ex.what());
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const BalanceEvent& a, const BalanceEvent& b) { return a.date < b.date; });
  return out;
}

BalanceLedger::BalanceLedger(std::vector<std::string> countries) : countries_(std::move(countries)) {
  for (const auto& c : countries_) national_[c] = {};
}

void BalanceLedger::record_transfer(const BalanceEvent& e) {
  const auto g = static_cast<std::size_t>(donor_age_group(e.donor_age));
  auto donor = national_.find(e.donor_country);
  auto recipient = national_.find(e.recipient_country);
  if (donor == national_.end()) {
    throw std::invalid_argument("unknown country '" + e.donor_country + "'");
  }
  if (recipient == national_.end()) {
    throw std::invalid_argument("unknown country '" + e.recipient_country + "'");
  }
  if (e.donor_country != e.recipient_country) {
    donor->second[g] += 1;
    recipient->second[g] -= 1;
  }
  const bool donor_at = e.donor_country == kAustria && !e.donor_region.empty();
  const bool recipient_at = e.recipient_country == kAustria && !e.recipient_region.empty();
  if (donor_at && recipient_at && e.donor_region == e.recipient_region) return;
  if (donor_at) regional_[e.donor_region][g] += 1;
  if (recipient_at) regional_[e.recipient_region][g] -= 1;
}

int BalanceLedger::net_export(const std::string& country, DonorAgeGroup g) const {
  const auto it = national_.find(country);
  if (it == national_.end()) throw std::invalid_argument("unknown country '" + country + "'");
  return it->second[static_cast<std::size_t>(g)];
}

int BalanceLedger::regional_export(const std::string& region, DonorAgeGroup g) const {
  const auto it = regional_.find(region);
  return it == regional_.end() ? 0 : it->second[static_cast<std::size_t>(g)];
}

long BalanceLedger::country_sum(DonorAgeGroup g) const {
  long s = 0;
  for (const auto& [c, v] : national_) s += v[static_cast<std::size_t>(g)];
  return s;
}

double BalanceLedger::balance_points(const std::string& country, int donor_age,
                                     double weight) const {
  const auto g = donor_age_group(donor_age);
  int lowest = std::numeric_limits<int>::max();
  for (const auto& [c, v] : national_) lowest = std::min(lowest, v[static_cast<std::size_t>(g)]);
  return static_cast<double>(net_export(country, g) - lowest) * weight;
}

BalanceLedger init_ledger(const std::vector<BalanceEvent>& history, Date start,
                          std::vector<std::string> countries) {
  BalanceLedger ledger(std::move(countries));
  for (const auto& e : history) {
    if (e.date <= start) ledger.record_transfer(e);
  }
  return ledger;
}

}  // namespace etk
