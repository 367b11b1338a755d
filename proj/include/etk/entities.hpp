#pragma once

// Candidates, donors, transplant centers and their tabular loaders.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "etk/date.hpp"
#include "etk/hla.hpp"
#include "etk/table.hpp"

namespace etk {

enum class BloodGroup : std::uint8_t { A, B, AB, O };
inline constexpr std::size_t kNumBloodGroups = 4;

BloodGroup parse_blood_group(std::string_view text);
std::string_view to_string(BloodGroup bg);

/// Waiting-list urgency status. Only T and HU are active for allocation.
enum class Urgency : std::uint8_t { T, NT, HU, I, R, D, FU };

Urgency parse_urgency(std::string_view text);
std::string_view to_string(Urgency u);
inline bool is_active(Urgency u) { return u == Urgency::T || u == Urgency::HU; }
inline bool is_terminal(Urgency u) {
  return u == Urgency::R || u == Urgency::D || u == Urgency::FU;
}

enum class Program : std::uint8_t { ETKAS, ESP };
std::string_view to_string(Program p);

/// German candidates aged 65+ choose between ETKAS and ESP.
enum class GermanChoice : std::uint8_t { None, ETKAS, ESP };
GermanChoice parse_german_choice(std::string_view text);

/// Donor characteristics a center may refuse on behalf of a candidate.
struct AllocationProfile {
  int min_donor_age = 0;
  int max_donor_age = 200;
  bool accept_dcd = true;
  bool accept_hcv = true;
  bool accept_hbv = true;
  bool accept_extended = true;

  /// "min=10;max=50;dcd=0;hcv=1;hbv=1;ext=0"; omitted keys keep their default.
  static AllocationProfile parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;
  bool operator==(const AllocationProfile&) const = default;
};

/// One disallowed (mmA, mmB, mmDR) pattern; -1 is a wildcard.
struct MismatchPattern {
  std::int8_t a = -1;
  std::int8_t b = -1;
  std::int8_t dr = -1;

  [[nodiscard]] bool matches(const MismatchCount& mm) const {
    return (a < 0 || a == mm.a()) && (b < 0 || b == mm.b()) && (dr < 0 || dr == mm.dr());
  }
  bool operator==(const MismatchPattern&) const = default;
};

/// Space or ';' separated patterns, each either a three-character code
/// ("**2", "2*1") or a shorthand like "2DR", "2B", "2A".
std::vector<MismatchPattern> parse_mismatch_criteria(std::string_view text);
std::string to_string(const std::vector<MismatchPattern>& criteria);

struct Center {
  std::string code;
  std::string country;
  std::string region;
  std::string esp_subregion;
};

class CenterRegistry {
 public:
  /// Columns: center, country, region, esp_subregion (blank = region).
  static CenterRegistry from_table(const Table& table);
  static CenterRegistry load(const std::filesystem::path& path);

  int add(Center c);
  [[nodiscard]] int index(std::string_view code) const;  // throws InputError
  [[nodiscard]] std::optional<int> find(std::string_view code) const;
  [[nodiscard]] const Center& at(int i) const { return centers_.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] std::size_t size() const { return centers_.size(); }
  [[nodiscard]] std::vector<std::string> countries() const;

 private:
  std::vector<Center> centers_;
  std::unordered_map<std::string, int> index_;
};

enum class UpdateType : std::uint8_t {
  Status,
  Profile,
  Unacceptable,
  Screening,
  Dialysis,
  EspChoice,
  Am,
  MmCriteria,
  Kaoo,
};

UpdateType parse_update_type(std::string_view text);
std::string_view to_string(UpdateType t);

struct StatusUpdate {
  Date date;
  UpdateType type = UpdateType::Status;
  std::string value;
};

/// A waiting-list registration: static attributes plus the dynamic state that
/// status updates mutate.
struct Candidate {
  std::string id;
  std::string patient_id;
  int center = 0;
  BloodGroup blood_group = BloodGroup::O;
  Date dob;
  HlaTyping hla;
  Date registration;
  bool prior_tx = false;
  std::optional<Date> previous_tx;
  bool synthetic = false;
  std::optional<double> mmp_override;  // fixes the MMP instead of computing it

  // Dynamic state.
  bool listed = false;
  Urgency status = Urgency::T;
  UnacceptableSet unacceptables;
  AllocationProfile profile;
  std::vector<MismatchPattern> mm_criteria;
  std::optional<Date> dialysis_start;
  std::optional<Date> last_screening;
  bool am = false;
  GermanChoice esp_choice = GermanChoice::None;
  bool esp_opt_in = false;
  bool kaoo = false;

  // Derived from the dynamic state; refreshed whenever unacceptables change.
  double vpra = 0.0;
  double mmp = 0.0;
  double hmpp = 0.0;

  std::vector<StatusUpdate> updates;  // sorted by date, applied in order
  std::size_t next_update = 0;

  [[nodiscard]] int age_at(Date d) const { return age_in_years(dob, d); }
  [[nodiscard]] int dialysis_days(Date now) const {
    if (!dialysis_start) return 0;
    return std::max(0, now - *dialysis_start);
  }
};

struct Donor {
  std::string id;
  Date date;
  int age = 0;
  BloodGroup blood_group = BloodGroup::O;
  HlaTyping hla;
  int center = 0;
  std::string death_cause;
  bool dcd = false;
  double creatinine = 1.0;
  bool diabetes = false;
  bool smoking = false;
  bool proteinuria = false;
  bool hypertension = false;
  bool malignancy = false;
  bool extended_criteria = false;
  bool hcv = false;
  bool hbv = false;
  int kidneys = 2;
};

/// Loads registrations (one row each). Unknown antigens or centers raise
/// InputError with the row's location.
std::vector<Candidate> load_candidates(const Table& table, const HlaDictionary& dict,
                                       const CenterRegistry& centers);
/// Attaches status updates (candidate_id, date, type, value) to candidates and
/// sorts each stream by date.
void attach_status_updates(const Table& table, std::vector<Candidate>& candidates,
                           const HlaDictionary& dict);
std::vector<Donor> load_donors(const Table& table, const HlaDictionary& dict,
                               const CenterRegistry& centers);

/// Writes tables in the layout the loaders read back.
void write_candidates(std::ostream& out, const std::vector<Candidate>& candidates,
                      const HlaDictionary& dict, const CenterRegistry& centers);
void write_status_updates(std::ostream& out, const std::vector<Candidate>& candidates);
void write_donors(std::ostream& out, const std::vector<Donor>& donors, const HlaDictionary& dict,
                  const CenterRegistry& centers);

/// Applies one update to the candidate's dynamic state. Derived fields (vPRA,
/// MMP) are not refreshed here.
void apply_update(Candidate& c, const StatusUpdate& u, const HlaDictionary& dict);

}  // namespace etk
