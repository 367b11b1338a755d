#pragma once

// ETKAS and ESP match lists: eligibility, filtering, tiers and points.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "etk/balance.hpp"
#include "etk/entities.hpp"
#include "etk/hla.hpp"
#include "etk/policy.hpp"

namespace etk {

/// Reason codes for failed eligibility clauses; combined as a bitmask.
enum Reason : std::uint32_t {
  kEligible = 0,
  kBloodGroup = 1u << 0,
  kStatusInactive = 1u << 1,
  kHlaUnknown = 1u << 2,
  kUnacceptable = 1u << 3,
  kScreeningStale = 1u << 4,
  kGermanEspChoice = 1u << 5,
  kAmActive = 1u << 6,
  kEspAge = 1u << 7,
  kDonorHlaUnknown = 1u << 8,
  kNotListed = 1u << 9,
};

std::string describe_reasons(std::uint32_t reasons);

struct Eligibility {
  std::uint32_t reasons = kEligible;
  [[nodiscard]] bool ok() const { return reasons == kEligible; }
  [[nodiscard]] bool has(Reason r) const { return (reasons & r) != 0; }
};

/// Everything besides the candidate and donor that ranking depends on.
struct MatchContext {
  const HlaDictionary& dict;
  const CenterRegistry& centers;
  const BalanceLedger& ledger;
  const PolicyConfig& policy;
};

/// Inputs used to refresh a candidate's vPRA, MMP and HMPP.
struct HlaResources {
  const HlaDictionary* dict = nullptr;
  const DonorPanel* panel = nullptr;
  const FrequencyTable* frequencies = nullptr;
};

/// Recomputes vPRA, MMP and HMPP from the candidate's current unacceptables.
void refresh_derived(Candidate& c, const HlaResources& hla, const PolicyConfig& cfg);

Geography geography(const CenterRegistry& centers, int candidate_center, int donor_center);
Program program_for(const Donor& d, const PolicyConfig& cfg);

Eligibility etkas_eligible(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx);
/// True when the donor passes the candidate's profile and mismatch criteria
/// (the record stays visible on the filtered list).
bool etkas_filtered(const Candidate& c, const Donor& d, const MismatchCount& mm,
                    const MatchContext& ctx);
bool profile_accepts(const AllocationProfile& p, const Donor& d);

/// Ordered tier key; larger sorts first.
struct TierKey {
  int major = 0;
  int minor = 0;
  auto operator<=>(const TierKey&) const = default;
};

/// ETKAS tiers: 3 = zero mismatch (minor = candidate homozygosity level when
/// the donor is fully homozygous), 2 = pediatric donor to pediatric candidate,
/// 1 = everyone else.
TierKey etkas_tier(const Candidate& c, const Donor& d, const MismatchCount& mm, Date now,
                   const PolicyConfig& cfg);

struct PointBreakdown {
  double dialysis = 0;
  double hla = 0;
  double pediatric = 0;
  double hu = 0;
  double mmp = 0;  // MMP or HMPP points
  double vpra = 0;  // sliding-scale points
  double balance = 0;
  double distance = 0;

  [[nodiscard]] double sum() const {
    return dialysis + hla + pediatric + hu + mmp + vpra + balance + distance;
  }
};

struct EtkasPoints {
  PointBreakdown parts;
  double age_fraction = 1.0;
  double total = 0.0;  // age_fraction * parts.sum()
};

EtkasPoints etkas_points(const Candidate& c, const Donor& d, const MismatchCount& mm, Date now,
                         const MatchContext& ctx);

Eligibility esp_eligible(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx);
bool esp_filtered(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx);

struct EspRank {
  TierKey tier;
  int geo_level = 0;  // index into the donor country's tier list
  double points = 0;  // accrued dialysis days
};
EspRank esp_tier_and_points(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx);

struct MatchRecord {
  int candidate = -1;  // index into the candidate vector
  TierKey tier;
  PointBreakdown parts;
  double age_fraction = 1.0;
  double total = 0.0;
  std::optional<MismatchCount> mm;  // absent when the donor is untyped
  Geography geo = Geography::International;
  bool visible = true;  // passes filtering
  int austrian_key = 0;
  Date registration;
  std::string id;
};

struct MatchList {
  Program program = Program::ETKAS;
  std::vector<MatchRecord> records;  // unfiltered order

  [[nodiscard]] std::vector<const MatchRecord*> filtered() const;
};

/// Strict total order used for ranking.
bool ranks_before(const MatchRecord& a, const MatchRecord& b);

/// Builds the program's list over `pool` (indices into `candidates`), or over
/// all candidates when `pool` is empty.
MatchList build_match_list(const Donor& d, std::span<const Candidate> candidates, Date now,
                           const MatchContext& ctx, Program program,
                           std::span<const int> pool = {});

/// Writes a list in the layout of the published example lists.
void write_match_list(std::ostream& out, const MatchList& list, std::span<const Candidate> cands,
                      const Donor& d, Date now, const MatchContext& ctx, bool filtered_only);

/// Half-up rounding of MMP points to integers.
double mmp_points(double probability, double weight);

}  // namespace etk
