#pragma once

// Offer simulation: maximum-offer sampling, center- and patient-level
// acceptance, non-standard fallback and dual kidney decisions.

#include <array>
#include <climits>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etk/match_list.hpp"
#include "etk/rng.hpp"
#include "etk/table.hpp"

namespace etk {

enum class Feature : std::uint8_t {
  DonorAge,
  DonorAge65Plus,
  DonorDcd,
  DonorCreatinine,
  DonorDiabetes,
  DonorHypertension,
  DonorSmoking,
  DonorMalignancy,
  DonorProteinuria,
  DonorExtended,
  DonorDeathCva,
  Esp,
  Rescue,
  GeoRegional,  // local or regional
  GeoNational,
  GeoInternational,
  CandidateAge,
  CandidatePediatric,
  CandidateHu,
  CandidateVpra,
  DialysisYears,
  PriorTx,
  MmTotal,
  MmA,
  MmB,
  MmDr,
  ZeroMm,
  AgeDiff,     // candidate minus donor age
  AbsAgeDiff,
  LogRank,
  Count,
};
inline constexpr std::size_t kNumFeatures = static_cast<std::size_t>(Feature::Count);

std::string_view feature_name(Feature f);
std::optional<Feature> parse_feature(std::string_view name);

/// Feature values plus a record of which ones were set.
class FeatureVector {
 public:
  void set(Feature f, double v) {
    values_[static_cast<std::size_t>(f)] = v;
    present_ |= std::uint64_t{1} << static_cast<unsigned>(f);
  }
  [[nodiscard]] bool has(Feature f) const {
    return (present_ >> static_cast<unsigned>(f)) & 1U;
  }
  [[nodiscard]] double get(Feature f) const { return values_[static_cast<std::size_t>(f)]; }

 private:
  std::array<double, kNumFeatures> values_{};
  std::uint64_t present_ = 0;
};

/// Intercept plus named coefficients bound to features at load time.
class LogisticModel {
 public:
  LogisticModel() = default;
  LogisticModel(std::string id, double intercept, std::vector<std::pair<Feature, double>> terms)
      : id_(std::move(id)), intercept_(intercept), terms_(std::move(terms)) {}

  /// Columns: feature, coef. The `intercept` row is the intercept; the
  /// metadata line may carry model_id.
  static LogisticModel from_table(const Table& table);
  static LogisticModel load(const std::filesystem::path& path);

  /// Throws std::invalid_argument naming the first feature that is not set.
  [[nodiscard]] double linear_predictor(const FeatureVector& x) const;
  [[nodiscard]] double predict(const FeatureVector& x) const;
  [[nodiscard]] const std::string& id() const { return id_; }
  [[nodiscard]] const std::vector<std::pair<Feature, double>>& terms() const { return terms_; }
  [[nodiscard]] double intercept() const { return intercept_; }

 private:
  std::string id_;
  double intercept_ = 0.0;
  std::vector<std::pair<Feature, double>> terms_;
};

double sigmoid(double lp);

/// Returned when the survival curve never falls to the drawn level.
inline constexpr int kNoOfferLimit = INT_MAX;

/// Stratified Cox model for the number of offers made before switching to
/// non-standard allocation.
class CoxSampler {
 public:
  struct Step {
    int k;
    double s0;
  };

  /// Coefficients (feature, coef) and baseline (stratum, k, S0) tables.
  static CoxSampler from_tables(const Table& coefficients, const Table& baseline);
  static CoxSampler load(const std::filesystem::path& coefficients,
                         const std::filesystem::path& baseline);

  void add_stratum(const std::string& name, std::vector<Step> steps);
  void set_terms(std::vector<std::pair<Feature, double>> terms) { terms_ = std::move(terms); }

  [[nodiscard]] double linear_predictor(const FeatureVector& x) const;
  /// Smallest k with S0(k)^exp(lp) <= u, or kNoOfferLimit. Throws
  /// std::invalid_argument for an unknown stratum.
  [[nodiscard]] int sample(const std::string& stratum, double lp, double u) const;
  [[nodiscard]] const std::vector<Step>& baseline(const std::string& stratum) const;
  /// "ETKAS:<country>" with fallback "ETKAS:*", or "ESP".
  [[nodiscard]] std::string stratum_for(Program p, const std::string& donor_country) const;

 private:
  std::map<std::string, std::vector<Step>> strata_;
  std::vector<std::pair<Feature, double>> terms_;
};

struct OfferModels {
  CoxSampler max_offers;
  LogisticModel center_etkas;
  LogisticModel center_esp;
  LogisticModel patient_etkas;
  LogisticModel patient_esp;
  LogisticModel dual;
};

/// Fixed probabilities replacing model predictions in acceptance draws.
struct ProbabilityOverrides {
  std::optional<double> center;
  std::optional<double> patient;
  std::optional<double> dual;
};

enum class UnplacedMode : std::uint8_t { Discard, ForceAccept };
UnplacedMode parse_unplaced_mode(std::string_view text);

enum class Mechanism : std::uint8_t { Standard, NonStandard, Forced };
std::string_view to_string(Mechanism m);

enum class Decision : std::uint8_t { Accept, Decline, CenterDecline };
std::string_view to_string(Decision d);

struct Acceptance {
  int candidate = -1;
  int rank = 0;  // position on the unfiltered list, 1-based
  int kidneys = 1;
  Mechanism mechanism = Mechanism::Standard;
  bool dual = false;
};

struct OfferEntry {
  int candidate = -1;
  Decision decision = Decision::Decline;
  Mechanism stage = Mechanism::Standard;
  double probability = 0.0;
};

struct AllocationOutcome {
  std::vector<Acceptance> accepted;
  int unplaced = 0;
  int k_max = 0;
  int declines = 0;
  std::vector<OfferEntry> trace;

  [[nodiscard]] int kidneys_accepted() const;
};

FeatureVector donor_features(const Donor& d, Program p);
FeatureVector offer_features(const Donor& d, const Candidate& c, const MatchRecord& rec, int rank,
                             Program p, bool rescue, Date now);

int sample_max_offers(const Donor& d, Program p, const std::string& donor_country,
                      const CoxSampler& sampler, double u);

struct AllocationInputs {
  const MatchList& list;
  const Donor& donor;
  std::span<const Candidate> candidates;
  const CenterRegistry& centers;
  const OfferModels& models;
  const RandomStreams& streams;
  Date now;
  UnplacedMode unplaced = UnplacedMode::Discard;
  ProbabilityOverrides overrides{};
};

/// Offers the donor's kidneys down the filtered list until K_max declines or
/// the list runs out, then falls back to a vicinity-ordered non-standard phase
/// that includes filtered-out candidates.
AllocationOutcome run_allocation(const AllocationInputs& in, int k_max);

/// Bernoulli draw from the dual-transplant model or override.
bool simulate_dual(const FeatureVector& x, const LogisticModel& model, double u,
                   std::optional<double> override_p = std::nullopt);

}  // namespace etk
