#pragma once

// Post-transplant outcomes: failure times, re-listing times, synthetic
// re-registrations and de-novo immunization.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etk/entities.hpp"
#include "etk/hla.hpp"
#include "etk/rng.hpp"
#include "etk/table.hpp"

namespace etk {

using Covariates = std::map<std::string, double, std::less<>>;

/// Weibull model with scale lambda = beta' x (days) and per-country shape k:
/// S(t | x) = exp(-(t / lambda)^k).
class WeibullModel {
 public:
  WeibullModel() = default;
  WeibullModel(std::vector<std::pair<std::string, double>> terms, std::map<std::string, double> shapes)
      : terms_(std::move(terms)), shapes_(std::move(shapes)) {}

  /// Coefficients (feature, coef; `intercept` allowed) and shapes (country, shape;
  /// `*` is the fallback).
  static WeibullModel from_tables(const Table& coefficients, const Table& shapes);
  static WeibullModel load(const std::filesystem::path& coefficients,
                           const std::filesystem::path& shapes);

  /// Throws std::invalid_argument for a missing covariate.
  [[nodiscard]] double scale(const Covariates& x) const;
  /// Throws std::invalid_argument when no shape covers the country.
  [[nodiscard]] double shape(const std::string& country) const;

 private:
  std::vector<std::pair<std::string, double>> terms_;
  std::map<std::string, double> shapes_;
};

/// t = scale * (-log u)^(1/shape). Throws std::invalid_argument when scale or
/// shape is not positive.
double sample_failure_time(double scale, double shape, double u);
double weibull_survival(double t, double scale, double shape);

inline constexpr std::array<std::string_view, 5> kTimeBuckets = {"<180d", "180d-1y", "1y-2y",
                                                                 "2y-5y", ">=5y"};
inline constexpr std::array<std::string_view, 9> kAgeBuckets = {
    "0-17", "18-39", "40-49", "50-54", "55-59", "60-64", "65-69", "70-74", "75+"};

int time_bucket(double t_days);
int age_bucket(int age);

/// Kaplan-Meier curves of R/T, stratified by time-to-event and age buckets.
class RelistCurveSet {
 public:
  struct Point {
    double s;
    double survival;
  };

  /// Columns: t_bucket, age_bucket, s, survival (labels as in kTimeBuckets /
  /// kAgeBuckets).
  static RelistCurveSet from_table(const Table& table);
  static RelistCurveSet load(const std::filesystem::path& path);

  /// Validates the curve: s in [0,1) increasing, survival non-increasing in [0,1].
  void set(int t_bucket, int age_bucket, std::vector<Point> curve);
  /// Throws std::invalid_argument for a missing stratum.
  [[nodiscard]] const std::vector<Point>& curve(int t_bucket, int age_bucket) const;

 private:
  std::map<std::pair<int, int>, std::vector<Point>> curves_;
};

/// Fraction s at which 1 - S(s) first reaches u, or none when the curve's
/// plateau stays above 1 - u.
std::optional<double> relist_fraction(const std::vector<RelistCurveSet::Point>& curve, double u);

/// Time to re-listing r = s * t, or none for death without re-listing.
std::optional<double> sample_relist_time(double t, int age, const RelistCurveSet& curves, double u);

struct RelistEntry {
  std::string id;
  std::string country;
  int age = 0;
  int dialysis_days = 0;
  double r = 0;
  double t = 0;
  std::vector<std::pair<int, Urgency>> statuses;  // (days after re-listing, status)

  [[nodiscard]] bool within_year() const { return r < 365.0; }
};

class RelistingPool {
 public:
  RelistingPool() = default;
  explicit RelistingPool(std::vector<RelistEntry> entries);

  /// Columns: id, country, age, dialysis_days, r, t, statuses ("0:T;120:NT;900:D").
  static RelistingPool from_table(const Table& table);
  static RelistingPool load(const std::filesystem::path& path);

  [[nodiscard]] const std::vector<RelistEntry>& entries() const { return entries_; }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] double sd_r() const { return sd_r_; }
  [[nodiscard]] double sd_t() const { return sd_t_; }

 private:
  std::vector<RelistEntry> entries_;
  double sd_r_ = 1.0;
  double sd_t_ = 1.0;
};

/// Each donor antigen mismatched with the candidate is added with probability p.
std::vector<AntigenId> simulate_de_novo_immunization(const HlaDictionary& dict,
                                                     const HlaTyping& donor,
                                                     const HlaTyping& candidate, double p,
                                                     Rng& rng);

struct RelistQuery {
  std::string country;
  int age = 0;  // at re-listing
  int dialysis_days = 0;
  double r = 0;
  double t = 0;
};

struct Calipers {
  double age_years = 20;
  double r_days = 730;
  double t_days = 365;
  double dialysis_days = 3 * 365.25;
  std::size_t min_matches = 5;
  std::size_t nearest = 5;
};

/// Indices of in-caliper pool entries, relaxing country then the within-year
/// flag while fewer than `min_matches` qualify.
std::vector<std::size_t> relist_candidates(const RelistQuery& q, const RelistingPool& pool,
                                           const Calipers& cal = {});

/// Up to `nearest` indices from `matches`, closest first by Mahalanobis
/// distance on (r, t) with the match-set covariance; Euclidean on
/// pool-standardized (r, t) when fewer than two matches or the covariance is
/// singular.
std::vector<std::size_t> nearest_relistings(const RelistQuery& q, const RelistingPool& pool,
                                            const std::vector<std::size_t>& matches,
                                            std::size_t nearest = 5);

struct SyntheticRelisting {
  std::optional<Candidate> candidate;
  std::string match_id;
  std::string note;  // reason when no re-listing was created
};

/// Combines the recipient's static attributes with the urgency statuses of
/// one of the five nearest pool entries. `additions` are de-novo unacceptables.
SyntheticRelisting build_synthetic_relisting(const Candidate& recipient, Date transplant_date,
                                             double t, double r, const RelistingPool& pool,
                                             const std::vector<AntigenId>& additions, Rng& rng,
                                             const std::string& new_id,
                                             const std::string& country,
                                             const Calipers& cal = {});

}  // namespace etk
