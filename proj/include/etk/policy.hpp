#pragma once

// Allocation policy parameters. Loaded from a JSON document; omitted fields
// take the current-policy defaults and unknown keys are rejected.

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "etk/entities.hpp"
#include "etk/hla.hpp"

namespace etk {

/// Geographic relation between a candidate's center and the donor.
enum class Geography : std::uint8_t { Local, Regional, National, International };
std::string_view to_string(Geography g);

/// Levels usable in ESP tier tables, from narrowest to widest.
enum class GeoLevel : std::uint8_t { Center, EspSubregion, Region, National, International };
GeoLevel parse_geo_level(std::string_view text);
std::string_view to_string(GeoLevel l);

struct DistancePoints {
  double local = 300;
  double regional = 200;
  double national = 100;

  [[nodiscard]] double for_geography(Geography g) const;
};

enum class PleqSource : std::uint8_t { Analytic, Empirical };

struct PolicyConfig {
  std::string name = "current";

  // HLA
  double hla_base = 400.0;
  std::array<double, 3> hla_mismatch_points = {-400.0 / 6, -400.0 / 6, -400.0 / 6};  // A, B, DR
  bool pediatric_hla_double = true;

  double dialysis_points_per_year = 33.33;
  int pediatric_age = 18;  // candidate and donor are pediatric below this age
  double pediatric_bonus = 100.0;
  bool pediatric_tier = true;
  double hu_points = 500.0;

  // Mismatch probability
  double mmp_weight = 100.0;
  PleqSource mmp_source = PleqSource::Analytic;
  bool use_hmpp = false;
  bool hmpp_exclude_unacceptable = false;
  std::array<double, kNumBloodGroups> blood_group_frequency = {0.43, 0.12, 0.05, 0.40};

  // vPRA sliding scale
  bool sliding_scale = false;
  double sliding_weight = 133.0;
  double sliding_base = 5.0;

  // Age filter: (candidate age - donor age, fraction) breakpoints, ascending.
  bool age_filter = false;
  std::vector<std::pair<double, double>> age_filter_curve = {{-200, 1.0}, {200, 1.0}};

  // Balance
  double balance_weight = 30.0;
  std::map<std::string, double> balance_country_weight;

  // Distance, keyed by donor country
  DistancePoints distance_default;
  std::map<std::string, DistancePoints> distance_country = {
      {"BE", DistancePoints{300, 300, 100}}};

  // Eligibility and filtering
  int screening_max_days = 180;
  bool filter_profile = true;
  bool filter_mm_criteria = true;

  // ESP
  int esp_donor_min_age = 65;
  int esp_candidate_min_age = 65;
  bool esp_hu_subtier = true;
  bool esp_kaoo_subtier = true;
  std::vector<GeoLevel> esp_tiers_default = {GeoLevel::Region, GeoLevel::National,
                                             GeoLevel::International};
  std::map<std::string, std::vector<GeoLevel>> esp_tiers_country = {
      {"DE",
       {GeoLevel::EspSubregion, GeoLevel::Region, GeoLevel::National, GeoLevel::International}},
      {"NL", {GeoLevel::National, GeoLevel::International}},
  };

  std::vector<std::string> members = {"AT", "BE", "HR", "DE", "HU", "NL", "SI", "LU"};

  [[nodiscard]] double balance_weight_for(const std::string& country) const;
  [[nodiscard]] const DistancePoints& distance_for(const std::string& donor_country) const;
  [[nodiscard]] const std::vector<GeoLevel>& esp_tiers_for(const std::string& donor_country) const;
};

/// Parses a policy document; starts from defaults. Throws InputError naming
/// the offending key.
PolicyConfig parse_policy(const std::string& json_text, const std::string& source = "policy");
PolicyConfig load_policy(const std::filesystem::path& path);
/// Full policy as JSON, readable by parse_policy.
std::string policy_to_json(const PolicyConfig& cfg);

/// Empty when valid; otherwise one message per violated rule.
std::vector<std::string> validate(const PolicyConfig& cfg);

/// beta * (b^vpra - 1) / (b - 1). Throws std::invalid_argument when b <= 1.
double sliding_scale_points(double vpra, double weight, double base);
double sliding_scale_points(double vpra, const PolicyConfig& cfg);

/// Piecewise-linear interpolation of the curve at (candidate - donor age),
/// held constant beyond the end points. 1 when the filter is disabled.
double age_filter_fraction(double candidate_age, double donor_age, const PolicyConfig& cfg);
double interpolate_curve(const std::vector<std::pair<double, double>>& curve, double x);

}  // namespace etk
