#pragma once

// Run statistics, summaries across runs and policy comparisons.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "etk/engine.hpp"

namespace etk {

struct Statistic {
  std::string group;
  std::string label;
  double value = 0;
};

/// Flat, ordered statistics of one run. The order and names depend only on
/// the member list, so runs of any policy share a schema.
using RunStatistics = std::vector<Statistic>;

/// UK HLA-ABDR match quality level 1..4.
int uk_hla_level(const MismatchCount& mm);
/// "0", ">0-84.9", "85-94.9" or "95+".
std::string_view vpra_band(double vpra);
/// Candidate minus donor age, e.g. "max 5 year difference".
std::string_view age_difference_band(int candidate_age, int donor_age);
/// "B and DR", "DR", "B" or "none".
std::string_view homozygosity_class(const Homozygosity& h);

RunStatistics compute_statistics(const SimulationOutput& out,
                                 const std::vector<std::string>& countries);

struct SummaryRow {
  std::string group;
  std::string label;
  double mean = 0;
  double lower = 0;  // 2.5th percentile
  double upper = 0;  // 97.5th percentile
  std::optional<double> actual;
  bool miscalibrated = false;  // actual outside [lower, upper]
};

/// Linear-interpolation percentile (R type 7) of unsorted values, q in [0,1].
double percentile(std::vector<double> values, double q);

/// Actual-data column: CSV with columns group, label, value.
std::vector<Statistic> load_actual(const std::filesystem::path& path);

/// Throws std::invalid_argument when runs is empty or the schemas differ.
std::vector<SummaryRow> summarize(const std::vector<RunStatistics>& runs,
                                  const std::vector<Statistic>& actual = {});

struct TTest {
  double mean_difference = 0;
  double t = 0;
  double df = 0;
  double p = 1;
};

/// Paired t-test on variant - baseline. Zero variance gives p = 1 for a zero
/// mean difference and p = 0 otherwise. Throws on unequal or < 2 samples.
TTest paired_t_test(const std::vector<double>& baseline, const std::vector<double>& variant);
/// Welch's unequal-variance t-test.
TTest welch_t_test(const std::vector<double>& baseline, const std::vector<double>& variant);

/// "", "*", "**" or "***" for p below 0.05, 0.01, 0.001.
std::string_view significance_stars(double p);

struct DeltaRow {
  std::string group;
  std::string label;
  double baseline = 0;  // mean
  double variant = 0;
  TTest test;
};

/// Throws std::invalid_argument on schema mismatch or, when paired, unequal
/// run counts.
std::vector<DeltaRow> compare_policies(const std::vector<RunStatistics>& baseline,
                                       const std::vector<RunStatistics>& variant, bool paired);

void write_statistics_csv(std::ostream& os, const std::vector<RunStatistics>& runs,
                          const std::vector<std::uint64_t>& seeds);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);
void render_summary(std::ostream& os, const std::vector<SummaryRow>& rows);
void write_delta_csv(std::ostream& os, const std::vector<DeltaRow>& rows);
void render_delta(std::ostream& os, const std::vector<DeltaRow>& rows, const std::string& baseline_name,
                  const std::string& variant_name);

}  // namespace etk
