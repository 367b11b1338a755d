#include "etk/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace etk {

int uk_hla_level(const MismatchCount& mm) {
  const int b = mm.b();
  const int dr = mm.dr();
  if (mm.abdr() == 0) return 1;
  if (b + dr <= 1) return 2;
  if (dr == 2 || b + dr >= 3) return 4;
  return 3;
}

std::string_view vpra_band(double vpra) {
  if (vpra <= 0) return "0";
  if (vpra < 0.85) return ">0-84.9";
  if (vpra < 0.95) return "85-94.9";
  return "95+";
}

namespace {

constexpr std::array<std::string_view, 7> kAgeDiffBands = {
    "candidate 35+ years older",   "candidate 15-34 years older",   "candidate 6-14 years older",
    "max 5 year difference",       "candidate 6-14 years younger",  "candidate 15-34 years younger",
    "candidate 35+ years younger"};
constexpr std::array<std::string_view, 4> kUkLevels = {"level 1 (000)", "level 2 (*00/*10/*01)",
                                                       "level 3 (*20/*11)", "level 4 (**2/*21)"};
constexpr std::array<std::string_view, 4> kVpraBands = {"0", ">0-84.9", "85-94.9", "95+"};
constexpr std::array<std::string_view, 4> kHomozygosity = {"B and DR", "DR", "B", "none"};
constexpr std::array<std::string_view, 3> kGeoRows = {"local/regional", "national", "international"};

std::string_view geo_row(Geography g) {
  switch (g) {
    case Geography::Local:
    case Geography::Regional: return kGeoRows[0];
    case Geography::National: return kGeoRows[1];
    case Geography::International: return kGeoRows[2];
  }
  return kGeoRows[2];
}

}  // namespace

std::string_view age_difference_band(int candidate_age, int donor_age) {
  const int d = candidate_age - donor_age;
  if (d >= 35) return kAgeDiffBands[0];
  if (d >= 15) return kAgeDiffBands[1];
  if (d >= 6) return kAgeDiffBands[2];
  if (d >= -5) return kAgeDiffBands[3];
  if (d >= -14) return kAgeDiffBands[4];
  if (d >= -34) return kAgeDiffBands[5];
  return kAgeDiffBands[6];
}

std::string_view homozygosity_class(const Homozygosity& h) {
  if (h.b && h.dr) return kHomozygosity[0];
  if (h.dr) return kHomozygosity[1];
  if (h.b) return kHomozygosity[2];
  return kHomozygosity[3];
}

RunStatistics compute_statistics(const SimulationOutput& out,
                                 const std::vector<std::string>& countries) {
  RunStatistics stats;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  auto add = [&](const std::string& group, std::string_view label, double v = 0) {
    index[{group, std::string(label)}] = stats.size();
    stats.push_back({group, std::string(label), v});
  };
  auto bump = [&](const std::string& group, std::string_view label) {
    stats[index.at({group, std::string(label)})].value += 1;
  };

  int dual = 0;
  int etkas = 0;
  int esp = 0;
  for (const auto& t : out.transplants) {
    dual += t.dual;
    (t.program == Program::ETKAS ? etkas : esp) += 1;
  }
  const int n = static_cast<int>(out.transplants.size());
  int deaths = 0;
  int removals = 0;
  for (const auto& [_, v] : out.waitlist_deaths) deaths += v;
  for (const auto& [_, v] : out.removals) removals += v;

  add("overview", "donors", out.donors);
  add("overview", "transplantations", n);
  add("overview", "single kidney", n - dual);
  add("overview", "dual kidney", dual);
  add("overview", "ETKAS", etkas);
  add("overview", "ESP", esp);
  add("overview", "kidneys available", out.kidneys_available);
  add("overview", "kidneys transplanted", out.kidneys_transplanted);
  add("overview", "kidneys discarded", out.kidneys_discarded);
  add("waiting list", "re-listings", out.relistings);
  add("waiting list", "final active waiting list", out.active_at_end);
  add("waiting list", "removals", removals);
  add("waiting list", "deaths", deaths);
  add("waiting list", "post-transplant deaths", out.post_transplant_deaths);

  const auto country_label = [&](const std::string& c) {
    return std::find(countries.begin(), countries.end(), c) != countries.end() ? c
                                                                               : std::string("other");
  };
  for (const auto& c : countries) {
    const auto it = out.waitlist_deaths.find(c);
    add("deaths by country", c, it == out.waitlist_deaths.end() ? 0 : it->second);
  }
  double other_deaths = 0;
  for (const auto& [c, v] : out.waitlist_deaths) {
    if (country_label(c) == "other") other_deaths += v;
  }
  add("deaths by country", "other", other_deaths);

  for (const Program p : {Program::ETKAS, Program::ESP}) {
    const std::string pre(to_string(p));
    const auto g = [&](const char* name) { return pre + " " + name; };
    add(g("mechanism"), "standard");
    add(g("mechanism"), "non-standard");
    add(g("mechanism"), "forced");
    add(g("recipient"), "pediatric");
    add(g("recipient"), "aged 65 or over");
    add(g("recipient"), "aged below 65");
    add(g("recipient"), "primary transplant");
    add(g("recipient"), "repeat transplant");
    for (int k = 0; k <= 6; ++k) add(g("ABDR mismatches"), std::to_string(k));
    for (auto l : kUkLevels) add(g("HLA match quality"), l);
    for (auto b : kVpraBands) add(g("vPRA"), b);
    for (const auto& c : countries) add(g("recipient country"), c);
    add(g("recipient country"), "other");
    for (auto r : kGeoRows) add(g("match geography"), r);
    for (auto a : kAgeDiffBands) add(g("age difference"), a);
    for (auto h : kHomozygosity) add(g("homozygosity on B and DR"), h);

    for (const auto& t : out.transplants) {
      if (t.program != p) continue;
      bump(g("mechanism"), t.mechanism == Mechanism::Standard      ? "standard"
                           : t.mechanism == Mechanism::NonStandard ? "non-standard"
                                                                   : "forced");
      if (t.candidate_age < 18) bump(g("recipient"), "pediatric");
      bump(g("recipient"), t.candidate_age >= 65 ? "aged 65 or over" : "aged below 65");
      bump(g("recipient"), t.repeat ? "repeat transplant" : "primary transplant");
      const MismatchCount mm = t.mm.value_or(MismatchCount::of(2, 2, 2));
      bump(g("ABDR mismatches"), std::to_string(mm.abdr()));
      bump(g("HLA match quality"), kUkLevels[static_cast<std::size_t>(uk_hla_level(mm) - 1)]);
      bump(g("vPRA"), vpra_band(t.vpra));
      bump(g("recipient country"), country_label(t.candidate_country));
      bump(g("match geography"), geo_row(t.geo));
      bump(g("age difference"), age_difference_band(t.candidate_age, t.donor_age));
      bump(g("homozygosity on B and DR"), homozygosity_class(t.homozygosity));
    }
  }
  return stats;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<Statistic> load_actual(const std::filesystem::path& path) {
  const auto table = Table::read(path);
  table.require_columns({"group", "label", "value"});
  std::vector<Statistic> out;
  for (const auto& row : table.rows()) {
    out.push_back({row.at("group"), row.at("label"), row.number("value")});
  }
  return out;
}

namespace {

void check_schema(const RunStatistics& ref, const RunStatistics& other, std::size_t run) {
  bool same = ref.size() == other.size();
  for (std::size_t i = 0; same && i < ref.size(); ++i) {
    same = ref[i].group == other[i].group && ref[i].label == other[i].label;
  }
  if (!same) throw std::invalid_argument("run " + std::to_string(run) + " has a different statistics schema");
}

std::vector<double> column(const std::vector<RunStatistics>& runs, std::size_t i) {
  std::vector<double> v;
  v.reserve(runs.size());
  for (const auto& r : runs) v.push_back(r[i].value);
  return v;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v, double m) {
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<RunStatistics>& runs,
                                  const std::vector<Statistic>& actual) {
  if (runs.empty()) throw std::invalid_argument("summarize needs at least one run");
  for (std::size_t r = 1; r < runs.size(); ++r) check_schema(runs[0], runs[r], r);
  std::map<std::pair<std::string, std::string>, double> act;
  for (const auto& a : actual) act[{a.group, a.label}] = a.value;
  std::vector<SummaryRow> rows;
  for (std::size_t i = 0; i < runs[0].size(); ++i) {
    const auto v = column(runs, i);
    SummaryRow row{runs[0][i].group, runs[0][i].label, mean_of(v), percentile(v, 0.025),
                   percentile(v, 0.975), std::nullopt, false};
    if (const auto it = act.find({row.group, row.label}); it != act.end()) {
      row.actual = it->second;
      row.miscalibrated = it->second < row.lower || it->second > row.upper;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

TTest paired_t_test(const std::vector<double>& baseline, const std::vector<double>& variant) {
  if (baseline.size() != variant.size()) {
    throw std::invalid_argument("paired comparison needs equal run counts (" +
                                std::to_string(baseline.size()) + " vs " +
                                std::to_string(variant.size()) + ")");
  }
  if (baseline.size() < 2) throw std::invalid_argument("paired comparison needs at least two runs");
  std::vector<double> d(baseline.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = variant[i] - baseline[i];
  TTest r;
  r.mean_difference = mean_of(d);
  r.df = static_cast<double>(d.size() - 1);
  const double sd = std::sqrt(variance_of(d, r.mean_difference));
  if (sd == 0) {
    r.t = r.mean_difference == 0 ? 0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
    r.p = r.mean_difference == 0 ? 1 : 0;
    return r;
  }
  r.t = r.mean_difference / (sd / std::sqrt(static_cast<double>(d.size())));
  r.p = two_sided_p(r.t, r.df);
  return r;
}

TTest welch_t_test(const std::vector<double>& baseline, const std::vector<double>& variant) {
  if (baseline.size() < 2 || variant.size() < 2) {
    throw std::invalid_argument("unpaired comparison needs at least two runs per side");
  }
  const double m1 = mean_of(baseline);
  const double m2 = mean_of(variant);
  const double n1 = static_cast<double>(baseline.size());
  const double n2 = static_cast<double>(variant.size());
  const double a = variance_of(baseline, m1) / n1;
  const double b = variance_of(variant, m2) / n2;
  TTest r;
  r.mean_difference = m2 - m1;
  if (a + b == 0) {
    r.df = n1 + n2 - 2;
    r.t = r.mean_difference == 0 ? 0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
    r.p = r.mean_difference == 0 ? 1 : 0;
    return r;
  }
  r.t = r.mean_difference / std::sqrt(a + b);
  r.df = (a + b) * (a + b) / (a * a / (n1 - 1) + b * b / (n2 - 1));
  r.p = two_sided_p(r.t, r.df);
  return r;
}

std::string_view significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::vector<DeltaRow> compare_policies(const std::vector<RunStatistics>& baseline,
                                       const std::vector<RunStatistics>& variant, bool paired) {
  if (baseline.empty() || variant.empty()) throw std::invalid_argument("comparison needs runs on both sides");
  if (paired && baseline.size() != variant.size()) {
    throw std::invalid_argument("paired comparison needs equal run counts (" +
                                std::to_string(baseline.size()) + " vs " +
                                std::to_string(variant.size()) + ")");
  }
  for (std::size_t r = 1; r < baseline.size(); ++r) check_schema(baseline[0], baseline[r], r);
  for (std::size_t r = 0; r < variant.size(); ++r) check_schema(baseline[0], variant[r], r);
  std::vector<DeltaRow> rows;
  for (std::size_t i = 0; i < baseline[0].size(); ++i) {
    const auto x = column(baseline, i);
    const auto y = column(variant, i);
    DeltaRow row{baseline[0][i].group, baseline[0][i].label, mean_of(x), mean_of(y), {}};
    if (x.size() >= 2 && y.size() >= 2) {
      row.test = paired ? paired_t_test(x, y) : welch_t_test(x, y);
    } else {
      row.test.mean_difference = row.variant - row.baseline;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_statistics_csv(std::ostream& os, const std::vector<RunStatistics>& runs,
                          const std::vector<std::uint64_t>& seeds) {
  TableWriter w(os, {"seed", "group", "label", "value"});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& s : runs[r]) {
      w.row({std::to_string(r < seeds.size() ? seeds[r] : r), s.group, s.label, format_number(s.value)});
    }
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  TableWriter w(os, {"group", "label", "mean", "p2.5", "p97.5", "actual", "miscalibrated"});
  for (const auto& r : rows) {
    w.row({r.group, r.label, format_number(r.mean), format_number(r.lower), format_number(r.upper),
           r.actual ? format_number(*r.actual) : "", r.miscalibrated ? "1" : "0"});
  }
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

void render_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  const bool with_actual = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.actual.has_value(); });
  std::string group;
  os << std::left << std::setw(34) << "statistic" << std::right << std::setw(28)
     << "mean [2.5%-97.5%]";
  if (with_actual) os << std::setw(10) << "actual";
  os << '\n';
  for (const auto& r : rows) {
    if (r.group != group) {
      group = r.group;
      os << group << '\n';
    }
    std::string band = fixed(r.mean, 1) + " [";
    if (r.miscalibrated && r.actual && r.mean != 0) {
      const double rel = (r.mean - *r.actual) / *r.actual * 100.0;
      band += (rel > 0 ? "+" : "") + fixed(rel, 0) + "%, ";
    }
    band += fixed(r.lower, 1) + "-" + fixed(r.upper, 1) + "]";
    if (r.miscalibrated) band = "!" + band;
    os << "  " << std::left << std::setw(32) << r.label << std::right << std::setw(28) << band;
    if (with_actual) os << std::setw(10) << (r.actual ? fixed(*r.actual, 0) : "");
    os << '\n';
  }
}

void write_delta_csv(std::ostream& os, const std::vector<DeltaRow>& rows) {
  TableWriter w(os, {"group", "label", "baseline", "variant", "delta", "t", "df", "p", "stars"});
  for (const auto& r : rows) {
    w.row({r.group, r.label, format_number(r.baseline), format_number(r.variant),
           format_number(r.test.mean_difference), format_number(r.test.t), format_number(r.test.df),
           format_number(r.test.p), std::string(significance_stars(r.test.p))});
  }
}

void render_delta(std::ostream& os, const std::vector<DeltaRow>& rows, const std::string& baseline_name,
                  const std::string& variant_name) {
  const std::string head = variant_name + " - base";
  const int width = std::max<int>(16, static_cast<int>(head.size()) + 2);
  os << std::left << std::setw(34) << "statistic" << std::right << std::setw(12) << baseline_name
     << std::setw(width) << head << '\n';
  std::string group;
  for (const auto& r : rows) {
    if (r.group != group) {
      group = r.group;
      os << group << '\n';
    }
    const double d = r.test.mean_difference == 0 ? 0.0 : r.test.mean_difference;
    std::string delta = (d > 0 ? "+" : "") + fixed(d, 1) + std::string(significance_stars(r.test.p));
    os << "  " << std::left << std::setw(32) << r.label << std::right << std::setw(12)
       << fixed(r.baseline, 1) << std::setw(width) << delta << '\n';
  }
  os << "* p<0.05; ** p<0.01; *** p<0.001\n";
}

}  // namespace etk
