#include "etk/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "etk/balance.hpp"
#include "etk/entities.hpp"
#include "etk/hla.hpp"
#include "etk/post_transplant.hpp"
#include "etk/rng.hpp"
#include "etk/table.hpp"

namespace etk {

namespace {

using Engine = std::mt19937_64;

struct AntigenSpec {
  const char* code;
  const char* broad;  // "" = own broad
  double freq;
};

// Rough European antigen frequencies at split level.
const std::vector<AntigenSpec> kA = {
    {"A1", "", .15},     {"A2", "", .28},     {"A3", "", .13},     {"A11", "", .06},
    {"A23", "A9", .02},  {"A24", "A9", .09},  {"A25", "A10", .02}, {"A26", "A10", .04},
    {"A29", "A19", .03}, {"A30", "A19", .03}, {"A31", "A19", .025}, {"A32", "A19", .035},
    {"A33", "A19", .01}, {"A68", "A28", .035}, {"A69", "A28", .005}, {"A36", "", .002},
    {"A66", "A10", .005}, {"A74", "A19", .003}, {"A80", "", .001}};
const std::vector<std::string> kABroads = {"A9", "A10", "A19", "A28"};

const std::vector<AntigenSpec> kB = {
    {"B7", "", .12},     {"B8", "", .09},     {"B13", "", .03},    {"B18", "", .06},
    {"B27", "", .04},    {"B35", "", .10},    {"B37", "", .015},   {"B38", "B16", .03},
    {"B39", "B16", .02}, {"B41", "", .01},    {"B44", "B12", .11}, {"B45", "B12", .01},
    {"B49", "B21", .025}, {"B50", "B21", .01}, {"B51", "B5", .08}, {"B52", "B5", .015},
    {"B53", "", .005},   {"B55", "B22", .02}, {"B56", "B22", .01}, {"B57", "B17", .04},
    {"B58", "B17", .01}, {"B60", "B40", .04}, {"B61", "B40", .015}, {"B62", "B15", .05},
    {"B63", "B15", .005}, {"B47", "", .002},  {"B64", "B14", .005}, {"B65", "B14", .02}};
const std::vector<std::string> kBBroads = {"B5", "B12", "B14", "B15", "B16", "B17", "B21", "B22", "B40"};

const std::vector<AntigenSpec> kDR = {
    {"DR1", "", .09},     {"DR103", "", .01},   {"DR4", "", .13},     {"DR7", "", .12},
    {"DR8", "", .03},     {"DR9", "", .01},     {"DR10", "", .01},    {"DR11", "DR5", .12},
    {"DR12", "DR5", .02}, {"DR13", "DR6", .13}, {"DR14", "DR6", .04}, {"DR15", "DR2", .14},
    {"DR16", "DR2", .03}, {"DR17", "DR3", .10}, {"DR18", "DR3", .005}};
const std::vector<std::string> kDRBroads = {"DR2", "DR3", "DR5", "DR6"};

// Common haplotypes drawn as a unit, adding some linkage.
struct Haplotype {
  const char* a;
  const char* b;
  const char* dr;
  double p;
};
const std::vector<Haplotype> kHaplotypes = {
    {"A1", "B8", "DR17", 0.08}, {"A3", "B7", "DR15", 0.05}, {"A2", "B44", "DR4", 0.03}};

struct CenterSpec {
  const char* code;
  const char* country;
  const char* region;
  const char* esp_subregion;
};

const std::vector<CenterSpec> kCenters = {
    {"DESTTP", "DE", "BW", "BW"},     {"DETUTP", "DE", "BW", "BW"},     {"DEMATP", "DE", "BW", "BW"},
    {"DEHDTP", "DE", "BW", "BW"},   {"DEMUTP", "DE", "BY", "BY-S"},   {"DEERTP", "DE", "BY", "BY-N"},
    {"DEWUTP", "DE", "BY", "BY-N"},   {"DEESTP", "DE", "NRW", "NRW-W"}, {"DEKOTP", "DE", "NRW", "NRW-W"},
    {"DEMSTP", "DE", "NRW", "NRW-E"}, {"DEHATP", "DE", "NORD", "NORD-1"}, {"DEHHTP", "DE", "NORD", "NORD-2"},
    {"DEKITP", "DE", "NORD", "NORD-2"}, {"DEBCTP", "DE", "OST", "OST-1"}, {"DELPTP", "DE", "OST", "OST-2"},
    {"DEFMTP", "DE", "MITTE", "MITTE"}, {"NLGRTP", "NL", "NL-N", ""},    {"NLRDTP", "NL", "NL-S", ""},
    {"NLLDTP", "NL", "NL-S", ""},     {"NLUTTP", "NL", "NL-N", ""},     {"NLNYTP", "NL", "NL-S", ""},
    {"BELATP", "BE", "BE-F", ""},     {"BEGETP", "BE", "BE-F", ""},     {"BEBRTP", "BE", "BE-W", ""},
    {"BELGTP", "BE", "BE-W", ""},     {"ATWETP", "AT", "AT-E", ""},     {"ATGRTP", "AT", "AT-S", ""},
    {"ATINTP", "AT", "AT-W", ""},     {"ATLITP", "AT", "AT-N", ""},     {"HUBUTP", "HU", "HU-C", ""},
    {"HUDETP", "HU", "HU-E", ""},     {"HUSZTP", "HU", "HU-E", ""},     {"HUPETP", "HU", "HU-C", ""},
    {"HRZATP", "HR", "HR-N", ""},     {"HRRITP", "HR", "HR-S", ""},     {"SILJTP", "SI", "SI", ""}};

// Shares of registrations and of donors per country.
const std::vector<std::pair<std::string, double>> kCandidateShare = {
    {"DE", .48}, {"NL", .12}, {"BE", .11}, {"AT", .07}, {"HU", .10}, {"HR", .06}, {"SI", .02}};
const std::vector<std::pair<std::string, double>> kDonorShare = {
    {"DE", .46}, {"NL", .12}, {"BE", .12}, {"AT", .07}, {"HU", .10}, {"HR", .07}, {"SI", .03}};

// A, B, AB, O
const std::array<double, 4> kBloodGroupShare = {0.42, 0.14, 0.06, 0.38};

double unif(Engine& e, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(e);
}

int unif_int(Engine& e, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(e); }

bool chance(Engine& e, double p) { return unif(e) < p; }

double normal(Engine& e, double mean, double sd) { return std::normal_distribution<double>(mean, sd)(e); }

double exponential(Engine& e, double rate) { return std::exponential_distribution<double>(rate)(e); }

template <typename T>
std::size_t weighted(Engine& e, const std::vector<T>& items, double (*w)(const T&)) {
  double total = 0;
  for (const auto& it : items) total += w(it);
  double u = unif(e) * total;
  for (std::size_t i = 0; i < items.size(); ++i) {
    u -= w(items[i]);
    if (u < 0) return i;
  }
  return items.size() - 1;
}

double spec_weight(const AntigenSpec& s) { return s.freq; }
double share_weight(const std::pair<std::string, double>& s) { return s.second; }

class Population {
 public:
  Population() {
    auto load = [&](Locus l, const std::vector<AntigenSpec>& specs, const std::vector<std::string>& broads) {
      for (const auto& b : broads) dict.add(b, l);
      for (const auto& s : specs) dict.add(s.code, l, s.broad);
    };
    load(Locus::A, kA, kABroads);
    load(Locus::B, kB, kBBroads);
    load(Locus::DR, kDR, kDRBroads);
    for (const auto& c : kCenters) {
      centers.add({c.code, c.country, c.region, *c.esp_subregion ? c.esp_subregion : c.region});
    }
  }

  HlaTyping typing(Engine& e) const {
    std::array<std::array<std::string, 2>, 3> codes;
    for (int h = 0; h < 2; ++h) {
      double u = unif(e);
      const Haplotype* hap = nullptr;
      for (const auto& hp : kHaplotypes) {
        if (u < hp.p) {
          hap = &hp;
          break;
        }
        u -= hp.p;
      }
      if (hap) {
        codes[0][h] = hap->a;
        codes[1][h] = hap->b;
        codes[2][h] = hap->dr;
      } else {
        codes[0][h] = kA[weighted(e, kA, spec_weight)].code;
        codes[1][h] = kB[weighted(e, kB, spec_weight)].code;
        codes[2][h] = kDR[weighted(e, kDR, spec_weight)].code;
      }
    }
    HlaTyping t;
    t.set(dict, Locus::A, codes[0][0], codes[0][1]);
    t.set(dict, Locus::B, codes[1][0], codes[1][1]);
    t.set(dict, Locus::DR, codes[2][0], codes[2][1]);
    return t;
  }

  BloodGroup blood_group(Engine& e) const {
    double u = unif(e);
    for (std::size_t i = 0; i < kBloodGroupShare.size(); ++i) {
      if (u < kBloodGroupShare[i]) return static_cast<BloodGroup>(i);
      u -= kBloodGroupShare[i];
    }
    return BloodGroup::O;
  }

  int center_in(Engine& e, const std::vector<std::pair<std::string, double>>& shares) const {
    const auto& country = shares[weighted(e, shares, share_weight)].first;
    std::vector<int> options;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (centers.at(static_cast<int>(i)).country == country) options.push_back(static_cast<int>(i));
    }
    return options[static_cast<std::size_t>(unif_int(e, 0, static_cast<int>(options.size()) - 1))];
  }

  /// Unacceptable antigens drawn by frequency, excluding the candidate's own.
  UnacceptableSet unacceptables(Engine& e, const HlaTyping& own, int n) const {
    std::set<AntigenId> own_keys;
    for (auto l : kAbdr) {
      for (auto id : own.at(l).ids()) own_keys.insert(dict.match_key(id));
    }
    UnacceptableSet set;
    for (int tries = 0; static_cast<int>(set.size()) < n && tries < 200; ++tries) {
      const auto& specs = chance(e, 0.4) ? kA : (chance(e, 0.6) ? kB : kDR);
      const auto id = dict.resolve(specs[weighted(e, specs, spec_weight)].code);
      if (own_keys.count(dict.match_key(id))) continue;
      set.add(id);
    }
    return set;
  }

  HlaDictionary dict;
  CenterRegistry centers;
};

Date birth_for_age(Engine& e, Date at, int age) {
  return at - static_cast<int>(std::lround(age * kDaysPerYear)) - unif_int(e, 1, 364);
}

Candidate make_candidate(Engine& e, const Population& pop, int serial, Date registration,
                         const GeneratorConfig& cfg) {
  Candidate c;
  char buf[32];
  std::snprintf(buf, sizeof buf, "C%06d", serial);
  c.id = buf;
  std::snprintf(buf, sizeof buf, "P%06d", serial);
  c.patient_id = buf;
  c.center = pop.center_in(e, kCandidateShare);
  c.blood_group = pop.blood_group(e);
  const int age = chance(e, 0.04) ? unif_int(e, 1, 17)
                                  : static_cast<int>(std::clamp(normal(e, 55, 13), 18.0, 82.0));
  c.dob = birth_for_age(e, registration, age);
  c.hla = pop.typing(e);
  c.registration = registration;
  c.prior_tx = chance(e, 0.13);
  if (c.prior_tx) {
    const Date latest = std::min(registration, cfg.window_start) - 90;
    c.previous_tx = latest - unif_int(e, 0, 3000);
  }
  const double p_sensitized = c.prior_tx ? 0.6 : 0.15;
  if (chance(e, p_sensitized)) {
    const int n = chance(e, 0.35) ? unif_int(e, 8, 30) : unif_int(e, 1, 6);
    c.unacceptables = pop.unacceptables(e, c.hla, n);
  }
  if (!chance(e, 0.08)) c.dialysis_start = registration - static_cast<int>(exponential(e, 1.0 / 400));
  c.status = chance(e, 0.15) ? Urgency::NT : Urgency::T;
  c.last_screening = registration - unif_int(e, 0, 60);
  if (chance(e, 0.08)) c.profile.accept_dcd = false;
  if (chance(e, 0.05)) c.profile.accept_extended = false;
  if (chance(e, 0.03)) c.profile.accept_hcv = false;
  if (age < 40 && chance(e, 0.2)) c.profile.max_donor_age = 60;
  if (chance(e, 0.03)) c.mm_criteria = parse_mismatch_criteria("**2");
  c.am = chance(e, 0.005);
  const auto& country = pop.centers.at(c.center).country;
  if (country == "DE" && age >= 65) c.esp_choice = chance(e, 0.75) ? GermanChoice::ESP : GermanChoice::ETKAS;
  c.esp_opt_in = age < 65 && age >= 55 && chance(e, 0.03);
  c.kaoo = chance(e, 0.01);
  return c;
}

/// Status stream from registration until a terminal event or the horizon.
void make_updates(Engine& e, const Population& pop, Candidate& c, Date horizon, Date screen_from) {
  std::vector<StatusUpdate> ups;
  const int age = c.age_at(c.registration);
  const double death_rate = std::clamp(0.03 + 0.0015 * (age - 45), 0.01, 0.15) / kDaysPerYear;
  const double removal_rate = 0.05 / kDaysPerYear;
  const Date death = c.registration + 1 + static_cast<int>(exponential(e, death_rate));
  const Date removal = c.registration + 1 + static_cast<int>(exponential(e, removal_rate));
  const Date terminal = std::min(death, removal);
  const Date last = std::min(terminal, horizon);

  if (c.status == Urgency::NT) {
    ups.push_back({c.registration + unif_int(e, 20, 200), UpdateType::Status, "T"});
  }
  // NT episodes and the occasional HU spell.
  for (Date d = c.registration + static_cast<int>(exponential(e, 0.4 / kDaysPerYear)); d < last;
       d = d + static_cast<int>(exponential(e, 0.4 / kDaysPerYear)) + 1) {
    const bool hu = chance(e, 0.05);
    ups.push_back({d, UpdateType::Status, hu ? "HU" : "NT"});
    d = d + unif_int(e, 30, hu ? 90 : 180);
    ups.push_back({d, UpdateType::Status, "T"});
  }
  for (Date d = std::max(c.registration, screen_from) + unif_int(e, 30, 120); d < last;
       d = d + unif_int(e, 60, 120)) {
    ups.push_back({d, UpdateType::Screening, ""});
  }
  if (chance(e, 0.05)) {
    auto extra = pop.unacceptables(e, c.hla, static_cast<int>(c.unacceptables.size()) + unif_int(e, 1, 5));
    for (auto id : c.unacceptables.ids()) extra.add(id);
    ups.push_back({c.registration + unif_int(e, 30, 900), UpdateType::Unacceptable, extra.to_string(pop.dict)});
  }
  if (!c.dialysis_start && chance(e, 0.7)) {
    const Date d = c.registration + unif_int(e, 60, 700);
    ups.push_back({d, UpdateType::Dialysis, d.to_string()});
  }
  std::stable_sort(ups.begin(), ups.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  std::erase_if(ups, [&](const StatusUpdate& u) { return u.date >= last; });
  if (terminal <= horizon) ups.push_back({terminal, UpdateType::Status, death < removal ? "D" : "R"});
  c.updates = std::move(ups);
}

Donor make_donor(Engine& e, const Population& pop, int serial, Date date) {
  Donor d;
  char buf[32];
  std::snprintf(buf, sizeof buf, "D%06d", serial);
  d.id = buf;
  d.date = date;
  d.age = chance(e, 0.03) ? unif_int(e, 1, 17) : static_cast<int>(std::clamp(normal(e, 54, 16), 18.0, 90.0));
  d.blood_group = pop.blood_group(e);
  d.hla = pop.typing(e);
  d.center = pop.center_in(e, kDonorShare);
  d.death_cause = chance(e, d.age >= 50 ? 0.6 : 0.3) ? "CVA" : (chance(e, 0.5) ? "trauma" : "anoxia");
  d.dcd = chance(e, 0.12);
  d.creatinine = std::exp(normal(e, 0.0, 0.35));
  d.diabetes = chance(e, d.age >= 60 ? 0.12 : 0.04);
  d.smoking = chance(e, 0.3);
  d.proteinuria = chance(e, 0.1);
  d.hypertension = chance(e, d.age >= 60 ? 0.5 : 0.15);
  d.malignancy = chance(e, 0.02);
  d.extended_criteria = chance(e, 0.1);
  d.hcv = chance(e, 0.02);
  d.hbv = chance(e, 0.01);
  d.kidneys = chance(e, 0.08) ? 1 : 2;
  return d;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void write_antigens(const std::filesystem::path& dir) {
  auto f = open_out(dir / "antigens.csv");
  TableWriter w(f, {"antigen", "locus", "broad"});
  auto emit = [&](Locus l, const std::vector<AntigenSpec>& specs, const std::vector<std::string>& broads) {
    for (const auto& b : broads) w.row({b, std::string(to_string(l)), ""});
    for (const auto& s : specs) w.row({s.code, std::string(to_string(l)), s.broad});
  };
  emit(Locus::A, kA, kABroads);
  emit(Locus::B, kB, kBBroads);
  emit(Locus::DR, kDR, kDRBroads);
}

void write_frequencies(const std::filesystem::path& dir, const Population& pop) {
  // Aggregated to match level, including the haplotype mixture.
  std::map<std::pair<int, std::string>, double> freq;
  double hap_total = 0;
  for (const auto& h : kHaplotypes) hap_total += h.p;
  auto add = [&](Locus l, const std::vector<AntigenSpec>& specs, int which) {
    double sum = 0;
    for (const auto& s : specs) sum += s.freq;
    for (const auto& s : specs) {
      const auto key = pop.dict.code(pop.dict.match_key(pop.dict.resolve(s.code)));
      freq[{static_cast<int>(l), key}] += (1 - hap_total) * s.freq / sum;
    }
    for (const auto& h : kHaplotypes) {
      const char* code = which == 0 ? h.a : which == 1 ? h.b : h.dr;
      const auto key = pop.dict.code(pop.dict.match_key(pop.dict.resolve(code)));
      freq[{static_cast<int>(l), key}] += h.p;
    }
  };
  add(Locus::A, kA, 0);
  add(Locus::B, kB, 1);
  add(Locus::DR, kDR, 2);
  auto f = open_out(dir / "frequencies.csv");
  TableWriter w(f, {"locus", "antigen", "frequency"});
  for (const auto& [k, v] : freq) {
    w.row({std::string(to_string(static_cast<Locus>(k.first))), k.second, format_number(v, 8)});
  }
}

std::string cells(const HlaTyping& t, const HlaDictionary& dict, Locus l) {
  const auto ids = t.at(l).ids();
  std::string s = ids.empty() ? "" : dict.code(ids[0]);
  s += ",";
  if (ids.size() > 1) s += dict.code(ids[1]);
  return s;
}

void write_panel(const std::filesystem::path& dir, const Population& pop, Engine& e, int n) {
  auto f = open_out(dir / "panel.csv");
  f << "a1,a2,b1,b2,dr1,dr2\n";
  for (int i = 0; i < n; ++i) {
    const auto t = pop.typing(e);
    f << cells(t, pop.dict, Locus::A) << ',' << cells(t, pop.dict, Locus::B) << ','
      << cells(t, pop.dict, Locus::DR) << '\n';
  }
}

void write_centers(const std::filesystem::path& dir, const Population& pop) {
  auto f = open_out(dir / "centers.csv");
  TableWriter w(f, {"center", "country", "region", "esp_subregion"});
  for (std::size_t i = 0; i < pop.centers.size(); ++i) {
    const auto& c = pop.centers.at(static_cast<int>(i));
    w.row({c.code, c.country, c.region, c.esp_subregion});
  }
}

void write_balance_history(const std::filesystem::path& dir, const Population& pop, Engine& e,
                           const GeneratorConfig& cfg) {
  auto f = open_out(dir / "balance_history.csv");
  TableWriter w(f, {"date", "donor_country", "recipient_country", "donor_age", "program",
                    "donor_region", "recipient_region"});
  std::vector<std::tuple<Date, std::string, std::string, int, std::string, std::string>> rows;
  for (int i = 0; i < cfg.balance_history_events; ++i) {
    const int dc = pop.center_in(e, kCandidateShare);
    const int rc = pop.center_in(e, kCandidateShare);
    const auto& d = pop.centers.at(dc);
    const auto& r = pop.centers.at(rc);
    const bool austrian = d.country == "AT" || r.country == "AT";
    if (d.country == r.country && !austrian) continue;
    if (d.country == r.country && d.region == r.region) continue;
    rows.emplace_back(cfg.window_start - unif_int(e, 1, 730), d.country, r.country, unif_int(e, 5, 80),
                      austrian ? d.region : "", austrian ? r.region : "");
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& [date, dc, rc, age, dr, rr] : rows) {
    w.row({date.to_string(), dc, rc, std::to_string(age), age >= 65 ? "ESP" : "ETKAS", dr, rr});
  }
}

void write_logistic(const std::filesystem::path& p, const std::string& id,
                    const std::vector<std::pair<std::string, double>>& terms) {
  auto f = open_out(p);
  f << "# model_id=" << id << "\n";
  TableWriter w(f, {"feature", "coef"});
  for (const auto& [name, coef] : terms) w.row({name, format_number(coef)});
}

void write_models(const std::filesystem::path& dir, Engine& e, const GeneratorConfig& cfg) {
  const auto m = dir / "models";
  write_logistic(m / "max_offers_coefficients.csv", "max_offers",
                 {{"donor_age", 0.02}, {"donor_dcd", 0.3}, {"donor_malignancy", 0.5}});
  {
    auto f = open_out(m / "max_offers_baseline.csv");
    TableWriter w(f, {"stratum", "k", "S0"});
    for (int k = 1; k <= 400; ++k) {
      w.row({"ETKAS:*", std::to_string(k), format_number(std::exp(-std::pow(k / 150.0, 1.2)), 8)});
    }
    for (int k = 1; k <= 200; ++k) {
      w.row({"ESP", std::to_string(k), format_number(std::exp(-std::pow(k / 60.0, 1.2)), 8)});
    }
  }
  write_logistic(m / "center_etkas.csv", "center_etkas",
                 {{"intercept", 1.0}, {"donor_age", -0.02}, {"donor_dcd", -0.4},
                  {"donor_malignancy", -1.0}, {"rescue", 1.0}, {"log_rank", -0.05}});
  write_logistic(m / "center_esp.csv", "center_esp",
                 {{"intercept", 1.6}, {"donor_age", -0.02}, {"donor_dcd", -0.3}, {"rescue", 1.0}});
  write_logistic(m / "patient_etkas.csv", "patient_etkas",
                 {{"intercept", 0.2},
                  {"mm_total", -0.15},
                  {"zero_mm", 0.8},
                  {"abs_age_diff", -0.03},
                  {"candidate_hu", 1.5},
                  {"candidate_vpra", 0.8},
                  {"dialysis_years", 0.05},
                  {"rescue", 0.5},
                  {"geo_international", -0.3},
                  {"donor_age", -0.01}});
  write_logistic(m / "patient_esp.csv", "patient_esp",
                 {{"intercept", 0.3}, {"abs_age_diff", -0.03}, {"mm_total", -0.1},
                  {"dialysis_years", 0.05}, {"rescue", 0.5}});
  write_logistic(m / "dual.csv", "dual", {{"intercept", -9.0}, {"donor_age", 0.08}});
  {
    auto f = open_out(m / "weibull_coefficients.csv");
    TableWriter w(f, {"feature", "coef"});
    for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{
             {"intercept", 14000}, {"recipient_age", -25}, {"donor_age", -30}, {"mm_total", -150},
             {"prior_tx", -800}, {"dialysis_years", -60}, {"donor_dcd", -300}, {"esp", 0}}) {
      w.row({k, format_number(v)});
    }
  }
  {
    auto f = open_out(m / "weibull_shapes.csv");
    TableWriter w(f, {"country", "shape"});
    w.row({"*", "0.9"});
    w.row({"DE", "0.95"});
  }
  {
    auto f = open_out(m / "relist_curves.csv");
    TableWriter w(f, {"t_bucket", "age_bucket", "s", "survival"});
    const std::array<double, 9> plateau = {0.9, 0.85, 0.75, 0.65, 0.55, 0.45, 0.3, 0.2, 0.1};
    const std::array<double, 5> scale = {0.6, 0.8, 1.0, 1.0, 1.0};
    const std::array<double, 6> s = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
    const std::array<double, 6> cdf = {0.0, 0.3, 0.6, 0.8, 0.93, 1.0};
    for (std::size_t tb = 0; tb < kTimeBuckets.size(); ++tb) {
      for (std::size_t ab = 0; ab < plateau.size(); ++ab) {
        for (std::size_t i = 0; i < s.size(); ++i) {
          const double surv = 1.0 - plateau[ab] * scale[tb] * cdf[i];
          w.row({std::string(kTimeBuckets[tb]), std::string(kAgeBuckets[ab]),
                 format_number(s[i]), format_number(surv, 8)});
        }
      }
    }
  }
  {
    auto f = open_out(m / "relist_pool.csv");
    TableWriter w(f, {"id", "country", "age", "dialysis_days", "r", "t", "statuses"});
    for (int i = 0; i < cfg.relist_pool_size; ++i) {
      const auto& country = kCandidateShare[weighted(e, kCandidateShare, share_weight)].first;
      const double t = unif(e, 30, 3000);
      const double r = t * unif(e, 0.05, 0.95);
      std::string st = "0:T";
      int day = 0;
      while (chance(e, 0.4)) {
        day += unif_int(e, 30, 400);
        st += ";" + std::to_string(day) + ":NT";
        day += unif_int(e, 30, 200);
        st += ";" + std::to_string(day) + ":T";
      }
      day += unif_int(e, 200, 3000);
      st += ";" + std::to_string(day) + (chance(e, 0.5) ? ":D" : ":R");
      char id[32];
      std::snprintf(id, sizeof id, "H%05d", i + 1);
      w.row({id, country, std::to_string(unif_int(e, 18, 78)), std::to_string(unif_int(e, 0, 3000)),
             format_number(r, 2), format_number(t, 2), st});
    }
  }
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

void write_policies(const std::filesystem::path& dir) {
  using nlohmann::json;
  const auto p = dir / "policies";
  const double third = 400.0 / 6;
  write_json(p / "current.json", {{"name", "current"}});
  write_json(p / "b_2dr.json",
             {{"name", "b_2dr"}, {"hla", {{"mismatch_points", {{"A", 0.0}, {"B", -third}, {"DR", -2 * third}}}}}});
  write_json(p / "a05_b_dr15.json",
             {{"name", "a05_b_dr15"},
              {"hla", {{"mismatch_points", {{"A", -third / 2}, {"B", -third}, {"DR", -1.5 * third}}}}}});
  write_json(p / "b15_dr15.json",
             {{"name", "b15_dr15"},
              {"hla", {{"mismatch_points", {{"A", 0.0}, {"B", -1.5 * third}, {"DR", -1.5 * third}}}}}});
  write_json(p / "sliding_scale.json",
             {{"name", "sliding_scale"}, {"sliding_scale", {{"enabled", true}, {"weight", 133}, {"base", 5}}}});
  write_json(p / "age_strict.json",
             {{"name", "age_strict"},
              {"age_filter",
               {{"enabled", true},
                {"curve", json::array({{-100, 0.2}, {-30, 0.2}, {-5, 1}, {5, 1}, {20, 0}, {100, 0}})}}}});
  write_json(p / "age_muted.json",
             {{"name", "age_muted"},
              {"age_filter",
               {{"enabled", true},
                {"curve", json::array({{-100, 0.5}, {-30, 0.5}, {-5, 1}, {5, 1}, {25, 0.4}, {100, 0.4}})}}}});
  write_json(p / "hmpp.json", {{"name", "hmpp"}, {"mmp", {{"use_hmpp", true}, {"p_leq1mm", "empirical"}}}});
}

void write_settings(const std::filesystem::path& dir, const GeneratorConfig& cfg) {
  using nlohmann::json;
  json seeds = json::array();
  for (int i = 1; i <= cfg.runs; ++i) seeds.push_back(i);
  write_json(dir / "settings.json",
             {{"window", {{"start", cfg.window_start.to_string()}, {"end", cfg.window_end.to_string()}}},
              {"inputs",
               {{"antigens", "antigens.csv"},
                {"frequencies", "frequencies.csv"},
                {"panel", "panel.csv"},
                {"centers", "centers.csv"},
                {"candidates", "candidates.csv"},
                {"status_updates", "status_updates.csv"},
                {"donors", "donors.csv"},
                {"balance_history", "balance_history.csv"}}},
              {"models",
               {{"max_offers_coefficients", "models/max_offers_coefficients.csv"},
                {"max_offers_baseline", "models/max_offers_baseline.csv"},
                {"center_etkas", "models/center_etkas.csv"},
                {"center_esp", "models/center_esp.csv"},
                {"patient_etkas", "models/patient_etkas.csv"},
                {"patient_esp", "models/patient_esp.csv"},
                {"dual", "models/dual.csv"},
                {"weibull_coefficients", "models/weibull_coefficients.csv"},
                {"weibull_shapes", "models/weibull_shapes.csv"},
                {"relist_curves", "models/relist_curves.csv"},
                {"relist_pool", "models/relist_pool.csv"}}},
              {"policy", "policies/current.json"},
              {"seeds", seeds},
              {"unplaced", "discard"},
              {"immunization_probability", 0.2},
              {"post_transplant", true},
              {"output_dir", "out"}});
}

}  // namespace

GeneratedCounts generate_dataset(const GeneratorConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.registrations < 1 || cfg.donors < 1) throw std::invalid_argument("generator needs registrations and donors");
  if (cfg.window_end < cfg.window_start) throw std::invalid_argument("window end precedes start");
  std::filesystem::create_directories(dir);
  const Population pop;
  // Separate engines so that resizing one part leaves the others unchanged.
  Engine panel_rng(mix64(cfg.seed ^ 0x11));
  Engine cand_rng(mix64(cfg.seed ^ 0x22));
  Engine donor_rng(mix64(cfg.seed ^ 0x33));
  Engine misc_rng(mix64(cfg.seed ^ 0x44));

  write_antigens(dir);
  write_frequencies(dir, pop);
  write_panel(dir, pop, panel_rng, cfg.panel_size);
  write_centers(dir, pop);

  GeneratedCounts counts;
  const int window_days = cfg.window_end - cfg.window_start;
  const int n_initial = static_cast<int>(std::lround(cfg.registrations * cfg.initial_fraction));
  std::vector<Date> reg_dates;
  for (int i = 0; i < cfg.registrations; ++i) {
    reg_dates.push_back(i < n_initial ? cfg.window_start - unif_int(cand_rng, 1, 6 * 365)
                                      : cfg.window_start + unif_int(cand_rng, 0, window_days));
  }
  std::sort(reg_dates.begin(), reg_dates.end());
  std::vector<Candidate> cands;
  const Date horizon = cfg.window_end + 365;
  for (int i = 0; i < cfg.registrations; ++i) {
    auto c = make_candidate(cand_rng, pop, i + 1, reg_dates[static_cast<std::size_t>(i)], cfg);
    make_updates(cand_rng, pop, c, horizon, cfg.window_start - 200);
    counts.status_updates += static_cast<int>(c.updates.size());
    cands.push_back(std::move(c));
  }
  counts.registrations = static_cast<int>(cands.size());
  {
    auto f = open_out(dir / "candidates.csv");
    write_candidates(f, cands, pop.dict, pop.centers);
  }
  {
    auto f = open_out(dir / "status_updates.csv");
    write_status_updates(f, cands);
  }

  std::vector<Date> donor_dates;
  for (int i = 0; i < cfg.donors; ++i) donor_dates.push_back(cfg.window_start + unif_int(donor_rng, 0, window_days));
  std::sort(donor_dates.begin(), donor_dates.end());
  std::vector<Donor> donors;
  for (int i = 0; i < cfg.donors; ++i) {
    donors.push_back(make_donor(donor_rng, pop, i + 1, donor_dates[static_cast<std::size_t>(i)]));
  }
  counts.donors = static_cast<int>(donors.size());
  {
    auto f = open_out(dir / "donors.csv");
    write_donors(f, donors, pop.dict, pop.centers);
  }

  write_balance_history(dir, pop, misc_rng, cfg);
  write_models(dir, misc_rng, cfg);
  write_policies(dir);
  write_settings(dir, cfg);
  return counts;
}

}  // namespace etk
