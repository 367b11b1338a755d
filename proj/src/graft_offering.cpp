#include "etk/graft_offering.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace etk {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "donor_age",        "donor_age_65plus",  "donor_dcd",         "donor_creatinine",
    "donor_diabetes",   "donor_hypertension", "donor_smoking",    "donor_malignancy",
    "donor_proteinuria", "donor_extended",   "donor_death_cva",   "esp",
    "rescue",           "geo_regional",      "geo_national",      "geo_international",
    "candidate_age",    "candidate_pediatric", "candidate_hu",    "candidate_vpra",
    "dialysis_years",   "prior_tx",          "mm_total",          "mm_a",
    "mm_b",             "mm_dr",             "zero_mm",           "age_diff",
    "abs_age_diff",     "log_rank",
};

std::vector<std::pair<Feature, double>> read_terms(const Table& table, double* intercept) {
  table.require_columns({"feature", "coef"});
  std::vector<std::pair<Feature, double>> terms;
  for (const auto& row : table.rows()) {
    const auto& name = row.at("feature");
    const double coef = row.number("coef");
    if (name == "intercept") {
      if (!intercept) throw row.error("intercept not allowed in this model");
      *intercept = coef;
      continue;
    }
    const auto f = parse_feature(name);
    if (!f) throw row.error("unknown feature '" + name + "'");
    terms.emplace_back(*f, coef);
  }
  return terms;
}

double dot(const std::vector<std::pair<Feature, double>>& terms, const FeatureVector& x) {
  double lp = 0.0;
  for (const auto& [f, coef] : terms) {
    if (!x.has(f)) {
      throw std::invalid_argument("missing feature '" + std::string(feature_name(f)) + "'");
    }
    lp += coef * x.get(f);
  }
  return lp;
}

}  // namespace

std::string_view feature_name(Feature f) { return kFeatureNames.at(static_cast<std::size_t>(f)); }

std::optional<Feature> parse_feature(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i) {
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  }
  return std::nullopt;
}

double sigmoid(double lp) {
  if (lp >= 0) return 1.0 / (1.0 + std::exp(-lp));
  const double e = std::exp(lp);
  return e / (1.0 + e);
}

LogisticModel LogisticModel::from_table(const Table& table) {
  double intercept = 0.0;
  auto terms = read_terms(table, &intercept);
  const auto it = table.meta().find("model_id");
  return LogisticModel(it == table.meta().end() ? table.source() : it->second, intercept,
                       std::move(terms));
}

LogisticModel LogisticModel::load(const std::filesystem::path& path) {
  return from_table(Table::read(path));
}

double LogisticModel::linear_predictor(const FeatureVector& x) const {
  return intercept_ + dot(terms_, x);
}

double LogisticModel::predict(const FeatureVector& x) const { return sigmoid(linear_predictor(x)); }

// ---------------------------------------------------------------------------

CoxSampler CoxSampler::from_tables(const Table& coefficients, const Table& baseline) {
  CoxSampler s;
  s.terms_ = read_terms(coefficients, nullptr);
  baseline.require_columns({"stratum", "k", "S0"});
  std::map<std::string, std::vector<Step>> steps;
  for (const auto& row : baseline.rows()) {
    const long k = row.integer("k");
    if (k < 1) throw row.error("k must be positive");
    steps[row.at("stratum")].push_back({static_cast<int>(k), row.number("S0")});
  }
  for (auto& [name, v] : steps) {
    try {
      s.add_stratum(name, std::move(v));
    } catch (const std::invalid_argument& e) {
      throw InputError(baseline.source() + ": stratum " + name + ": " + e.what());
    }
  }
  return s;
}

CoxSampler CoxSampler::load(const std::filesystem::path& coefficients,
                            const std::filesystem::path& baseline) {
  return from_tables(Table::read(coefficients), Table::read(baseline));
}

void CoxSampler::add_stratum(const std::string& name, std::vector<Step> steps) {
  std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) { return a.k < b.k; });
  double prev = 1.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0 && steps[i].k == steps[i - 1].k) throw std::invalid_argument("duplicate k");
    if (!(steps[i].s0 >= 0.0 && steps[i].s0 <= prev)) {
      throw std::invalid_argument("baseline survival must be non-increasing within [0,1]");
    }
    prev = steps[i].s0;
  }
  strata_[name] = std::move(steps);
}

double CoxSampler::linear_predictor(const FeatureVector& x) const { return dot(terms_, x); }

const std::vector<CoxSampler::Step>& CoxSampler::baseline(const std::string& stratum) const {
  const auto it = strata_.find(stratum);
  if (it == strata_.end()) throw std::invalid_argument("unknown stratum '" + stratum + "'");
  return it->second;
}

int CoxSampler::sample(const std::string& stratum, double lp, double u) const {
  const double power = std::exp(lp);
  for (const auto& step : baseline(stratum)) {
    if (std::pow(step.s0, power) <= u) return step.k;
  }
  return kNoOfferLimit;
}

std::string CoxSampler::stratum_for(Program p, const std::string& donor_country) const {
  if (p == Program::ESP) return "ESP";
  const auto specific = "ETKAS:" + donor_country;
  return strata_.count(specific) ? specific : std::string("ETKAS:*");
}

// ---------------------------------------------------------------------------

UnplacedMode parse_unplaced_mode(std::string_view text) {
  if (text == "discard") return UnplacedMode::Discard;
  if (text == "force" || text == "force-accept") return UnplacedMode::ForceAccept;
  throw std::invalid_argument("unplaced mode must be 'discard' or 'force'");
}

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::Standard: return "standard";
    case Mechanism::NonStandard: return "non-standard";
    case Mechanism::Forced: return "forced";
  }
  return "?";
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Accept: return "accept";
    case Decision::Decline: return "decline";
    case Decision::CenterDecline: return "center-decline";
  }
  return "?";
}

int AllocationOutcome::kidneys_accepted() const {
  int n = 0;
  for (const auto& a : accepted) n += a.kidneys;
  return n;
}

FeatureVector donor_features(const Donor& d, Program p) {
  FeatureVector x;
  x.set(Feature::DonorAge, d.age);
  x.set(Feature::DonorAge65Plus, d.age >= 65 ? 1 : 0);
  x.set(Feature::DonorDcd, d.dcd ? 1 : 0);
  x.set(Feature::DonorCreatinine, d.creatinine);
  x.set(Feature::DonorDiabetes, d.diabetes ? 1 : 0);
  x.set(Feature::DonorHypertension, d.hypertension ? 1 : 0);
  x.set(Feature::DonorSmoking, d.smoking ? 1 : 0);
  x.set(Feature::DonorMalignancy, d.malignancy ? 1 : 0);
  x.set(Feature::DonorProteinuria, d.proteinuria ? 1 : 0);
  x.set(Feature::DonorExtended, d.extended_criteria ? 1 : 0);
  x.set(Feature::DonorDeathCva, d.death_cause == "CVA" ? 1 : 0);
  x.set(Feature::Esp, p == Program::ESP ? 1 : 0);
  return x;
}

FeatureVector offer_features(const Donor& d, const Candidate& c, const MatchRecord& rec, int rank,
                             Program p, bool rescue, Date now) {
  FeatureVector x = donor_features(d, p);
  x.set(Feature::Rescue, rescue ? 1 : 0);
  x.set(Feature::GeoRegional,
        rec.geo == Geography::Local || rec.geo == Geography::Regional ? 1 : 0);
  x.set(Feature::GeoNational, rec.geo == Geography::National ? 1 : 0);
  x.set(Feature::GeoInternational, rec.geo == Geography::International ? 1 : 0);
  const int age = c.age_at(now);
  x.set(Feature::CandidateAge, age);
  x.set(Feature::CandidatePediatric, age < 18 ? 1 : 0);
  x.set(Feature::CandidateHu, c.status == Urgency::HU ? 1 : 0);
  x.set(Feature::CandidateVpra, c.vpra);
  x.set(Feature::DialysisYears, c.dialysis_days(now) / kDaysPerYear);
  x.set(Feature::PriorTx, c.prior_tx ? 1 : 0);
  if (rec.mm) {
    x.set(Feature::MmTotal, rec.mm->abdr());
    x.set(Feature::MmA, rec.mm->a());
    x.set(Feature::MmB, rec.mm->b());
    x.set(Feature::MmDr, rec.mm->dr());
    x.set(Feature::ZeroMm, rec.mm->abdr() == 0 ? 1 : 0);
  }
  x.set(Feature::AgeDiff, age - d.age);
  x.set(Feature::AbsAgeDiff, std::abs(age - d.age));
  x.set(Feature::LogRank, std::log(static_cast<double>(std::max(rank, 1))));
  return x;
}

int sample_max_offers(const Donor& d, Program p, const std::string& donor_country,
                      const CoxSampler& sampler, double u) {
  const auto stratum = sampler.stratum_for(p, donor_country);
  return sampler.sample(stratum, sampler.linear_predictor(donor_features(d, p)), u);
}

bool simulate_dual(const FeatureVector& x, const LogisticModel& model, double u,
                   std::optional<double> override_p) {
  const double p = override_p ? *override_p : model.predict(x);
  return u < p;
}

AllocationOutcome run_allocation(const AllocationInputs& in, int k_max) {
  const auto& records = in.list.records;
  const bool etkas = in.list.program == Program::ETKAS;
  const auto& center_model = etkas ? in.models.center_etkas : in.models.center_esp;
  const auto& patient_model = etkas ? in.models.patient_etkas : in.models.patient_esp;
  const auto donor_key = hash_id(in.donor.id);

  AllocationOutcome out;
  out.k_max = k_max;
  int remaining = in.donor.kidneys;
  std::vector<char> offered(records.size(), 0);
  std::vector<char> taken(records.size(), 0);
  std::unordered_map<int, bool> center_ok;

  auto candidate_of = [&](std::size_t i) -> const Candidate& {
    return in.candidates[static_cast<std::size_t>(records[i].candidate)];
  };

  // Returns whether the center is willing; draws once per (donor, center).
  auto center_decides = [&](std::size_t i, const FeatureVector& x, bool& fresh) {
    const int center = candidate_of(i).center;
    const auto it = center_ok.find(center);
    if (it != center_ok.end()) {
      fresh = false;
      return it->second;
    }
    fresh = true;
    const double p = in.overrides.center ? *in.overrides.center : center_model.predict(x);
    const double u = in.streams.uniform(Stream::CenterDecision, donor_key,
                                        hash_id(in.centers.at(center).code));
    const bool ok = u < p;
    center_ok.emplace(center, ok);
    return ok;
  };

  auto accept = [&](std::size_t i, const FeatureVector& x, Mechanism mech, double p) {
    const auto& c = candidate_of(i);
    Acceptance a;
    a.candidate = records[i].candidate;
    a.rank = static_cast<int>(i) + 1;
    a.mechanism = mech;
    if (remaining == 2 && mech != Mechanism::Forced) {
      const double u = in.streams.uniform(Stream::DualDecision, donor_key, hash_id(c.id));
      if (simulate_dual(x, in.models.dual, u, in.overrides.dual)) {
        a.kidneys = 2;
        a.dual = true;
      }
    }
    remaining -= a.kidneys;
    taken[i] = 1;
    out.accepted.push_back(a);
    out.trace.push_back({a.candidate, Decision::Accept, mech, p});
  };

  auto offer = [&](std::size_t i, int rank, Mechanism stage) {
    const auto& c = candidate_of(i);
    const bool rescue = stage != Mechanism::Standard;
    const auto x = offer_features(in.donor, c, records[i], rank, in.list.program, rescue, in.now);
    bool fresh = false;
    if (!center_decides(i, x, fresh)) {
      if (fresh && stage == Mechanism::Standard) ++out.declines;
      out.trace.push_back({records[i].candidate, Decision::CenterDecline, stage, 0.0});
      return;
    }
    offered[i] = 1;
    const double p = in.overrides.patient ? *in.overrides.patient : patient_model.predict(x);
    const double u = in.streams.uniform(Stream::PatientDecision, donor_key, hash_id(c.id));
    if (u < p) {
      accept(i, x, stage, p);
    } else {
      if (stage == Mechanism::Standard) ++out.declines;
      out.trace.push_back({records[i].candidate, Decision::Decline, stage, p});
    }
  };

  // Standard phase: filtered list in rank order.
  int filtered_rank = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (remaining == 0 || out.declines >= k_max) break;
    if (!records[i].visible) continue;
    offer(i, ++filtered_rank, Mechanism::Standard);
  }

  // Non-standard phase: vicinity first, then original rank; filtered-out
  // candidates join here.
  if (remaining > 0) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!offered[i] && !taken[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return records[a].geo < records[b].geo;
    });
    for (auto i : order) {
      if (remaining == 0) break;
      offer(i, static_cast<int>(i) + 1, Mechanism::NonStandard);
    }
  }

  if (remaining > 0 && in.unplaced == UnplacedMode::ForceAccept) {
    while (remaining > 0) {
      std::optional<std::size_t> best;
      double best_p = -1.0;
      FeatureVector best_x;
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (taken[i]) continue;
        const auto x = offer_features(in.donor, candidate_of(i), records[i],
                                      static_cast<int>(i) + 1, in.list.program, true, in.now);
        const double p = patient_model.predict(x);
        if (p > best_p) {
          best_p = p;
          best = i;
          best_x = x;
        }
      }
      if (!best) break;
      accept(*best, best_x, Mechanism::Forced, best_p);
    }
  }
  out.unplaced = remaining;
  return out;
}

}  // namespace etk
