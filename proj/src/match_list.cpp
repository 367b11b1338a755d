#include "etk/match_list.hpp"

#include <algorithm>
#include <cmath>

namespace etk {

std::string describe_reasons(std::uint32_t reasons) {
  static constexpr std::pair<Reason, std::string_view> kNames[] = {
      {kBloodGroup, "BLOOD_GROUP"},         {kStatusInactive, "STATUS_INACTIVE"},
      {kHlaUnknown, "HLA_UNKNOWN"},         {kUnacceptable, "UNACCEPTABLE"},
      {kScreeningStale, "SCREENING_STALE"}, {kGermanEspChoice, "GERMAN_ESP_CHOICE"},
      {kAmActive, "AM_ACTIVE"},             {kEspAge, "ESP_AGE"},
      {kDonorHlaUnknown, "DONOR_HLA_UNKNOWN"}, {kNotListed, "NOT_LISTED"},
  };
  if (reasons == kEligible) return "ELIGIBLE";
  std::string out;
  for (const auto& [r, name] : kNames) {
    if (reasons & r) {
      if (!out.empty()) out += '|';
      out += name;
    }
  }
  return out;
}

double mmp_points(double probability, double weight) {
  return std::floor(weight * probability + 0.5);
}

void refresh_derived(Candidate& c, const HlaResources& hla, const PolicyConfig& cfg) {
  c.vpra = hla.panel ? compute_vpra(c.unacceptables, *hla.panel) : 0.0;
  if (c.mmp_override) {
    c.mmp = *c.mmp_override;
    c.hmpp = *c.mmp_override;
    return;
  }
  if (!c.hla.typed_abdr() || !hla.dict) {
    c.mmp = 0.0;
    c.hmpp = 0.0;
    return;
  }
  double p = 0.0;
  if (cfg.mmp_source == PleqSource::Analytic && hla.frequencies) {
    p = p_leq1mm_analytic(*hla.dict, c.hla, *hla.frequencies);
  } else if (hla.panel) {
    p = p_leq1mm_empirical(*hla.dict, c.hla, c.unacceptables, *hla.panel, false);
  }
  c.mmp = compute_mmp({cfg.blood_group_frequency[static_cast<std::size_t>(c.blood_group)],
                       c.vpra, p});
  c.hmpp = 0.0;
  if (cfg.use_hmpp && hla.panel) {
    c.hmpp = compute_hmpp_fraction(p_leq1mm_empirical(*hla.dict, c.hla, c.unacceptables,
                                                      *hla.panel, cfg.hmpp_exclude_unacceptable));
  }
}

Geography geography(const CenterRegistry& centers, int candidate_center, int donor_center) {
  if (candidate_center == donor_center) return Geography::Local;
  const auto& a = centers.at(candidate_center);
  const auto& b = centers.at(donor_center);
  if (a.country != b.country) return Geography::International;
  if (a.region == b.region) return Geography::Regional;
  return Geography::National;
}

Program program_for(const Donor& d, const PolicyConfig& cfg) {
  return d.age >= cfg.esp_donor_min_age ? Program::ESP : Program::ETKAS;
}

namespace {

bool screening_valid(const Candidate& c, Date now, const PolicyConfig& cfg) {
  return c.last_screening && (now - *c.last_screening) <= cfg.screening_max_days;
}

bool is_german(const Candidate& c, const MatchContext& ctx) {
  return ctx.centers.at(c.center).country == "DE";
}

}  // namespace

bool profile_accepts(const AllocationProfile& p, const Donor& d) {
  if (d.age < p.min_donor_age || d.age > p.max_donor_age) return false;
  if (d.dcd && !p.accept_dcd) return false;
  if (d.hcv && !p.accept_hcv) return false;
  if (d.hbv && !p.accept_hbv) return false;
  if (d.extended_criteria && !p.accept_extended) return false;
  return true;
}

Eligibility etkas_eligible(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx) {
  Eligibility e;
  if (!c.listed) e.reasons |= kNotListed;
  if (c.blood_group != d.blood_group) e.reasons |= kBloodGroup;
  if (!is_active(c.status)) e.reasons |= kStatusInactive;
  if (!c.hla.typed_abdr()) e.reasons |= kHlaUnknown;
  if (!d.hla.typed_abdr()) e.reasons |= kDonorHlaUnknown;
  else if (carries_any(ctx.dict, d.hla, c.unacceptables)) e.reasons |= kUnacceptable;
  if (!screening_valid(c, now, ctx.policy)) e.reasons |= kScreeningStale;
  if (is_german(c, ctx) && c.age_at(now) >= ctx.policy.esp_candidate_min_age &&
      c.esp_choice != GermanChoice::ETKAS) {
    e.reasons |= kGermanEspChoice;
  }
  if (c.am) e.reasons |= kAmActive;
  return e;
}

bool etkas_filtered(const Candidate& c, const Donor& d, const MismatchCount& mm,
                    const MatchContext& ctx) {
  if (ctx.policy.filter_profile && !profile_accepts(c.profile, d)) return false;
  if (ctx.policy.filter_mm_criteria) {
    for (const auto& p : c.mm_criteria) {
      if (p.matches(mm)) return false;
    }
  }
  return true;
}

TierKey etkas_tier(const Candidate& c, const Donor& d, const MismatchCount& mm, Date now,
                   const PolicyConfig& cfg) {
  if (mm.abdr() == 0) {
    const bool donor_homozygous = homozygosity_level(d.hla).level == 3;
    return {3, donor_homozygous ? homozygosity_level(c.hla).level : 0};
  }
  if (cfg.pediatric_tier && d.age < cfg.pediatric_age && c.age_at(now) < cfg.pediatric_age) {
    return {2, 0};
  }
  return {1, 0};
}

EtkasPoints etkas_points(const Candidate& c, const Donor& d, const MismatchCount& mm, Date now,
                         const MatchContext& ctx) {
  const auto& cfg = ctx.policy;
  EtkasPoints out;
  auto& p = out.parts;
  const int age = c.age_at(now);
  const bool pediatric = age < cfg.pediatric_age;

  p.dialysis = cfg.dialysis_points_per_year * c.dialysis_days(now) / kDaysPerYear;
  double hla = cfg.hla_base + cfg.hla_mismatch_points[0] * mm.a() +
               cfg.hla_mismatch_points[1] * mm.b() + cfg.hla_mismatch_points[2] * mm.dr();
  hla = std::max(0.0, hla);
  if (pediatric && cfg.pediatric_hla_double) hla *= 2.0;
  p.hla = hla;
  p.pediatric = pediatric ? cfg.pediatric_bonus : 0.0;
  p.hu = c.status == Urgency::HU ? cfg.hu_points : 0.0;
  p.mmp = mmp_points(cfg.use_hmpp ? c.hmpp : c.mmp, cfg.mmp_weight);
  if (cfg.sliding_scale) p.vpra = sliding_scale_points(c.vpra, cfg);

  const auto& cand_country = ctx.centers.at(c.center).country;
  const auto& donor_country = ctx.centers.at(d.center).country;
  if (ctx.ledger.knows(cand_country)) {
    p.balance = ctx.ledger.balance_points(cand_country, d.age, cfg.balance_weight_for(cand_country));
  }
  p.distance = cfg.distance_for(donor_country).for_geography(geography(ctx.centers, c.center, d.center));

  out.age_fraction = age_filter_fraction(age, d.age, cfg);
  out.total = out.age_fraction * p.sum();
  return out;
}

Eligibility esp_eligible(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx) {
  Eligibility e;
  if (!c.listed) e.reasons |= kNotListed;
  if (!is_active(c.status)) e.reasons |= kStatusInactive;
  if (c.age_at(now) < ctx.policy.esp_candidate_min_age && !c.esp_opt_in) e.reasons |= kEspAge;
  if (c.blood_group != d.blood_group) e.reasons |= kBloodGroup;
  if (!c.hla.typed_abdr()) e.reasons |= kHlaUnknown;
  if (!screening_valid(c, now, ctx.policy)) e.reasons |= kScreeningStale;
  if (!c.unacceptables.empty()) {
    if (!d.hla.typed_abdr()) e.reasons |= kDonorHlaUnknown;
    else if (carries_any(ctx.dict, d.hla, c.unacceptables)) e.reasons |= kUnacceptable;
  }
  if (c.am) e.reasons |= kAmActive;
  return e;
}

bool esp_filtered(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx) {
  if (c.age_at(now) < ctx.policy.esp_candidate_min_age) return false;
  if (is_german(c, ctx) && c.esp_choice == GermanChoice::ETKAS) return false;
  if (ctx.policy.filter_profile && !profile_accepts(c.profile, d)) return false;
  return true;
}

EspRank esp_tier_and_points(const Candidate& c, const Donor& d, Date now, const MatchContext& ctx) {
  const auto& cc = ctx.centers.at(c.center);
  const auto& dc = ctx.centers.at(d.center);
  const auto& levels = ctx.policy.esp_tiers_for(dc.country);
  const bool same_country = cc.country == dc.country;
  int index = static_cast<int>(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    bool hit = false;
    switch (levels[i]) {
      case GeoLevel::Center: hit = c.center == d.center; break;
      case GeoLevel::EspSubregion: hit = same_country && cc.esp_subregion == dc.esp_subregion; break;
      case GeoLevel::Region: hit = same_country && cc.region == dc.region; break;
      case GeoLevel::National: hit = same_country; break;
      case GeoLevel::International: hit = true; break;
    }
    if (hit) {
      index = static_cast<int>(i);
      break;
    }
  }
  EspRank r;
  r.geo_level = index;
  const bool senior = c.age_at(now) >= ctx.policy.esp_candidate_min_age;
  r.tier.major = (static_cast<int>(levels.size()) - index) * 2 + (senior ? 1 : 0);
  if (ctx.policy.esp_hu_subtier && c.status == Urgency::HU) r.tier.minor = 2;
  else if (ctx.policy.esp_kaoo_subtier && c.kaoo) r.tier.minor = 1;
  r.points = c.dialysis_days(now);
  return r;
}

bool ranks_before(const MatchRecord& a, const MatchRecord& b) {
  if (a.tier != b.tier) return a.tier > b.tier;
  if (a.total != b.total) return a.total > b.total;
  if (a.austrian_key != b.austrian_key) return a.austrian_key > b.austrian_key;
  if (a.registration != b.registration) return a.registration < b.registration;
  return a.id < b.id;
}

std::vector<const MatchRecord*> MatchList::filtered() const {
  std::vector<const MatchRecord*> out;
  for (const auto& r : records) {
    if (r.visible) out.push_back(&r);
  }
  return out;
}

MatchList build_match_list(const Donor& d, std::span<const Candidate> candidates, Date now,
                           const MatchContext& ctx, Program program, std::span<const int> pool) {
  MatchList list;
  list.program = program;
  const bool donor_typed = d.hla.typed_abdr();
  const auto donor_group = donor_age_group(d.age);
  auto consider = [&](int i) {
    const auto& c = candidates[static_cast<std::size_t>(i)];
    if (!c.listed || c.blood_group != d.blood_group) return;
    MatchRecord rec;
    rec.candidate = i;
    rec.id = c.id;
    rec.registration = c.registration;
    rec.geo = geography(ctx.centers, c.center, d.center);
    const auto& country = ctx.centers.at(c.center).country;
    if (country == kAustria) {
      rec.austrian_key = ctx.ledger.regional_export(ctx.centers.at(c.center).region, donor_group);
    }
    if (program == Program::ETKAS) {
      if (!etkas_eligible(c, d, now, ctx).ok()) return;
      const auto mm = count_mismatches(ctx.dict, d.hla, c.hla);
      rec.mm = mm;
      rec.tier = etkas_tier(c, d, mm, now, ctx.policy);
      const auto pts = etkas_points(c, d, mm, now, ctx);
      rec.parts = pts.parts;
      rec.age_fraction = pts.age_fraction;
      rec.total = pts.total;
      rec.visible = etkas_filtered(c, d, mm, ctx);
    } else {
      if (!esp_eligible(c, d, now, ctx).ok()) return;
      if (donor_typed && c.hla.typed_abdr()) rec.mm = count_mismatches(ctx.dict, d.hla, c.hla);
      const auto r = esp_tier_and_points(c, d, now, ctx);
      rec.tier = r.tier;
      rec.parts.dialysis = r.points;
      rec.total = r.points;
      rec.visible = esp_filtered(c, d, now, ctx);
    }
    list.records.push_back(std::move(rec));
  };
  if (pool.empty()) {
    for (std::size_t i = 0; i < candidates.size(); ++i) consider(static_cast<int>(i));
  } else {
    for (int i : pool) consider(i);
  }
  std::sort(list.records.begin(), list.records.end(), ranks_before);
  return list;
}

void write_match_list(std::ostream& out, const MatchList& list, std::span<const Candidate> cands,
                      const Donor& d, Date now, const MatchContext& ctx, bool filtered_only) {
  if (list.program == Program::ETKAS) {
    TableWriter w(out, {"tier", "country", "center", "candidate", "mm", "dialysis_years", "rank",
                        "total", "dialysis", "hla", "pediatric", "hu", "balance", "distance",
                        "mmp", "vpra", "filtered"});
    int rank = 0;
    for (const auto& r : list.records) {
      if (filtered_only && !r.visible) continue;
      const auto& c = cands[static_cast<std::size_t>(r.candidate)];
      const auto& center = ctx.centers.at(c.center);
      auto pts = [](double v) { return format_number(std::floor(v + 0.5)); };
      char years[16];
      std::snprintf(years, sizeof years, "%.1f", c.dialysis_days(now) / kDaysPerYear);
      w.row({r.tier.major == 3 ? "0MM" : (r.tier.major == 2 ? "PED" : ">0MM"), center.country,
             center.code, c.id, r.mm ? r.mm->code() : "", years, std::to_string(++rank),
             pts(r.total), pts(r.parts.dialysis), pts(r.parts.hla), pts(r.parts.pediatric),
             pts(r.parts.hu), pts(r.parts.balance), pts(r.parts.distance), pts(r.parts.mmp),
             pts(r.parts.vpra), r.visible ? "1" : "0"});
    }
  } else {
    TableWriter w(out, {"country", "donor_region", "center", "candidate", "dialysis_days", "rank",
                        "total", "tier", "filtered"});
    int rank = 0;
    const auto& dc = ctx.centers.at(d.center);
    for (const auto& r : list.records) {
      if (filtered_only && !r.visible) continue;
      const auto& c = cands[static_cast<std::size_t>(r.candidate)];
      const auto& center = ctx.centers.at(c.center);
      w.row({center.country, dc.region, center.code, c.id,
             std::to_string(c.dialysis_days(now)), std::to_string(++rank),
             format_number(r.total), std::to_string(r.tier.major) + "." + std::to_string(r.tier.minor),
             r.visible ? "1" : "0"});
    }
  }
}

}  // namespace etk
