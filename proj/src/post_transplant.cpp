#include "etk/post_transplant.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace etk {

WeibullModel WeibullModel::from_tables(const Table& coefficients, const Table& shapes) {
  coefficients.require_columns({"feature", "coef"});
  shapes.require_columns({"country", "shape"});
  std::vector<std::pair<std::string, double>> terms;
  for (const auto& row : coefficients.rows()) terms.emplace_back(row.at("feature"), row.number("coef"));
  std::map<std::string, double> k;
  for (const auto& row : shapes.rows()) {
    const double v = row.number("shape");
    if (!(v > 0)) throw row.error("shape must be positive");
    k[row.at("country")] = v;
  }
  return WeibullModel(std::move(terms), std::move(k));
}

WeibullModel WeibullModel::load(const std::filesystem::path& coefficients,
                                const std::filesystem::path& shapes) {
  return from_tables(Table::read(coefficients), Table::read(shapes));
}

double WeibullModel::scale(const Covariates& x) const {
  double lambda = 0.0;
  for (const auto& [name, coef] : terms_) {
    if (name == "intercept") {
      lambda += coef;
      continue;
    }
    const auto it = x.find(name);
    if (it == x.end()) throw std::invalid_argument("missing covariate '" + name + "'");
    lambda += coef * it->second;
  }
  return lambda;
}

double WeibullModel::shape(const std::string& country) const {
  auto it = shapes_.find(country);
  if (it == shapes_.end()) it = shapes_.find("*");
  if (it == shapes_.end()) throw std::invalid_argument("no Weibull shape for '" + country + "'");
  return it->second;
}

double sample_failure_time(double scale, double shape, double u) {
  if (!(scale > 0)) throw std::invalid_argument("Weibull scale must be positive");
  if (!(shape > 0)) throw std::invalid_argument("Weibull shape must be positive");
  return scale * std::pow(-std::log(u), 1.0 / shape);
}

double weibull_survival(double t, double scale, double shape) {
  return std::exp(-std::pow(t / scale, shape));
}

int time_bucket(double t_days) {
  if (t_days < 180) return 0;
  if (t_days < 365) return 1;
  if (t_days < 730) return 2;
  if (t_days < 1826) return 3;
  return 4;
}

int age_bucket(int age) {
  if (age < 18) return 0;
  if (age < 40) return 1;
  if (age < 50) return 2;
  if (age < 55) return 3;
  if (age < 60) return 4;
  if (age < 65) return 5;
  if (age < 70) return 6;
  if (age < 75) return 7;
  return 8;
}

namespace {

template <std::size_t N>
int bucket_index(const std::array<std::string_view, N>& labels, const std::string& label) {
  for (std::size_t i = 0; i < N; ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

RelistCurveSet RelistCurveSet::from_table(const Table& table) {
  table.require_columns({"t_bucket", "age_bucket", "s", "survival"});
  std::map<std::pair<int, int>, std::vector<Point>> raw;
  for (const auto& row : table.rows()) {
    const int tb = bucket_index(kTimeBuckets, row.at("t_bucket"));
    const int ab = bucket_index(kAgeBuckets, row.at("age_bucket"));
    if (tb < 0) throw row.error("unknown time bucket '" + row.at("t_bucket") + "'");
    if (ab < 0) throw row.error("unknown age bucket '" + row.at("age_bucket") + "'");
    raw[{tb, ab}].push_back({row.number("s"), row.number("survival")});
  }
  RelistCurveSet set;
  for (auto& [key, pts] : raw) {
    try {
      set.set(key.first, key.second, std::move(pts));
    } catch (const std::invalid_argument& e) {
      throw InputError(table.source() + ": curve " + std::string(kTimeBuckets[key.first]) + "/" +
                       std::string(kAgeBuckets[key.second]) + ": " + e.what());
    }
  }
  return set;
}

RelistCurveSet RelistCurveSet::load(const std::filesystem::path& path) {
  return from_table(Table::read(path));
}

void RelistCurveSet::set(int t_bucket, int age_bucket, std::vector<Point> curve) {
  std::sort(curve.begin(), curve.end(), [](const Point& a, const Point& b) { return a.s < b.s; });
  double prev_survival = 1.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& p = curve[i];
    if (!(p.s >= 0.0 && p.s < 1.0)) throw std::invalid_argument("s must lie in [0,1)");
    if (i > 0 && !(p.s > curve[i - 1].s)) throw std::invalid_argument("duplicate s");
    if (!(p.survival >= 0.0 && p.survival <= prev_survival)) {
      throw std::invalid_argument("survival must be non-increasing within [0,1]");
    }
    prev_survival = p.survival;
  }
  curves_[{t_bucket, age_bucket}] = std::move(curve);
}

const std::vector<RelistCurveSet::Point>& RelistCurveSet::curve(int t_bucket, int age_bucket) const {
  const auto it = curves_.find({t_bucket, age_bucket});
  if (it == curves_.end()) {
    throw std::invalid_argument("no re-listing curve for " +
                                std::string(kTimeBuckets.at(static_cast<std::size_t>(t_bucket))) +
                                "/" +
                                std::string(kAgeBuckets.at(static_cast<std::size_t>(age_bucket))));
  }
  return it->second;
}

std::optional<double> relist_fraction(const std::vector<RelistCurveSet::Point>& curve, double u) {
  for (const auto& p : curve) {
    if (p.survival <= 1.0 - u) return p.s;
  }
  return std::nullopt;
}

std::optional<double> sample_relist_time(double t, int age, const RelistCurveSet& curves,
                                         double u) {
  if (!(t > 0)) throw std::invalid_argument("time to event must be positive");
  const auto s = relist_fraction(curves.curve(time_bucket(t), age_bucket(age)), u);
  if (!s) return std::nullopt;
  return *s * t;
}

// ---------------------------------------------------------------------------

RelistingPool::RelistingPool(std::vector<RelistEntry> entries) : entries_(std::move(entries)) {
  auto sd = [&](auto field) {
    if (entries_.size() < 2) return 1.0;
    double mean = 0;
    for (const auto& e : entries_) mean += field(e);
    mean /= static_cast<double>(entries_.size());
    double ss = 0;
    for (const auto& e : entries_) ss += (field(e) - mean) * (field(e) - mean);
    const double v = std::sqrt(ss / static_cast<double>(entries_.size() - 1));
    return v > 0 ? v : 1.0;
  };
  sd_r_ = sd([](const RelistEntry& e) { return e.r; });
  sd_t_ = sd([](const RelistEntry& e) { return e.t; });
}

RelistingPool RelistingPool::from_table(const Table& table) {
  table.require_columns({"id", "country", "age", "dialysis_days", "r", "t", "statuses"});
  std::vector<RelistEntry> entries;
  for (const auto& row : table.rows()) {
    RelistEntry e;
    e.id = row.at("id");
    e.country = row.at("country");
    e.age = static_cast<int>(row.integer("age"));
    e.dialysis_days = static_cast<int>(row.integer("dialysis_days"));
    e.r = row.number("r");
    e.t = row.number("t");
    if (!(e.r >= 0 && e.r < e.t)) throw row.error("need 0 <= r < t");
    try {
      for (const auto& item : split(row.at("statuses"), ';')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("bad status item '" + item + "'");
        e.statuses.emplace_back(std::stoi(item.substr(0, colon)),
                                parse_urgency(item.substr(colon + 1)));
      }
    } catch (const std::exception& ex) {
      throw row.error(ex.what());
    }
    if (e.statuses.empty()) throw row.error("empty status stream");
    const auto last = e.statuses.back().second;
    if (last != Urgency::R && last != Urgency::D) {
      throw row.error("status stream must end in R or D");
    }
    entries.push_back(std::move(e));
  }
  return RelistingPool(std::move(entries));
}

RelistingPool RelistingPool::load(const std::filesystem::path& path) {
  return from_table(Table::read(path));
}

std::vector<AntigenId> simulate_de_novo_immunization(const HlaDictionary& dict,
                                                     const HlaTyping& donor,
                                                     const HlaTyping& candidate, double p,
                                                     Rng& rng) {
  std::vector<AntigenId> out;
  for (auto locus : kAbdr) {
    const auto cand = candidate.at(locus).ids();
    for (auto id : donor.at(locus).ids()) {
      const auto key = dict.match_key(id);
      const bool shared = std::any_of(cand.begin(), cand.end(),
                                      [&](AntigenId c) { return dict.match_key(c) == key; });
      if (shared) continue;
      if (rng.bernoulli(p)) out.push_back(id);
    }
  }
  return out;
}

std::vector<std::size_t> relist_candidates(const RelistQuery& q, const RelistingPool& pool,
                                           const Calipers& cal) {
  const bool within = q.r < 365.0;
  std::vector<std::size_t> out;
  for (int level = 0; level < 3; ++level) {
    out.clear();
    for (std::size_t i = 0; i < pool.entries().size(); ++i) {
      const auto& e = pool.entries()[i];
      if (level < 1 && e.country != q.country) continue;
      if (level < 2 && e.within_year() != within) continue;
      if (std::abs(e.age - q.age) > cal.age_years) continue;
      if (std::abs(e.r - q.r) > cal.r_days) continue;
      if (std::abs(e.t - q.t) > cal.t_days) continue;
      if (std::abs(e.dialysis_days - q.dialysis_days) > cal.dialysis_days) continue;
      out.push_back(i);
    }
    if (out.size() >= cal.min_matches) break;
  }
  return out;
}

std::vector<std::size_t> nearest_relistings(const RelistQuery& q, const RelistingPool& pool,
                                            const std::vector<std::size_t>& matches,
                                            std::size_t nearest) {
  const auto& es = pool.entries();
  std::vector<std::pair<double, std::size_t>> dist;
  bool mahalanobis = false;
  double i11 = 0, i12 = 0, i22 = 0;  // inverse covariance
  if (matches.size() >= 2) {
    double mr = 0, mt = 0;
    for (auto i : matches) {
      mr += es[i].r;
      mt += es[i].t;
    }
    const double n = static_cast<double>(matches.size());
    mr /= n;
    mt /= n;
    double srr = 0, stt = 0, srt = 0;
    for (auto i : matches) {
      srr += (es[i].r - mr) * (es[i].r - mr);
      stt += (es[i].t - mt) * (es[i].t - mt);
      srt += (es[i].r - mr) * (es[i].t - mt);
    }
    srr /= n - 1;
    stt /= n - 1;
    srt /= n - 1;
    const double det = srr * stt - srt * srt;
    if (det > 1e-9 * srr * stt && srr > 0 && stt > 0) {
      mahalanobis = true;
      i11 = stt / det;
      i22 = srr / det;
      i12 = -srt / det;
    }
  }
  for (auto i : matches) {
    const double dr = es[i].r - q.r;
    const double dt = es[i].t - q.t;
    double d2;
    if (mahalanobis) {
      d2 = dr * dr * i11 + 2 * dr * dt * i12 + dt * dt * i22;
    } else {
      const double zr = dr / pool.sd_r();
      const double zt = dt / pool.sd_t();
      d2 = zr * zr + zt * zt;
    }
    dist.emplace_back(d2, i);
  }
  std::sort(dist.begin(), dist.end());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < dist.size() && k < nearest; ++k) out.push_back(dist[k].second);
  return out;
}

SyntheticRelisting build_synthetic_relisting(const Candidate& recipient, Date transplant_date,
                                             double t, double r, const RelistingPool& pool,
                                             const std::vector<AntigenId>& additions, Rng& rng,
                                             const std::string& new_id,
                                             const std::string& country, const Calipers& cal) {
  SyntheticRelisting out;
  if (pool.empty()) {
    out.note = "empty re-listing pool";
    return out;
  }
  const Date relist = transplant_date + static_cast<int>(std::lround(r));
  RelistQuery q;
  q.country = country;
  q.age = recipient.age_at(relist);
  q.dialysis_days = recipient.dialysis_days(transplant_date);
  q.r = r;
  q.t = t;
  const auto matches = relist_candidates(q, pool, cal);
  if (matches.empty()) {
    out.note = "no pool entry within calipers";
    return out;
  }
  const auto top = nearest_relistings(q, pool, matches, cal.nearest);
  const auto& m = pool.entries()[top[rng.index(top.size())]];
  out.match_id = m.id;

  Candidate c;
  c.id = new_id;
  c.patient_id = recipient.patient_id;
  c.center = recipient.center;
  c.blood_group = recipient.blood_group;
  c.dob = recipient.dob;
  c.hla = recipient.hla;
  c.registration = relist;
  c.prior_tx = true;
  c.previous_tx = transplant_date;
  c.synthetic = true;
  c.unacceptables = recipient.unacceptables;
  for (auto a : additions) c.unacceptables.add(a);
  c.profile = recipient.profile;
  c.mm_criteria = recipient.mm_criteria;
  c.esp_choice = recipient.esp_choice;
  c.esp_opt_in = recipient.esp_opt_in;
  c.dialysis_start = relist - m.dialysis_days;
  c.last_screening = relist;
  c.status = m.statuses.front().second;
  for (std::size_t i = 1; i < m.statuses.size(); ++i) {
    const Date when = relist + m.statuses[i].first;
    c.updates.push_back({when, UpdateType::Screening, ""});
    c.updates.push_back({when, UpdateType::Status, std::string(to_string(m.statuses[i].second))});
  }
  out.candidate = std::move(c);
  return out;
}

}  // namespace etk
