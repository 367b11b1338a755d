#include "etk/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace etk {

using nlohmann::json;

std::string_view to_string(Geography g) {
  switch (g) {
    case Geography::Local: return "local";
    case Geography::Regional: return "regional";
    case Geography::National: return "national";
    case Geography::International: return "international";
  }
  return "?";
}

GeoLevel parse_geo_level(std::string_view text) {
  if (text == "center") return GeoLevel::Center;
  if (text == "esp_subregion") return GeoLevel::EspSubregion;
  if (text == "region") return GeoLevel::Region;
  if (text == "national") return GeoLevel::National;
  if (text == "international") return GeoLevel::International;
  throw std::invalid_argument("unknown geography level '" + std::string(text) + "'");
}

std::string_view to_string(GeoLevel l) {
  switch (l) {
    case GeoLevel::Center: return "center";
    case GeoLevel::EspSubregion: return "esp_subregion";
    case GeoLevel::Region: return "region";
    case GeoLevel::National: return "national";
    case GeoLevel::International: return "international";
  }
  return "?";
}

double DistancePoints::for_geography(Geography g) const {
  switch (g) {
    case Geography::Local: return local;
    case Geography::Regional: return regional;
    case Geography::National: return national;
    case Geography::International: return 0.0;
  }
  return 0.0;
}

double PolicyConfig::balance_weight_for(const std::string& country) const {
  const auto it = balance_country_weight.find(country);
  return it == balance_country_weight.end() ? balance_weight : it->second;
}

const DistancePoints& PolicyConfig::distance_for(const std::string& donor_country) const {
  const auto it = distance_country.find(donor_country);
  return it == distance_country.end() ? distance_default : it->second;
}

const std::vector<GeoLevel>& PolicyConfig::esp_tiers_for(const std::string& donor_country) const {
  const auto it = esp_tiers_country.find(donor_country);
  return it == esp_tiers_country.end() ? esp_tiers_default : it->second;
}

// ---------------------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  void expect_keys(const json& obj, const std::string& path,
                   std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail(path.empty() ? key : path + "." + key, "unknown key");
      }
    }
  }

  [[nodiscard]] double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }
  [[nodiscard]] bool boolean(const json& v, const std::string& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }
  [[nodiscard]] std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  void read(const json& obj, const std::string& path, std::string_view key, double& out) const {
    if (obj.contains(key)) out = number(obj.at(key), path + std::string(key));
  }
  void read(const json& obj, const std::string& path, std::string_view key, int& out) const {
    if (!obj.contains(key)) return;
    const double v = number(obj.at(key), path + std::string(key));
    if (v != std::floor(v)) fail(path + std::string(key), "expected an integer");
    out = static_cast<int>(v);
  }
  void read(const json& obj, const std::string& path, std::string_view key, bool& out) const {
    if (obj.contains(key)) out = boolean(obj.at(key), path + std::string(key));
  }

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw InputError(source_ + ": " + path + ": " + what);
  }

 private:
  std::string source_;
};

DistancePoints read_distance(const Reader& r, const json& obj, const std::string& path,
                             DistancePoints base) {
  r.expect_keys(obj, path, {"local", "regional", "national"});
  r.read(obj, path + ".", "local", base.local);
  r.read(obj, path + ".", "regional", base.regional);
  r.read(obj, path + ".", "national", base.national);
  return base;
}

std::vector<GeoLevel> read_levels(const Reader& r, const json& v, const std::string& path) {
  if (!v.is_array()) r.fail(path, "expected a list of geography levels");
  std::vector<GeoLevel> out;
  for (const auto& item : v) {
    try {
      out.push_back(parse_geo_level(r.string(item, path)));
    } catch (const std::invalid_argument& e) {
      r.fail(path, e.what());
    }
  }
  return out;
}

}  // namespace

PolicyConfig parse_policy(const std::string& json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": " + e.what());
  }
  const Reader r(source);
  PolicyConfig cfg;
  r.expect_keys(doc, "",
                {"name", "hla", "dialysis_points_per_year", "pediatric", "hu_points", "mmp",
                 "blood_group_frequency", "sliding_scale", "age_filter", "balance", "distance",
                 "eligibility", "esp", "members", "description"});
  if (doc.contains("name")) cfg.name = r.string(doc["name"], "name");
  r.read(doc, "", "dialysis_points_per_year", cfg.dialysis_points_per_year);
  r.read(doc, "", "hu_points", cfg.hu_points);

  if (doc.contains("hla")) {
    const auto& h = doc["hla"];
    r.expect_keys(h, "hla", {"base", "mismatch_points", "pediatric_double"});
    r.read(h, "hla.", "base", cfg.hla_base);
    r.read(h, "hla.", "pediatric_double", cfg.pediatric_hla_double);
    if (h.contains("mismatch_points")) {
      const auto& m = h["mismatch_points"];
      r.expect_keys(m, "hla.mismatch_points", {"A", "B", "DR"});
      r.read(m, "hla.mismatch_points.", "A", cfg.hla_mismatch_points[0]);
      r.read(m, "hla.mismatch_points.", "B", cfg.hla_mismatch_points[1]);
      r.read(m, "hla.mismatch_points.", "DR", cfg.hla_mismatch_points[2]);
    }
  }
  if (doc.contains("pediatric")) {
    const auto& p = doc["pediatric"];
    r.expect_keys(p, "pediatric", {"age_limit", "bonus", "tier"});
    r.read(p, "pediatric.", "age_limit", cfg.pediatric_age);
    r.read(p, "pediatric.", "bonus", cfg.pediatric_bonus);
    r.read(p, "pediatric.", "tier", cfg.pediatric_tier);
  }
  if (doc.contains("mmp")) {
    const auto& m = doc["mmp"];
    r.expect_keys(m, "mmp", {"weight", "p_leq1mm", "use_hmpp", "hmpp_exclude_unacceptable"});
    r.read(m, "mmp.", "weight", cfg.mmp_weight);
    r.read(m, "mmp.", "use_hmpp", cfg.use_hmpp);
    r.read(m, "mmp.", "hmpp_exclude_unacceptable", cfg.hmpp_exclude_unacceptable);
    if (m.contains("p_leq1mm")) {
      const auto s = r.string(m["p_leq1mm"], "mmp.p_leq1mm");
      if (s == "analytic") cfg.mmp_source = PleqSource::Analytic;
      else if (s == "empirical") cfg.mmp_source = PleqSource::Empirical;
      else r.fail("mmp.p_leq1mm", "expected 'analytic' or 'empirical'");
    }
  }
  if (doc.contains("blood_group_frequency")) {
    const auto& b = doc["blood_group_frequency"];
    r.expect_keys(b, "blood_group_frequency", {"A", "B", "AB", "O"});
    for (auto bg : {BloodGroup::A, BloodGroup::B, BloodGroup::AB, BloodGroup::O}) {
      r.read(b, "blood_group_frequency.", to_string(bg),
             cfg.blood_group_frequency[static_cast<std::size_t>(bg)]);
    }
  }
  if (doc.contains("sliding_scale")) {
    const auto& s = doc["sliding_scale"];
    r.expect_keys(s, "sliding_scale", {"enabled", "weight", "base"});
    r.read(s, "sliding_scale.", "enabled", cfg.sliding_scale);
    r.read(s, "sliding_scale.", "weight", cfg.sliding_weight);
    r.read(s, "sliding_scale.", "base", cfg.sliding_base);
  }
  if (doc.contains("age_filter")) {
    const auto& a = doc["age_filter"];
    r.expect_keys(a, "age_filter", {"enabled", "curve"});
    r.read(a, "age_filter.", "enabled", cfg.age_filter);
    if (a.contains("curve")) {
      const auto& c = a["curve"];
      if (!c.is_array()) r.fail("age_filter.curve", "expected a list of [difference, fraction]");
      cfg.age_filter_curve.clear();
      for (const auto& pt : c) {
        if (!pt.is_array() || pt.size() != 2) {
          r.fail("age_filter.curve", "each point must be [difference, fraction]");
        }
        cfg.age_filter_curve.emplace_back(r.number(pt[0], "age_filter.curve"),
                                          r.number(pt[1], "age_filter.curve"));
      }
    }
  }
  if (doc.contains("balance")) {
    const auto& b = doc["balance"];
    r.expect_keys(b, "balance", {"weight", "country_weights"});
    r.read(b, "balance.", "weight", cfg.balance_weight);
    if (b.contains("country_weights")) {
      const auto& w = b["country_weights"];
      if (!w.is_object()) r.fail("balance.country_weights", "expected an object");
      for (const auto& [k, v] : w.items()) {
        cfg.balance_country_weight[k] = r.number(v, "balance.country_weights." + k);
      }
    }
  }
  if (doc.contains("distance")) {
    const auto& d = doc["distance"];
    r.expect_keys(d, "distance", {"default", "countries"});
    if (d.contains("default")) {
      cfg.distance_default = read_distance(r, d["default"], "distance.default", cfg.distance_default);
    }
    if (d.contains("countries")) {
      const auto& c = d["countries"];
      if (!c.is_object()) r.fail("distance.countries", "expected an object");
      for (const auto& [k, v] : c.items()) {
        cfg.distance_country[k] =
            read_distance(r, v, "distance.countries." + k, cfg.distance_default);
      }
    }
  }
  if (doc.contains("eligibility")) {
    const auto& e = doc["eligibility"];
    r.expect_keys(e, "eligibility", {"screening_max_days", "filter_profile", "filter_mm_criteria"});
    r.read(e, "eligibility.", "screening_max_days", cfg.screening_max_days);
    r.read(e, "eligibility.", "filter_profile", cfg.filter_profile);
    r.read(e, "eligibility.", "filter_mm_criteria", cfg.filter_mm_criteria);
  }
  if (doc.contains("esp")) {
    const auto& e = doc["esp"];
    r.expect_keys(e, "esp",
                  {"donor_min_age", "candidate_min_age", "hu_subtier", "kaoo_subtier", "tiers"});
    r.read(e, "esp.", "donor_min_age", cfg.esp_donor_min_age);
    r.read(e, "esp.", "candidate_min_age", cfg.esp_candidate_min_age);
    r.read(e, "esp.", "hu_subtier", cfg.esp_hu_subtier);
    r.read(e, "esp.", "kaoo_subtier", cfg.esp_kaoo_subtier);
    if (e.contains("tiers")) {
      const auto& t = e["tiers"];
      if (!t.is_object()) r.fail("esp.tiers", "expected an object");
      for (const auto& [k, v] : t.items()) {
        if (k == "default") cfg.esp_tiers_default = read_levels(r, v, "esp.tiers.default");
        else cfg.esp_tiers_country[k] = read_levels(r, v, "esp.tiers." + k);
      }
    }
  }
  if (doc.contains("members")) {
    const auto& m = doc["members"];
    if (!m.is_array()) r.fail("members", "expected a list of country codes");
    cfg.members.clear();
    for (const auto& v : m) cfg.members.push_back(r.string(v, "members"));
  }
  return cfg;
}

PolicyConfig load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_policy(buf.str(), path.string());
}

std::string policy_to_json(const PolicyConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  doc["hla"] = {{"base", cfg.hla_base},
                {"mismatch_points",
                 {{"A", cfg.hla_mismatch_points[0]},
                  {"B", cfg.hla_mismatch_points[1]},
                  {"DR", cfg.hla_mismatch_points[2]}}},
                {"pediatric_double", cfg.pediatric_hla_double}};
  doc["dialysis_points_per_year"] = cfg.dialysis_points_per_year;
  doc["pediatric"] = {
      {"age_limit", cfg.pediatric_age}, {"bonus", cfg.pediatric_bonus}, {"tier", cfg.pediatric_tier}};
  doc["hu_points"] = cfg.hu_points;
  doc["mmp"] = {{"weight", cfg.mmp_weight},
                {"p_leq1mm", cfg.mmp_source == PleqSource::Analytic ? "analytic" : "empirical"},
                {"use_hmpp", cfg.use_hmpp},
                {"hmpp_exclude_unacceptable", cfg.hmpp_exclude_unacceptable}};
  for (auto bg : {BloodGroup::A, BloodGroup::B, BloodGroup::AB, BloodGroup::O}) {
    doc["blood_group_frequency"][std::string(to_string(bg))] =
        cfg.blood_group_frequency[static_cast<std::size_t>(bg)];
  }
  doc["sliding_scale"] = {
      {"enabled", cfg.sliding_scale}, {"weight", cfg.sliding_weight}, {"base", cfg.sliding_base}};
  json curve = json::array();
  for (const auto& [x, y] : cfg.age_filter_curve) curve.push_back({x, y});
  doc["age_filter"] = {{"enabled", cfg.age_filter}, {"curve", curve}};
  doc["balance"] = {{"weight", cfg.balance_weight},
                    {"country_weights", json(cfg.balance_country_weight)}};
  auto dist = [](const DistancePoints& d) {
    return json{{"local", d.local}, {"regional", d.regional}, {"national", d.national}};
  };
  doc["distance"]["default"] = dist(cfg.distance_default);
  doc["distance"]["countries"] = json::object();
  for (const auto& [k, v] : cfg.distance_country) doc["distance"]["countries"][k] = dist(v);
  doc["eligibility"] = {{"screening_max_days", cfg.screening_max_days},
                        {"filter_profile", cfg.filter_profile},
                        {"filter_mm_criteria", cfg.filter_mm_criteria}};
  auto levels = [](const std::vector<GeoLevel>& v) {
    json a = json::array();
    for (auto l : v) a.push_back(std::string(to_string(l)));
    return a;
  };
  doc["esp"] = {{"donor_min_age", cfg.esp_donor_min_age},
                {"candidate_min_age", cfg.esp_candidate_min_age},
                {"hu_subtier", cfg.esp_hu_subtier},
                {"kaoo_subtier", cfg.esp_kaoo_subtier}};
  doc["esp"]["tiers"]["default"] = levels(cfg.esp_tiers_default);
  for (const auto& [k, v] : cfg.esp_tiers_country) doc["esp"]["tiers"][k] = levels(v);
  doc["members"] = cfg.members;
  return doc.dump(2);
}

std::vector<std::string> validate(const PolicyConfig& cfg) {
  std::vector<std::string> errors;
  auto finite = [&](double v, const std::string& name) {
    if (!std::isfinite(v)) errors.push_back(name + " must be finite");
  };
  finite(cfg.hla_base, "hla.base");
  for (std::size_t i = 0; i < 3; ++i) {
    finite(cfg.hla_mismatch_points[i], "hla.mismatch_points." + std::string(to_string(kAbdr[i])));
  }
  finite(cfg.dialysis_points_per_year, "dialysis_points_per_year");
  finite(cfg.pediatric_bonus, "pediatric.bonus");
  finite(cfg.hu_points, "hu_points");
  finite(cfg.mmp_weight, "mmp.weight");
  finite(cfg.balance_weight, "balance.weight");
  for (const auto& [k, v] : cfg.balance_country_weight) finite(v, "balance.country_weights." + k);
  for (const auto& [k, v] : cfg.distance_country) {
    finite(v.local, "distance." + k);
    finite(v.regional, "distance." + k);
    finite(v.national, "distance." + k);
  }
  for (std::size_t i = 0; i < kNumBloodGroups; ++i) {
    const double f = cfg.blood_group_frequency[i];
    if (!(f >= 0.0 && f <= 1.0)) {
      errors.push_back("blood_group_frequency." +
                       std::string(to_string(static_cast<BloodGroup>(i))) + " must lie in [0,1]");
    }
  }
  if (cfg.sliding_scale) {
    finite(cfg.sliding_weight, "sliding_scale.weight");
    if (!(cfg.sliding_base > 1.0)) errors.push_back("sliding_scale.base must exceed 1");
  }
  if (cfg.age_filter_curve.empty()) errors.push_back("age_filter.curve must not be empty");
  for (std::size_t i = 0; i < cfg.age_filter_curve.size(); ++i) {
    const auto& [x, y] = cfg.age_filter_curve[i];
    if (!std::isfinite(x)) errors.push_back("age_filter.curve: difference must be finite");
    if (!(y >= 0.0 && y <= 1.0)) {
      errors.push_back("age_filter.curve: fraction " + format_number(y) + " outside [0,1]");
    }
    if (i > 0 && !(x > cfg.age_filter_curve[i - 1].first)) {
      errors.push_back("age_filter.curve: differences must be strictly increasing");
    }
  }
  if (cfg.screening_max_days < 0) errors.push_back("eligibility.screening_max_days must be >= 0");
  if (cfg.pediatric_age < 0) errors.push_back("pediatric.age_limit must be >= 0");
  if (cfg.members.empty()) errors.push_back("members must not be empty");
  auto check_levels = [&](const std::vector<GeoLevel>& v, const std::string& name) {
    if (v.empty()) errors.push_back("esp.tiers." + name + " must not be empty");
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (!(v[i] > v[i - 1])) errors.push_back("esp.tiers." + name + " must widen monotonically");
    }
  };
  check_levels(cfg.esp_tiers_default, "default");
  for (const auto& [k, v] : cfg.esp_tiers_country) check_levels(v, k);
  return errors;
}

double sliding_scale_points(double vpra, double weight, double base) {
  if (!(base > 1.0)) throw std::invalid_argument("sliding-scale base must exceed 1");
  return weight * (std::pow(base, vpra) - 1.0) / (base - 1.0);
}

double sliding_scale_points(double vpra, const PolicyConfig& cfg) {
  return sliding_scale_points(vpra, cfg.sliding_weight, cfg.sliding_base);
}

double interpolate_curve(const std::vector<std::pair<double, double>>& curve, double x) {
  if (curve.empty()) return 1.0;
  if (x <= curve.front().first) return curve.front().second;
  if (x >= curve.back().first) return curve.back().second;
  const auto hi = std::upper_bound(curve.begin(), curve.end(), x,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto lo = hi - 1;
  const double w = (x - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

double age_filter_fraction(double candidate_age, double donor_age, const PolicyConfig& cfg) {
  if (!cfg.age_filter) return 1.0;
  return std::clamp(interpolate_curve(cfg.age_filter_curve, candidate_age - donor_age), 0.0, 1.0);
}

}  // namespace etk
