#include "etk/hla.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

namespace etk {

std::string_view to_string(Locus locus) {
  switch (locus) {
    case Locus::A: return "A";
    case Locus::B: return "B";
    case Locus::DR: return "DR";
    case Locus::DQ: return "DQ";
  }
  return "?";
}

std::optional<Locus> parse_locus(std::string_view text) {
  if (text == "A") return Locus::A;
  if (text == "B") return Locus::B;
  if (text == "DR") return Locus::DR;
  if (text == "DQ") return Locus::DQ;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// HlaDictionary

HlaDictionary HlaDictionary::from_table(const Table& table) {
  table.require_columns({"antigen", "locus"});
  HlaDictionary dict;
  for (const auto& row : table.rows()) {
    const auto locus = parse_locus(row.at("locus"));
    if (!locus) throw row.error("unknown locus '" + row.at("locus") + "'");
    if (dict.find(row.at("antigen"))) throw row.error("duplicate antigen '" + row.at("antigen") + "'");
    dict.add(row.at("antigen"), *locus, row.opt("broad").value_or(""));
  }
  for (const auto& e : dict.entries_) {
    if (!dict.find(e.broad_code)) {
      throw InputError(table.source() + ": antigen '" + e.code + "' names unknown broad '" +
                       e.broad_code + "'");
    }
    if (dict.locus(dict.resolve(e.broad_code)) != e.locus) {
      throw InputError(table.source() + ": antigen '" + e.code + "' and its broad differ in locus");
    }
  }
  return dict;
}

HlaDictionary HlaDictionary::load(const std::filesystem::path& path) {
  return from_table(Table::read(path));
}

void HlaDictionary::add(std::string_view code, Locus locus, std::string_view broad) {
  const auto id = static_cast<AntigenId>(entries_.size());
  entries_.push_back({std::string(code), locus, std::string(broad.empty() ? code : broad)});
  index_.emplace(std::string(code), id);
}

std::optional<AntigenId> HlaDictionary::find(std::string_view code) const {
  const auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AntigenId HlaDictionary::resolve(std::string_view code) const {
  if (auto id = find(code)) return *id;
  throw UnknownAntigen(std::string(code));
}

AntigenId HlaDictionary::broad(AntigenId id) const { return resolve(entries_.at(id).broad_code); }

AntigenId HlaDictionary::match_key(AntigenId id) const {
  const auto l = locus(id);
  return (l == Locus::A || l == Locus::B) ? broad(id) : id;
}

// ---------------------------------------------------------------------------
// HlaTyping

HlaTyping HlaTyping::parse(const HlaDictionary& dict, std::string_view codes) {
  std::array<std::vector<std::string>, kNumLoci> by_locus;
  std::istringstream in{std::string(codes)};
  std::string code;
  while (in >> code) {
    const auto id = dict.resolve(code);
    by_locus[static_cast<std::size_t>(dict.locus(id))].push_back(code);
  }
  HlaTyping t;
  for (std::size_t l = 0; l < kNumLoci; ++l) {
    const auto& v = by_locus[l];
    if (v.empty()) continue;
    if (v.size() > 2) {
      throw std::invalid_argument("more than two antigens at locus " +
                                  std::string(etk::to_string(static_cast<Locus>(l))));
    }
    t.set(dict, static_cast<Locus>(l), v[0], v.size() > 1 ? std::string_view(v[1]) : "");
  }
  return t;
}

void HlaTyping::set(const HlaDictionary& dict, Locus locus, std::string_view first,
                    std::string_view second) {
  auto checked = [&](std::string_view c) {
    const auto id = dict.resolve(c);
    if (dict.locus(id) != locus) {
      throw std::invalid_argument("antigen '" + std::string(c) + "' is not at locus " +
                                  std::string(etk::to_string(locus)));
    }
    return id;
  };
  const auto a = checked(first);
  std::optional<AntigenId> b;
  if (!second.empty()) b = checked(second);
  set_ids(locus, a, b);
}

void HlaTyping::set_ids(Locus locus, AntigenId first, std::optional<AntigenId> second) {
  auto& lt = loci_[static_cast<std::size_t>(locus)];
  lt.antigens = {first, first};
  lt.count = 1;
  if (second && *second != first) {
    lt.antigens[1] = *second;
    lt.count = 2;
    if (lt.antigens[1] < lt.antigens[0]) std::swap(lt.antigens[0], lt.antigens[1]);
  } else {
    lt.antigens[1] = AntigenId{0};
  }
}

bool HlaTyping::typed_abdr() const {
  return typed(Locus::A) && typed(Locus::B) && typed(Locus::DR);
}

std::string HlaTyping::to_string(const HlaDictionary& dict) const {
  std::string out;
  for (const auto& lt : loci_) {
    for (auto id : lt.ids()) {
      if (!out.empty()) out += ' ';
      out += dict.code(id);
    }
  }
  return out;
}

std::string MismatchCount::code() const {
  return std::to_string(a()) + std::to_string(b()) + std::to_string(dr());
}

// ---------------------------------------------------------------------------
// Mismatch counting

namespace {

// Distinct match keys at one locus; returns the count (0..2).
int locus_keys(const HlaDictionary& dict, const LocusTyping& lt, std::array<AntigenId, 2>& out) {
  int n = 0;
  for (auto id : lt.ids()) {
    const auto k = dict.match_key(id);
    if (n == 0 || out[0] != k) out[static_cast<std::size_t>(n++)] = k;
  }
  return n;
}

int count_locus(const AntigenId* donor, int nd, const AntigenId* cand, int nc) {
  int mm = 0;
  for (int i = 0; i < nd; ++i) {
    bool found = false;
    for (int j = 0; j < nc; ++j) found = found || donor[i] == cand[j];
    mm += found ? 0 : 1;
  }
  return mm;
}

}  // namespace

MismatchCount count_mismatches(const HlaDictionary& dict, const HlaTyping& donor,
                               const HlaTyping& candidate, std::span<const Locus> loci) {
  MismatchCount out;
  for (auto l : loci) {
    if (!donor.typed(l) || !candidate.typed(l)) {
      throw std::invalid_argument("typing missing at locus " + std::string(to_string(l)));
    }
    std::array<AntigenId, 2> dk{}, ck{};
    const int nd = locus_keys(dict, donor.at(l), dk);
    const int nc = locus_keys(dict, candidate.at(l), ck);
    out.per_locus[static_cast<std::size_t>(l)] =
        static_cast<std::uint8_t>(count_locus(dk.data(), nd, ck.data(), nc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unacceptables and vPRA

UnacceptableSet::UnacceptableSet(std::vector<AntigenId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

UnacceptableSet UnacceptableSet::parse(const HlaDictionary& dict, std::string_view codes) {
  std::vector<AntigenId> ids;
  std::istringstream in{std::string(codes)};
  std::string code;
  while (in >> code) ids.push_back(dict.resolve(code));
  return UnacceptableSet(std::move(ids));
}

void UnacceptableSet::add(AntigenId id) {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) ids_.insert(it, id);
}

bool UnacceptableSet::contains(AntigenId id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

std::string UnacceptableSet::to_string(const HlaDictionary& dict) const {
  std::string out;
  for (auto id : ids_) {
    if (!out.empty()) out += ' ';
    out += dict.code(id);
  }
  return out;
}

bool carries(const HlaDictionary& dict, const HlaTyping& donor, AntigenId antigen) {
  for (std::size_t l = 0; l < kNumLoci; ++l) {
    for (auto id : donor.at(static_cast<Locus>(l)).ids()) {
      if (id == antigen || dict.broad(id) == antigen) return true;
    }
  }
  return false;
}

bool carries_any(const HlaDictionary& dict, const HlaTyping& donor, const UnacceptableSet& set) {
  if (set.empty()) return false;
  for (std::size_t l = 0; l < kNumLoci; ++l) {
    for (auto id : donor.at(static_cast<Locus>(l)).ids()) {
      if (set.contains(id) || set.contains(dict.broad(id))) return true;
    }
  }
  return false;
}

DonorPanel::DonorPanel(const HlaDictionary& dict, std::vector<HlaTyping> donors)
    : donors_(std::move(donors)) {
  if (donors_.empty()) throw std::invalid_argument("donor panel must not be empty");
  words_ = (donors_.size() + 63) / 64;
  carriers_.assign(dict.size(), {});
  keys_.resize(donors_.size());
  for (std::size_t d = 0; d < donors_.size(); ++d) {
    const auto& t = donors_[d];
    auto mark = [&](AntigenId id) {
      auto& bits = carriers_[id];
      if (bits.empty()) bits.assign(words_, 0);
      bits[d / 64] |= (std::uint64_t{1} << (d % 64));
    };
    for (std::size_t l = 0; l < kNumLoci; ++l) {
      for (auto id : t.at(static_cast<Locus>(l)).ids()) {
        mark(id);
        mark(dict.broad(id));
      }
    }
    for (std::size_t li = 0; li < kAbdr.size(); ++li) {
      std::array<AntigenId, 2> k{};
      const int n = locus_keys(dict, t.at(kAbdr[li]), k);
      keys_[d][li] = {k[0], k[1], static_cast<AntigenId>(n)};
    }
  }
}

DonorPanel DonorPanel::from_table(const HlaDictionary& dict, const Table& table) {
  table.require_columns({"a1", "a2", "b1", "b2", "dr1", "dr2"});
  std::vector<HlaTyping> donors;
  donors.reserve(table.rows().size());
  for (const auto& row : table.rows()) {
    try {
      HlaTyping t;
      t.set(dict, Locus::A, row.at("a1"), row.at("a2"));
      t.set(dict, Locus::B, row.at("b1"), row.at("b2"));
      t.set(dict, Locus::DR, row.at("dr1"), row.at("dr2"));
      donors.push_back(t);
    } catch (const std::invalid_argument& e) {
      throw row.error(e.what());
    }
  }
  return DonorPanel(dict, std::move(donors));
}

DonorPanel DonorPanel::load(const HlaDictionary& dict, const std::filesystem::path& path) {
  return from_table(dict, Table::read(path));
}

double compute_vpra(const UnacceptableSet& unacceptable, const DonorPanel& panel) {
  if (unacceptable.empty()) return 0.0;
  std::vector<std::uint64_t> acc(panel.words_, 0);
  for (auto id : unacceptable.ids()) {
    if (id >= panel.carriers_.size()) continue;
    const auto& bits = panel.carriers_[id];
    if (bits.empty()) continue;
    for (std::size_t w = 0; w < acc.size(); ++w) acc[w] |= bits[w];
  }
  std::size_t n = 0;
  for (auto w : acc) n += static_cast<std::size_t>(std::popcount(w));
  return static_cast<double>(n) / static_cast<double>(panel.size());
}

double p_leq1mm_empirical(const HlaDictionary& dict, const HlaTyping& candidate,
                          const UnacceptableSet& unacceptable, const DonorPanel& panel,
                          bool exclude_unacceptable) {
  std::array<std::array<AntigenId, 2>, 3> ck{};
  std::array<int, 3> cn{};
  for (std::size_t li = 0; li < kAbdr.size(); ++li) {
    if (!candidate.typed(kAbdr[li])) throw std::invalid_argument("candidate typing incomplete");
    cn[li] = locus_keys(dict, candidate.at(kAbdr[li]), ck[li]);
  }
  std::vector<std::uint64_t> excluded;
  if (exclude_unacceptable && !unacceptable.empty()) {
    excluded.assign(panel.words_, 0);
    for (auto id : unacceptable.ids()) {
      if (id >= panel.carriers_.size() || panel.carriers_[id].empty()) continue;
      for (std::size_t w = 0; w < excluded.size(); ++w) excluded[w] |= panel.carriers_[id][w];
    }
  }
  std::size_t favorable = 0;
  for (std::size_t d = 0; d < panel.size(); ++d) {
    if (!excluded.empty() && (excluded[d / 64] >> (d % 64)) & 1U) continue;
    int mm = 0;
    for (std::size_t li = 0; li < 3 && mm <= 1; ++li) {
      const auto& k = panel.keys_[d][li];
      mm += count_locus(k.data(), k[2], ck[li].data(), cn[li]);
    }
    if (mm <= 1) ++favorable;
  }
  return static_cast<double>(favorable) / static_cast<double>(panel.size());
}

// ---------------------------------------------------------------------------
// Frequencies and analytic favorable-match probability

void FrequencyTable::set(const HlaDictionary& dict, AntigenId antigen, double frequency) {
  if (!(frequency >= 0.0) || !std::isfinite(frequency)) {
    throw std::invalid_argument("antigen frequency must be finite and non-negative");
  }
  const auto key = dict.match_key(antigen);
  auto& v = entries_[static_cast<std::size_t>(dict.locus(key))];
  for (auto& [id, f] : v) {
    if (id == key) {
      f += frequency;
      return;
    }
  }
  v.emplace_back(key, frequency);
}

void FrequencyTable::normalize() {
  for (std::size_t l = 0; l < kNumLoci; ++l) {
    auto& v = entries_[l];
    if (v.empty()) continue;
    double total = 0.0;
    for (const auto& e : v) total += e.second;
    if (total <= 0.0) {
      throw std::invalid_argument("frequencies at locus " +
                                  std::string(to_string(static_cast<Locus>(l))) + " sum to zero");
    }
    for (auto& e : v) e.second /= total;
    std::sort(v.begin(), v.end());
  }
}

std::optional<double> FrequencyTable::frequency(AntigenId match_key) const {
  for (const auto& v : entries_) {
    for (const auto& [id, f] : v) {
      if (id == match_key) return f;
    }
  }
  return std::nullopt;
}

FrequencyTable FrequencyTable::from_table(const HlaDictionary& dict, const Table& table) {
  table.require_columns({"antigen", "frequency"});
  FrequencyTable ft;
  for (const auto& row : table.rows()) {
    try {
      ft.set(dict, dict.resolve(row.at("antigen")), row.number("frequency"));
    } catch (const std::invalid_argument& e) {
      throw row.error(e.what());
    }
  }
  ft.normalize();
  return ft;
}

FrequencyTable FrequencyTable::load(const HlaDictionary& dict, const std::filesystem::path& path) {
  return from_table(dict, Table::read(path));
}

double p_leq1mm_analytic(const HlaDictionary& dict, const HlaTyping& candidate,
                         const FrequencyTable& freq) {
  std::array<double, 3> p0{}, p1{};
  for (std::size_t li = 0; li < kAbdr.size(); ++li) {
    const auto locus = kAbdr[li];
    if (!candidate.typed(locus)) throw std::invalid_argument("candidate typing incomplete");
    std::array<AntigenId, 2> keys{};
    const int n = locus_keys(dict, candidate.at(locus), keys);
    for (int i = 0; i < n; ++i) {
      if (!freq.frequency(keys[static_cast<std::size_t>(i)])) {
        throw std::invalid_argument("antigen '" + dict.code(keys[static_cast<std::size_t>(i)]) +
                                    "' missing from frequency table");
      }
    }
    double inside = 0.0, outside = 0.0, outside_sq = 0.0;
    for (const auto& [id, f] : freq.locus_entries(locus)) {
      const bool in_cand = id == keys[0] || (n == 2 && id == keys[1]);
      if (in_cand) {
        inside += f;
      } else {
        outside += f;
        outside_sq += f * f;
      }
    }
    // Ordered pair of independent draws: both inside -> 0 mismatches; one
    // inside -> 1; the same outside antigen twice (homozygous donor) -> 1.
    p0[li] = inside * inside;
    p1[li] = 2.0 * inside * outside + outside_sq;
  }
  return p0[0] * p0[1] * p0[2] + p1[0] * p0[1] * p0[2] + p0[0] * p1[1] * p0[2] +
         p0[0] * p0[1] * p1[2];
}

double compute_mmp(const MmpInputs& in) {
  const double favorable = in.blood_group_frequency * (1.0 - in.vpra) * in.p_leq1mm;
  const double v = std::pow(1.0 - favorable, 1000.0);
  return std::clamp(v, 0.0, 1.0);
}

double compute_hmpp_fraction(double f_leq1mm) {
  return std::clamp(std::pow(1.0 - f_leq1mm, 1000.0), 0.0, 1.0);
}

Homozygosity homozygosity_level(const HlaTyping& typing) {
  Homozygosity h;
  h.a = typing.at(Locus::A).homozygous();
  h.b = typing.at(Locus::B).homozygous();
  h.dr = typing.at(Locus::DR).homozygous();
  h.level = int{h.a} + int{h.b} + int{h.dr};
  return h;
}

}  // namespace etk
