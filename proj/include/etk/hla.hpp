#pragma once

// HLA typings, unacceptable antigens, mismatch counting, vPRA and mismatch
// probabilities.
//
// Antigen codes are interned into a dictionary that also records the broad
// antigen each split belongs to. A and B are compared at broad level, DR (and
// DQ, when typed) at split level.

#include <array>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "etk/table.hpp"

namespace etk {

enum class Locus : std::uint8_t { A = 0, B = 1, DR = 2, DQ = 3 };
inline constexpr std::size_t kNumLoci = 4;
inline constexpr std::array<Locus, 3> kAbdr = {Locus::A, Locus::B, Locus::DR};

std::string_view to_string(Locus locus);
std::optional<Locus> parse_locus(std::string_view text);

using AntigenId = std::uint16_t;

class UnknownAntigen : public std::invalid_argument {
 public:
  explicit UnknownAntigen(const std::string& code)
      : std::invalid_argument("unknown HLA antigen '" + code + "'"), code_(code) {}
  [[nodiscard]] const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// Broad/split equivalence table. Every split maps to its parent broad;
/// broads map to themselves.
class HlaDictionary {
 public:
  /// Columns: antigen, locus, broad (blank broad = antigen is its own broad).
  static HlaDictionary from_table(const Table& table);
  static HlaDictionary load(const std::filesystem::path& path);

  /// Registers an antigen. `broad` may name an antigen registered later.
  void add(std::string_view code, Locus locus, std::string_view broad = {});

  [[nodiscard]] AntigenId resolve(std::string_view code) const;
  [[nodiscard]] std::optional<AntigenId> find(std::string_view code) const;
  [[nodiscard]] const std::string& code(AntigenId id) const { return entries_.at(id).code; }
  [[nodiscard]] Locus locus(AntigenId id) const { return entries_.at(id).locus; }
  [[nodiscard]] AntigenId broad(AntigenId id) const;
  /// Identity used when counting mismatches: broad for A/B, split otherwise.
  [[nodiscard]] AntigenId match_key(AntigenId id) const;
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string code;
    Locus locus;
    std::string broad_code;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, AntigenId> index_;
};

/// Antigens typed at one locus: one antigen means homozygous.
struct LocusTyping {
  std::array<AntigenId, 2> antigens{};
  std::uint8_t count = 0;

  [[nodiscard]] bool typed() const { return count > 0; }
  [[nodiscard]] bool homozygous() const { return count == 1; }
  [[nodiscard]] std::span<const AntigenId> ids() const { return {antigens.data(), count}; }
  bool operator==(const LocusTyping&) const = default;
};

class HlaTyping {
 public:
  HlaTyping() = default;

  /// Space-separated antigen codes, e.g. "A1 A2 B7 B8 DR15 DR4". Loci come from
  /// the dictionary; a locus given once is homozygous.
  static HlaTyping parse(const HlaDictionary& dict, std::string_view codes);

  /// Sets one locus from up to two codes; blank or repeated second code means
  /// homozygous. Throws UnknownAntigen, or std::invalid_argument when a code
  /// belongs to another locus.
  void set(const HlaDictionary& dict, Locus locus, std::string_view first,
           std::string_view second = {});
  void set_ids(Locus locus, AntigenId first, std::optional<AntigenId> second);

  [[nodiscard]] const LocusTyping& at(Locus locus) const {
    return loci_[static_cast<std::size_t>(locus)];
  }
  [[nodiscard]] bool typed(Locus locus) const { return at(locus).typed(); }
  [[nodiscard]] bool typed_abdr() const;
  [[nodiscard]] std::string to_string(const HlaDictionary& dict) const;

  bool operator==(const HlaTyping&) const = default;

 private:
  std::array<LocusTyping, kNumLoci> loci_{};
};

/// Per-locus antigen mismatch counts (each 0, 1 or 2).
struct MismatchCount {
  std::array<std::uint8_t, kNumLoci> per_locus{};

  [[nodiscard]] int a() const { return per_locus[0]; }
  [[nodiscard]] int b() const { return per_locus[1]; }
  [[nodiscard]] int dr() const { return per_locus[2]; }
  [[nodiscard]] int at(Locus l) const { return per_locus[static_cast<std::size_t>(l)]; }
  [[nodiscard]] int abdr() const { return a() + b() + dr(); }
  /// Three-digit "ABDR" code as shown on match lists, e.g. "101".
  [[nodiscard]] std::string code() const;

  static MismatchCount of(int a, int b, int dr) {
    MismatchCount m;
    m.per_locus = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b),
                   static_cast<std::uint8_t>(dr), 0};
    return m;
  }
  bool operator==(const MismatchCount&) const = default;
};

/// Counts donor antigens absent from the candidate's typing, per locus.
/// Throws std::invalid_argument when either typing lacks a requested locus.
MismatchCount count_mismatches(const HlaDictionary& dict, const HlaTyping& donor,
                               const HlaTyping& candidate,
                               std::span<const Locus> loci = kAbdr);

/// Set of antigens reported unacceptable for one candidate.
class UnacceptableSet {
 public:
  UnacceptableSet() = default;
  explicit UnacceptableSet(std::vector<AntigenId> ids);
  /// Space-separated codes; blank means empty.
  static UnacceptableSet parse(const HlaDictionary& dict, std::string_view codes);

  void add(AntigenId id);
  [[nodiscard]] bool empty() const { return ids_.empty(); }
  [[nodiscard]] std::size_t size() const { return ids_.size(); }
  [[nodiscard]] bool contains(AntigenId id) const;
  [[nodiscard]] std::span<const AntigenId> ids() const { return ids_; }
  [[nodiscard]] std::string to_string(const HlaDictionary& dict) const;

  bool operator==(const UnacceptableSet&) const = default;

 private:
  std::vector<AntigenId> ids_;  // sorted, unique
};

/// True when the donor typing includes `antigen`, either directly or through
/// the broad of one of its splits.
bool carries(const HlaDictionary& dict, const HlaTyping& donor, AntigenId antigen);
bool carries_any(const HlaDictionary& dict, const HlaTyping& donor, const UnacceptableSet& set);

/// Reference donor population for vPRA and mismatch frequencies.
class DonorPanel {
 public:
  DonorPanel(const HlaDictionary& dict, std::vector<HlaTyping> donors);
  /// Columns a1,a2,b1,b2,dr1,dr2 (blank second field = homozygous).
  static DonorPanel load(const HlaDictionary& dict, const std::filesystem::path& path);
  static DonorPanel from_table(const HlaDictionary& dict, const Table& table);

  [[nodiscard]] std::size_t size() const { return donors_.size(); }
  [[nodiscard]] const std::vector<HlaTyping>& donors() const { return donors_; }

 private:
  friend double compute_vpra(const UnacceptableSet&, const DonorPanel&);
  friend double p_leq1mm_empirical(const HlaDictionary&, const HlaTyping&,
                                   const UnacceptableSet&, const DonorPanel&, bool);

  std::vector<HlaTyping> donors_;
  std::size_t words_ = 0;
  // carriers_[antigen] is a bitset over panel donors carrying that antigen.
  std::vector<std::vector<std::uint64_t>> carriers_;
  // Per donor, per ABDR locus: distinct match keys (count in [2]).
  std::vector<std::array<std::array<AntigenId, 3>, 3>> keys_;
};

/// Fraction of panel donors carrying at least one unacceptable antigen.
double compute_vpra(const UnacceptableSet& unacceptable, const DonorPanel& panel);

/// Fraction of panel donors with at most one ABDR mismatch. When
/// `exclude_unacceptable` is set, donors carrying an unacceptable antigen do
/// not count as favorable.
double p_leq1mm_empirical(const HlaDictionary& dict, const HlaTyping& candidate,
                          const UnacceptableSet& unacceptable, const DonorPanel& panel,
                          bool exclude_unacceptable = false);

/// Antigen frequencies per locus at match level (broad for A/B, split for DR).
/// Frequencies are normalized to sum to one per locus.
class FrequencyTable {
 public:
  /// Columns: locus, antigen, frequency.
  static FrequencyTable from_table(const HlaDictionary& dict, const Table& table);
  static FrequencyTable load(const HlaDictionary& dict, const std::filesystem::path& path);

  void set(const HlaDictionary& dict, AntigenId antigen, double frequency);
  /// Rescales each locus to sum to one. Throws if a locus sums to zero.
  void normalize();

  [[nodiscard]] std::optional<double> frequency(AntigenId match_key) const;
  [[nodiscard]] const std::vector<std::pair<AntigenId, double>>& locus_entries(Locus l) const {
    return entries_[static_cast<std::size_t>(l)];
  }

 private:
  std::array<std::vector<std::pair<AntigenId, double>>, kNumLoci> entries_;
};

/// Probability that a donor drawn from `freq` (independent loci, two
/// independent draws per locus) has at most one ABDR mismatch with the
/// candidate. Throws std::invalid_argument when a candidate antigen is absent
/// from the table.
double p_leq1mm_analytic(const HlaDictionary& dict, const HlaTyping& candidate,
                         const FrequencyTable& freq);

struct MmpInputs {
  double blood_group_frequency = 0.0;
  double vpra = 0.0;
  double p_leq1mm = 0.0;
};

/// Probability that none of the next 1000 donors is favorably matched:
/// [1 - f_BG (1 - vPRA) p_leq1mm]^1000.
double compute_mmp(const MmpInputs& in);

/// [1 - f_leq1mm]^1000.
double compute_hmpp_fraction(double f_leq1mm);

struct Homozygosity {
  int level = 0;  // number of A/B/DR loci with a single antigen
  bool a = false;
  bool b = false;
  bool dr = false;
};

Homozygosity homozygosity_level(const HlaTyping& typing);

}  // namespace etk
