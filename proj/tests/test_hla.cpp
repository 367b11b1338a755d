#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "etk/hla.hpp"

using namespace etk;

namespace {

HlaDictionary make_dict() {
  HlaDictionary d;
  for (const char* a : {"A1", "A2", "A3", "A11", "A9"}) d.add(a, Locus::A);
  d.add("A23", Locus::A, "A9");
  d.add("A24", Locus::A, "A9");
  for (const char* b : {"B7", "B8", "B35", "B12"}) d.add(b, Locus::B);
  d.add("B44", Locus::B, "B12");
  d.add("B45", Locus::B, "B12");
  for (const char* r : {"DR1", "DR4", "DR7", "DR2"}) d.add(r, Locus::DR);
  d.add("DR15", Locus::DR, "DR2");
  d.add("DR16", Locus::DR, "DR2");
  return d;
}

const std::vector<std::vector<std::string>> kCodes = {
    {"A1", "A2", "A3", "A11", "A9", "A23", "A24"},
    {"B7", "B8", "B35", "B12", "B44", "B45"},
    {"DR1", "DR4", "DR7", "DR2", "DR15", "DR16"},
};

HlaTyping random_typing(const HlaDictionary& dict, std::mt19937_64& gen) {
  HlaTyping t;
  for (std::size_t l = 0; l < 3; ++l) {
    std::uniform_int_distribution<std::size_t> pick(0, kCodes[l].size() - 1);
    const auto& a = kCodes[l][pick(gen)];
    const auto& b = kCodes[l][pick(gen)];
    t.set(dict, static_cast<Locus>(l), a, b);
  }
  return t;
}

// Match keys spelled out by hand: broads for A and B, the antigen itself for DR.
std::set<std::string> keys_of(const HlaDictionary& dict, const HlaTyping& t, Locus l) {
  std::set<std::string> out;
  for (auto id : t.at(l).ids()) {
    const auto& code = dict.code(id);
    if (l == Locus::DR) {
      out.insert(code);
    } else if (code == "A23" || code == "A24") {
      out.insert("A9");
    } else if (code == "B44" || code == "B45") {
      out.insert("B12");
    } else {
      out.insert(code);
    }
  }
  return out;
}

int oracle_mismatches(const HlaDictionary& dict, const HlaTyping& donor, const HlaTyping& cand,
                      Locus l) {
  const auto d = keys_of(dict, donor, l);
  const auto c = keys_of(dict, cand, l);
  int n = 0;
  for (const auto& k : d) n += c.count(k) == 0;
  return n;
}

bool oracle_carries(const HlaDictionary& dict, const HlaTyping& donor, AntigenId u) {
  for (auto l : kAbdr) {
    for (auto id : donor.at(l).ids()) {
      if (id == u || dict.broad(id) == u) return true;
    }
  }
  return false;
}

// Exhaustive enumeration over ordered antigen pairs at each locus.
double enumerate_pleq1(const HlaDictionary& dict, const HlaTyping& cand,
                       const std::array<std::vector<std::pair<std::string, double>>, 3>& freq) {
  std::array<std::array<double, 3>, 3> locus_mm{};  // P(locus has m mismatches)
  for (std::size_t l = 0; l < 3; ++l) {
    const auto ck = keys_of(dict, cand, static_cast<Locus>(l));
    for (const auto& [a, fa] : freq[l]) {
      for (const auto& [b, fb] : freq[l]) {
        std::set<std::string> donor = {a, b};
        int m = 0;
        for (const auto& k : donor) m += ck.count(k) == 0;
        locus_mm[l][static_cast<std::size_t>(m)] += fa * fb;
      }
    }
  }
  double p = 0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int r = 0; r < 3; ++r) {
        if (a + b + r <= 1) p += locus_mm[0][a] * locus_mm[1][b] * locus_mm[2][r];
      }
    }
  }
  return p;
}

FrequencyTable table_from(const HlaDictionary& dict,
                          const std::array<std::vector<std::pair<std::string, double>>, 3>& f) {
  FrequencyTable t;
  for (const auto& locus : f) {
    for (const auto& [code, v] : locus) t.set(dict, dict.resolve(code), v);
  }
  return t;
}

}  // namespace

TEST_SUITE("hla") {
  TEST_CASE("typing parse and locus errors") {
    const auto dict = make_dict();
    const auto t = HlaTyping::parse(dict, "A1 A2 B7 B8 DR15 DR4");
    CHECK(t.typed_abdr());
    CHECK(t.at(Locus::A).count == 2);
    CHECK(t.to_string(dict) == "A1 A2 B7 B8 DR4 DR15");
    CHECK(HlaTyping::parse(dict, "A1 B7 B8 DR4").at(Locus::A).homozygous());
    CHECK_THROWS_AS(HlaTyping::parse(dict, "A1 A77 B7 DR4"), UnknownAntigen);
    HlaTyping bad;
    CHECK_THROWS_AS(bad.set(dict, Locus::A, "B7"), std::invalid_argument);
  }

  TEST_CASE("mismatch counting examples") {
    const auto dict = make_dict();
    const auto donor = HlaTyping::parse(dict, "A1 A2 B7 B8 DR4 DR7");
    const auto cand = HlaTyping::parse(dict, "A1 B7 B8 DR4 DR7");
    CHECK(count_mismatches(dict, donor, cand) == MismatchCount::of(1, 0, 0));
    CHECK(count_mismatches(dict, donor, cand).code() == "100");

    // A and B compare at broad level, DR at split level.
    const auto d2 = HlaTyping::parse(dict, "A23 A1 B44 B7 DR15 DR4");
    const auto c2 = HlaTyping::parse(dict, "A24 A1 B45 B7 DR16 DR4");
    CHECK(count_mismatches(dict, d2, c2) == MismatchCount::of(0, 0, 1));

    HlaTyping untyped;
    CHECK_THROWS_AS(count_mismatches(dict, donor, untyped), std::invalid_argument);
  }

  TEST_CASE("mismatch counting equals set-difference oracle") {
    const auto dict = make_dict();
    std::mt19937_64 gen(11);
    for (int i = 0; i < 2000; ++i) {
      const auto d = random_typing(dict, gen);
      const auto c = random_typing(dict, gen);
      const auto mm = count_mismatches(dict, d, c);
      for (auto l : kAbdr) REQUIRE(mm.at(l) == oracle_mismatches(dict, d, c, l));
      CHECK(count_mismatches(dict, d, d).abdr() == 0);
    }
  }

  TEST_CASE("vpra toy panel") {
    const auto dict = make_dict();
    std::vector<HlaTyping> donors;
    for (int i = 0; i < 100; ++i) {
      donors.push_back(HlaTyping::parse(dict, i < 37 ? "A1 A2 B7 B8 DR4 DR7" : "A3 A2 B7 B8 DR4 DR7"));
    }
    const DonorPanel panel(dict, donors);
    CHECK(compute_vpra(UnacceptableSet::parse(dict, "A1"), panel) == 0.37);
    CHECK(compute_vpra(UnacceptableSet{}, panel) == 0.0);
    CHECK(compute_vpra(UnacceptableSet::parse(dict, "A2"), panel) == 1.0);
  }

  TEST_CASE("vpra on a broad is carried by its splits") {
    const auto dict = make_dict();
    const DonorPanel panel(dict, {HlaTyping::parse(dict, "A23 A1 B7 B8 DR4 DR7"),
                                  HlaTyping::parse(dict, "A2 A1 B7 B8 DR4 DR7")});
    CHECK(compute_vpra(UnacceptableSet::parse(dict, "A9"), panel) == 0.5);
    CHECK(compute_vpra(UnacceptableSet::parse(dict, "A24"), panel) == 0.0);
  }

  TEST_CASE("vpra equals brute-force count on random panels") {
    const auto dict = make_dict();
    std::mt19937_64 gen(3);
    std::vector<AntigenId> all;
    for (AntigenId i = 0; i < dict.size(); ++i) all.push_back(i);
    for (int p = 0; p < 20; ++p) {
      std::vector<HlaTyping> donors;
      for (int i = 0; i < 200; ++i) donors.push_back(random_typing(dict, gen));
      const DonorPanel panel(dict, donors);
      for (int s = 0; s < 50; ++s) {
        std::vector<AntigenId> ids;
        std::uniform_int_distribution<int> n(0, 4);
        std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
        for (int k = n(gen); k > 0; --k) ids.push_back(all[pick(gen)]);
        const UnacceptableSet u(ids);
        int hits = 0;
        for (const auto& d : donors) {
          bool any = false;
          for (auto id : u.ids()) any = any || oracle_carries(dict, d, id);
          hits += any;
        }
        REQUIRE(compute_vpra(u, panel) == static_cast<double>(hits) / 200.0);

        // Adding an antigen never lowers vPRA.
        auto more = u;
        more.add(all[pick(gen)]);
        CHECK(compute_vpra(more, panel) >= compute_vpra(u, panel));
      }
    }
  }

  TEST_CASE("empirical p<=1mm") {
    const auto dict = make_dict();
    const auto cand = HlaTyping::parse(dict, "A1 A2 B7 B8 DR4 DR7");
    const DonorPanel clones(dict, std::vector<HlaTyping>(10, cand));
    CHECK(p_leq1mm_empirical(dict, cand, {}, clones) == 1.0);

    const DonorPanel far(dict, std::vector<HlaTyping>(10, HlaTyping::parse(dict, "A3 A11 B35 B12 DR1 DR2")));
    CHECK(p_leq1mm_empirical(dict, cand, {}, far) == 0.0);

    std::mt19937_64 gen(5);
    std::vector<HlaTyping> donors;
    for (int i = 0; i < 50; ++i) donors.push_back(random_typing(dict, gen));
    const DonorPanel panel(dict, donors);
    for (int trial = 0; trial < 50; ++trial) {
      const auto c = random_typing(dict, gen);
      const auto u = UnacceptableSet::parse(dict, trial % 2 ? "A2 DR7" : "");
      int fav = 0, fav_ok = 0;
      for (const auto& d : donors) {
        int m = 0;
        for (auto l : kAbdr) m += oracle_mismatches(dict, d, c, l);
        if (m <= 1) {
          ++fav;
          bool hit = false;
          for (auto id : u.ids()) hit = hit || oracle_carries(dict, d, id);
          fav_ok += !hit;
        }
      }
      REQUIRE(p_leq1mm_empirical(dict, c, u, panel) == fav / 50.0);
      REQUIRE(p_leq1mm_empirical(dict, c, u, panel, true) == fav_ok / 50.0);
      CHECK(p_leq1mm_empirical(dict, c, u, panel, true) <= p_leq1mm_empirical(dict, c, u, panel));
    }
  }

  TEST_CASE("analytic p<=1mm degenerate tables") {
    const auto dict = make_dict();
    const auto cand = HlaTyping::parse(dict, "A1 B7 DR4");
    const auto f = table_from(dict, {{{{"A1", 1.0}}, {{"B7", 1.0}}, {{"DR4", 1.0}}}});
    CHECK(p_leq1mm_analytic(dict, cand, f) == doctest::Approx(1.0).epsilon(1e-15));

    // Candidate antigens present with frequency zero, common alternatives elsewhere.
    const std::array<std::vector<std::pair<std::string, double>>, 3> rare = {{
        {{"A1", 0.0}, {"A2", 0.5}, {"A3", 0.5}},
        {{"B7", 0.0}, {"B8", 0.5}, {"B35", 0.5}},
        {{"DR4", 0.0}, {"DR1", 0.5}, {"DR7", 0.5}},
    }};
    CHECK(p_leq1mm_analytic(dict, cand, table_from(dict, rare)) == doctest::Approx(0.0).epsilon(1e-15));

    const auto missing = table_from(dict, {{{{"A2", 1.0}}, {{"B7", 1.0}}, {{"DR4", 1.0}}}});
    CHECK_THROWS_AS(p_leq1mm_analytic(dict, cand, missing), std::invalid_argument);
  }

  TEST_CASE("analytic p<=1mm equals genotype enumeration") {
    const auto dict = make_dict();
    std::mt19937_64 gen(17);
    const std::vector<std::vector<std::string>> keys = {
        {"A1", "A2", "A3", "A9"}, {"B7", "B8", "B12", "B35"}, {"DR1", "DR4", "DR15", "DR7"}};
    for (int trial = 0; trial < 200; ++trial) {
      std::array<std::vector<std::pair<std::string, double>>, 3> f;
      for (std::size_t l = 0; l < 3; ++l) {
        const std::size_t n = 2 + trial % 3;  // 2..4 antigens per locus
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double v = std::uniform_real_distribution<double>(0.05, 1.0)(gen);
          f[l].emplace_back(keys[l][i], v);
          sum += v;
        }
        for (auto& e : f[l]) e.second /= sum;
      }
      HlaTyping cand;
      for (std::size_t l = 0; l < 3; ++l) {
        std::uniform_int_distribution<std::size_t> pick(0, f[l].size() - 1);
        cand.set(dict, static_cast<Locus>(l), f[l][pick(gen)].first, f[l][pick(gen)].first);
      }
      const double got = p_leq1mm_analytic(dict, cand, table_from(dict, f));
      REQUIRE(std::abs(got - enumerate_pleq1(dict, cand, f)) <= 1e-12);
    }
  }

  TEST_CASE("mmp examples and boundaries") {
    CHECK(compute_mmp({1.0, 0.0, 1.0}) == 0.0);
    CHECK(compute_mmp({0.43, 1.0, 0.5}) == 1.0);
    CHECK(compute_mmp({0.43, 0.0, 0.01}) == doctest::Approx(0.01349).epsilon(1e-3));
    CHECK(compute_mmp({0.0, 0.0, 0.3}) == 1.0);
  }

  TEST_CASE("mmp matches log-domain evaluation on a grid") {
    double worst = 0;
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        for (int k = 0; k < 10; ++k) {
          const double f = 0.01 + 0.99 * i / 9.0;
          const double v = 0.999 * j / 9.0;
          const double p = 1e-4 + (1 - 1e-4) * std::pow(k / 9.0, 3);
          const long double x = static_cast<long double>(f) * (1.0L - v) * p;
          const long double ref = std::exp(1000.0L * std::log1p(-x));
          const double got = compute_mmp({f, v, p});
          if (ref > 1e-300L) {
            worst = std::max(worst, static_cast<double>(std::fabs((got - ref) / ref)));
          } else {
            CHECK(got < 1e-290);
          }
        }
      }
    }
    CHECK(worst < 1e-9);
  }

  TEST_CASE("mmp monotonicity") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const double f = u(gen), v = u(gen), p = u(gen), e = 0.01;
      CHECK(compute_mmp({f, std::min(1.0, v + e), p}) >= compute_mmp({f, v, p}));
      CHECK(compute_mmp({std::min(1.0, f + e), v, p}) <= compute_mmp({f, v, p}));
      CHECK(compute_mmp({f, v, std::min(1.0, p + e)}) <= compute_mmp({f, v, p}));
    }
  }

  TEST_CASE("hmpp fraction") {
    CHECK(compute_hmpp_fraction(1.0) == 0.0);
    CHECK(compute_hmpp_fraction(0.0) == 1.0);
    CHECK(compute_hmpp_fraction(0.002) == doctest::Approx(std::pow(0.998, 1000)).epsilon(1e-12));
    CHECK(compute_hmpp_fraction(0.002) == doctest::Approx(0.1350).epsilon(1e-3));
  }

  TEST_CASE("homozygosity") {
    const auto dict = make_dict();
    CHECK(homozygosity_level(HlaTyping::parse(dict, "A1 A2 B7 B8 DR4 DR7")).level == 0);
    CHECK(homozygosity_level(HlaTyping::parse(dict, "A1 B7 DR4")).level == 3);
    const auto h = homozygosity_level(HlaTyping::parse(dict, "A1 A2 B7 B8 DR4"));
    CHECK(h.level == 1);
    CHECK(h.dr);
    CHECK_FALSE(h.b);
  }
}
