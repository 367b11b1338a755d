#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "etk/match_list.hpp"
#include "support.hpp"

using namespace etk;
using etk::testing::ListFixture;

namespace {

int rounded(double v) { return static_cast<int>(std::floor(v + 0.5)); }

const std::vector<std::string> kTypings = {"A1 A2 B7 B8 DR15 DR4", "A1 A3 B7 B35 DR15 DR7",
                                           "A3 A11 B7 B8 DR7 DR13",  "A1 A2 B7 B8 DR15 DR7",
                                           "A2 B44 DR4",             "A11 A3 B35 B44 DR13 DR7",
                                           "A1 B8 DR15"};

/// Random candidates over the first fixture's centers and antigens.
std::vector<Candidate> random_candidates(const ListFixture& f, std::mt19937_64& gen, int n) {
  std::vector<Candidate> out;
  std::uniform_int_distribution<std::size_t> typ(0, kTypings.size() - 1);
  std::uniform_int_distribution<int> center(0, static_cast<int>(f.centers.size()) - 1);
  std::uniform_int_distribution<int> age(2, 75), dial(0, 4000), mmp(0, 100), reg(0, 2000);
  for (int i = 0; i < n; ++i) {
    Candidate c;
    c.id = "C" + std::to_string(i);
    c.patient_id = c.id;
    c.center = center(gen);
    c.blood_group = BloodGroup::A;
    c.dob = f.now() - static_cast<int>(age(gen) * 365.25) - 30;
    c.hla = HlaTyping::parse(f.dict, kTypings[typ(gen)]);
    c.registration = Date::parse("2015-01-01") + reg(gen);
    c.listed = true;
    c.dialysis_start = f.now() - dial(gen);
    c.last_screening = f.now() - 20;
    c.mmp = mmp(gen) / 100.0;
    if (i % 5 == 0) c.profile.max_donor_age = 30;
    if (i % 7 == 0) c.status = Urgency::HU;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> ids_of(const MatchList& l) {
  std::vector<std::string> ids;
  for (const auto& r : l.records) ids.push_back(r.id);
  return ids;
}

}  // namespace

TEST_SUITE("match_list") {
  TEST_CASE("first example list: order and point breakdown") {
    const ListFixture f("table_a1");
    const auto list = f.build(Program::ETKAS);
    const auto filtered = list.filtered();
    const auto& rows = testing::printed_etkas_rows();
    REQUIRE(filtered.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = *filtered[i];
      const auto& want = rows[i];
      CAPTURE(want.id);
      CHECK(r.id == want.id);
      REQUIRE(r.mm.has_value());
      CHECK(r.mm->code() == want.mm);
      CHECK(std::abs(rounded(r.total) - want.total) <= 1);
      CHECK(std::abs(rounded(r.parts.dialysis) - want.dialysis) <= 1);
      CHECK(std::abs(rounded(r.parts.hla) - want.hla) <= 1);
      CHECK(rounded(r.parts.pediatric) == want.pediatric);
      CHECK(rounded(r.parts.balance) == want.balance);
      CHECK(rounded(r.parts.distance) == want.distance);
      CHECK(rounded(r.parts.mmp) == want.mmp);
      CHECK(r.parts.hu == 0);
    }
    // Rank 1 reproduces 722 = 298 + 400 + 24 exactly after rounding.
    const auto& top = *filtered.front();
    CHECK(rounded(top.parts.dialysis) == 298);
    CHECK(rounded(top.parts.hla) == 400);
    CHECK(rounded(top.parts.mmp) == 24);
    CHECK(rounded(top.total) == 722);
    CHECK(top.tier.major == 3);
    // The pediatric row doubles (400 - 200) and adds the bonus.
    CHECK(filtered[1]->parts.hla == doctest::Approx(400.0));
    CHECK(filtered[1]->parts.pediatric == 100.0);
  }

  TEST_CASE("first example list: filtered rank 14 is unfiltered rank 67") {
    const ListFixture f("table_a1");
    const auto list = f.build(Program::ETKAS);
    const auto it = std::find_if(list.records.begin(), list.records.end(),
                                 [](const MatchRecord& r) { return r.id == "R14"; });
    REQUIRE(it != list.records.end());
    CHECK(it - list.records.begin() + 1 == 67);
    // Ineligible registrations appear on neither list.
    for (const auto& r : list.records) CHECK(r.id[0] != 'X');
  }

  TEST_CASE("first example list renders") {
    const ListFixture f("table_a1");
    const auto list = f.build(Program::ETKAS);
    std::ostringstream os;
    write_match_list(os, list, f.candidates, f.donor(), f.now(), f.context(), true);
    const auto text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 15);
    CHECK(text.find("R01") != std::string::npos);
    CHECK(text.find(",722,298,400,") != std::string::npos);
  }

  TEST_CASE("second example list: dialysis-day order") {
    const ListFixture f("table_a2");
    CHECK(program_for(f.donor(), f.policy) == Program::ESP);
    const auto list = f.build(Program::ESP);
    const auto filtered = list.filtered();
    const auto& days = testing::printed_esp_days();
    REQUIRE(filtered.size() >= days.size());
    for (std::size_t i = 0; i < days.size(); ++i) {
      CHECK(filtered[i]->total == days[i]);
      CHECK(filtered[i]->id[0] == 'E');
    }
    CHECK(filtered.front()->total == 1143);
    // Another region ranks after the subregion despite more dialysis days,
    // and other countries come last.
    REQUIRE(filtered.size() == 13);
    CHECK(filtered[11]->id == "Y01");
    CHECK(filtered[12]->id == "Y02");
    // The German ETKAS chooser is eligible but filtered; the 60-year-old is not eligible.
    const auto ids = ids_of(list);
    CHECK(std::count(ids.begin(), ids.end(), "Y03") == 1);
    CHECK(std::count(ids.begin(), ids.end(), "Y04") == 0);
  }

  TEST_CASE("eligibility") {
    const ListFixture f("table_a1");
    const auto ctx = f.context();
    auto c = f.candidates.front();
    c.last_screening = f.now() - 10;
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).ok());
    c.last_screening = f.now() - 180;
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).ok());
    c.last_screening = f.now() - 181;
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).reasons == kScreeningStale);
    c.last_screening = f.now() - 10;
    c.unacceptables = UnacceptableSet::parse(f.dict, "B8");
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).reasons == kUnacceptable);
    c.unacceptables = UnacceptableSet::parse(f.dict, "B35");
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).ok());
    c.status = Urgency::NT;
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).has(kStatusInactive));
    c.status = Urgency::T;
    c.am = true;
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).has(kAmActive));
    c.am = false;
    c.blood_group = BloodGroup::O;
    CHECK(etkas_eligible(c, f.donor(), f.now(), ctx).has(kBloodGroup));
    CHECK(describe_reasons(kBloodGroup | kAmActive).find('|') != std::string::npos);
  }

  TEST_CASE("filtering") {
    const ListFixture f("table_a1");
    const auto ctx = f.context();
    auto d = f.donor();
    d.age = 55;
    auto c = f.candidates.front();
    c.profile.max_donor_age = 50;
    const auto mm = MismatchCount::of(1, 0, 2);
    CHECK_FALSE(etkas_filtered(c, d, mm, ctx));
    c.profile.max_donor_age = 60;
    CHECK(etkas_filtered(c, d, mm, ctx));
    c.mm_criteria = parse_mismatch_criteria("2DR");
    CHECK_FALSE(etkas_filtered(c, d, mm, ctx));
    CHECK(etkas_filtered(c, d, MismatchCount::of(2, 2, 1), ctx));
  }

  TEST_CASE("tiers") {
    const ListFixture f("table_a1");
    auto c = f.candidates.front();
    auto d = f.donor();
    CHECK(etkas_tier(c, d, MismatchCount::of(0, 0, 0), f.now(), f.policy).major == 3);
    CHECK(etkas_tier(c, d, MismatchCount::of(1, 1, 1), f.now(), f.policy).major == 1);
    c.dob = f.now() - 3000;
    d.age = 8;
    CHECK(etkas_tier(c, d, MismatchCount::of(1, 0, 0), f.now(), f.policy).major == 2);
  }

  TEST_CASE("points with nothing but HLA and MMP") {
    const ListFixture f("table_a1");
    auto c = f.candidates.front();  // German candidate, Belgian donor
    c.dialysis_start.reset();
    const auto p = etkas_points(c, f.donor(), MismatchCount::of(0, 0, 0), f.now(), f.context());
    CHECK(p.parts.dialysis == 0);
    CHECK(p.parts.balance == 0);
    CHECK(p.parts.distance == 0);
    CHECK(p.parts.pediatric == 0);
    CHECK(p.parts.hu == 0);
    CHECK(p.parts.hla == 400);
    CHECK(p.parts.mmp == 24);
    CHECK(p.total == 424);
    CHECK(mmp_points(0.245, 100) == 25);
    CHECK(mmp_points(0.244, 100) == 24);
  }

  TEST_CASE("esp points and eligibility") {
    const ListFixture f("table_a2");
    const auto ctx = f.context();
    auto c = f.candidates.front();
    c.dialysis_start = f.now();
    CHECK(esp_tier_and_points(c, f.donor(), f.now(), ctx).points == 0);
    c.dob = f.now() - static_cast<int>(70 * 365.25);
    CHECK(esp_eligible(c, f.donor(), f.now(), ctx).ok());
    CHECK(esp_filtered(c, f.donor(), f.now(), ctx));
    c.dob = f.now() - static_cast<int>(60.5 * 365.25);
    CHECK(esp_eligible(c, f.donor(), f.now(), ctx).has(kEspAge));
    c.esp_opt_in = true;
    CHECK(esp_eligible(c, f.donor(), f.now(), ctx).ok());
    CHECK_FALSE(esp_filtered(c, f.donor(), f.now(), ctx));
    c.status = Urgency::HU;
    CHECK(esp_tier_and_points(c, f.donor(), f.now(), ctx).tier.minor == 2);
  }

  TEST_CASE("empty list") {
    const ListFixture f("table_a1");
    auto d = f.donor();
    d.blood_group = BloodGroup::AB;
    CHECK(build_match_list(d, f.candidates, f.now(), f.context(), Program::ETKAS).records.empty());
  }

  TEST_CASE("ordering properties on random candidates") {
    const ListFixture f("table_a1");
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 40; ++trial) {
      auto cands = random_candidates(f, gen, 120);
      auto d = f.donor();
      d.age = 10 + trial;
      const auto ctx = f.context();
      const auto list = build_match_list(d, cands, f.now(), ctx, Program::ETKAS);

      // Total, deterministic order independent of input order.
      for (std::size_t i = 1; i < list.records.size(); ++i) {
        REQUIRE(ranks_before(list.records[i - 1], list.records[i]));
        REQUIRE_FALSE(ranks_before(list.records[i], list.records[i - 1]));
        REQUIRE(list.records[i - 1].tier >= list.records[i].tier);
      }
      auto shuffled = cands;
      std::shuffle(shuffled.begin(), shuffled.end(), gen);
      CHECK(ids_of(build_match_list(d, shuffled, f.now(), ctx, Program::ETKAS)) == ids_of(list));

      // The filtered list is a subsequence in the same relative order.
      std::vector<std::string> sub;
      for (const auto* r : list.filtered()) sub.push_back(r->id);
      auto all = ids_of(list);
      CHECK(std::includes(all.begin(), all.end(), sub.begin(), sub.end(),
                          [&](const std::string& a, const std::string& b) {
                            return std::find(all.begin(), all.end(), a) < std::find(all.begin(), all.end(), b);
                          }));

      // Scaling every weight by a power of two keeps the order. MMP points
      // are rounded to integers, so they are left out here.
      auto base = f.policy;
      base.mmp_weight = 0;
      const MatchContext bctx{f.dict, f.centers, f.ledger, base};
      const auto unscaled = ids_of(build_match_list(d, cands, f.now(), bctx, Program::ETKAS));
      for (double k : {0.5, 2.0, 4.0}) {
        auto scaled = base;
        scaled.hla_base *= k;
        for (auto& m : scaled.hla_mismatch_points) m *= k;
        scaled.dialysis_points_per_year *= k;
        scaled.pediatric_bonus *= k;
        scaled.hu_points *= k;
        scaled.mmp_weight *= k;
        scaled.balance_weight *= k;
        for (auto& [country, w] : scaled.balance_country_weight) w *= k;
        scaled.distance_default = {scaled.distance_default.local * k, scaled.distance_default.regional * k,
                                   scaled.distance_default.national * k};
        for (auto& [country, dp] : scaled.distance_country) dp = {dp.local * k, dp.regional * k, dp.national * k};
        const MatchContext sctx{f.dict, f.centers, f.ledger, scaled};
        CHECK(ids_of(build_match_list(d, cands, f.now(), sctx, Program::ETKAS)) == unscaled);
      }
    }
  }

  TEST_CASE("point invariances") {
    const ListFixture f("table_a1");
    std::mt19937_64 gen(41);
    auto cands = random_candidates(f, gen, 50);
    auto no_a = f.policy;
    no_a.hla_mismatch_points = {0, -66.7, -133.3};
    const MatchContext ctx{f.dict, f.centers, f.ledger, no_a};
    auto d30 = f.donor();
    d30.age = 30;
    auto d45 = d30;
    d45.age = 45;
    for (const auto& c : cands) {
      for (int b = 0; b <= 2; ++b) {
        for (int dr = 0; dr <= 2; ++dr) {
          const auto p0 = etkas_points(c, d30, MismatchCount::of(0, b, dr), f.now(), ctx);
          const auto p2 = etkas_points(c, d30, MismatchCount::of(2, b, dr), f.now(), ctx);
          CHECK(p0.total == p2.total);
          // No age filter: donor age within one balance group does not matter.
          const auto q = etkas_points(c, d45, MismatchCount::of(1, b, dr), f.now(), ctx);
          CHECK(q.total == etkas_points(c, d30, MismatchCount::of(1, b, dr), f.now(), ctx).total);
        }
      }
    }
  }
}
