#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "etk/post_transplant.hpp"

using namespace etk;

namespace {

HlaDictionary small_dict() {
  HlaDictionary d;
  for (const char* a : {"A1", "A2", "A3", "A11"}) d.add(a, Locus::A);
  for (const char* b : {"B7", "B8", "B35", "B44"}) d.add(b, Locus::B);
  for (const char* r : {"DR4", "DR7", "DR15", "DR13"}) d.add(r, Locus::DR);
  return d;
}

RelistEntry entry(const std::string& id, const std::string& country, int age, int dial, double r,
                  double t) {
  return RelistEntry{id, country, age, dial, r, t, {{0, Urgency::T}, {200, Urgency::NT}, {400, Urgency::D}}};
}

Candidate recipient(const HlaDictionary& dict) {
  Candidate c;
  c.id = "P1";
  c.patient_id = "P1";
  c.center = 3;
  c.blood_group = BloodGroup::B;
  c.dob = Date::parse("1970-01-01");
  c.hla = HlaTyping::parse(dict, "A1 A2 B7 B8 DR4 DR7");
  c.unacceptables = UnacceptableSet::parse(dict, "A3");
  c.profile.max_donor_age = 60;
  c.dialysis_start = Date::parse("2018-01-01");
  return c;
}

}  // namespace

TEST_SUITE("post_transplant") {
  TEST_CASE("weibull inverse transform matches closed-form survival") {
    Rng rng(123);
    const int n = 10000;
    const double scale = 2000, shape = 1.5;
    std::vector<double> t;
    for (int i = 0; i < n; ++i) t.push_back(sample_failure_time(scale, shape, rng.uniform()));
    std::sort(t.begin(), t.end());
    double ks = 0;
    for (int i = 0; i < n; ++i) {
      const double F = 1 - weibull_survival(t[static_cast<std::size_t>(i)], scale, shape);
      ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 0.02);
    CHECK_THROWS_AS(sample_failure_time(0, 1.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(sample_failure_time(10, -1, 0.5), std::invalid_argument);
  }

  TEST_CASE("weibull model: scale from coefficients, shape per country") {
    const auto m = WeibullModel::from_tables(
        Table::parse("feature,coef\nintercept,3000\nrecipient_age,-10\n", "c.csv"),
        Table::parse("country,shape\nNL,1.2\n*,0.8\n", "s.csv"));
    const Covariates x = {{"recipient_age", 50}};
    CHECK(m.scale(x) == 2500);
    CHECK(m.shape("NL") == 1.2);
    CHECK(m.shape("BE") == 0.8);
    CHECK_THROWS_AS((void)m.scale({}), std::invalid_argument);

    // Swapping the country changes only the shape: quantile ratios follow 1/k.
    const double lam = m.scale(x);
    for (const auto& country : {"NL", "BE"}) {
      const double k = m.shape(country);
      const double q1 = sample_failure_time(lam, k, 0.2), q2 = sample_failure_time(lam, k, 0.7);
      CHECK(std::log(q1 / q2) == doctest::Approx(std::log(std::log(0.2) / std::log(0.7)) / k));
      CHECK(sample_failure_time(lam, k, std::exp(-1.0)) == doctest::Approx(lam));
    }
  }

  TEST_CASE("bucket boundaries") {
    CHECK(time_bucket(179.9) == 0);
    CHECK(time_bucket(180) == 1);
    CHECK(time_bucket(365) == 2);
    CHECK(time_bucket(1826) == 4);
    CHECK(age_bucket(17) == 0);
    CHECK(age_bucket(18) == 1);
    CHECK(age_bucket(75) == 8);
  }

  TEST_CASE("relist sampler reproduces crossing points") {
    const std::vector<RelistCurveSet::Point> curve = {{0.0, 1.0}, {0.2, 0.8}, {0.5, 0.0}};
    CHECK(relist_fraction(curve, 0.1) == 0.2);
    CHECK(relist_fraction(curve, 0.2) == 0.2);
    CHECK(relist_fraction(curve, 0.3) == 0.5);
    CHECK(relist_fraction(curve, 1.0) == 0.5);
    const std::vector<RelistCurveSet::Point> plateau = {{0.0, 1.0}, {0.3, 0.9}};
    CHECK(relist_fraction(plateau, 0.05) == 0.3);
    CHECK_FALSE(relist_fraction(plateau, 0.5).has_value());

    RelistCurveSet set;
    set.set(2, 3, curve);
    CHECK(sample_relist_time(400, 52, set, 0.3) == doctest::Approx(200));
    CHECK_THROWS_AS(sample_relist_time(400, 80, set, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(set.set(0, 0, {{0.0, 0.5}, {0.5, 0.7}}), std::invalid_argument);
    CHECK_THROWS_AS(set.set(0, 0, {{1.0, 0.5}}), std::invalid_argument);
  }

  TEST_CASE("older recipients rarely re-list") {
    RelistCurveSet set;
    set.set(3, 8, {{0.0, 1.0}, {0.5, 0.998}, {0.9, 0.996}});
    Rng rng(8);
    int relisted = 0;
    for (int i = 0; i < 10000; ++i) relisted += sample_relist_time(1000, 80, set, rng.uniform()).has_value();
    CHECK(relisted < 100);
  }

  TEST_CASE("sampled re-listing precedes the failure") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<RelistCurveSet::Point> curve;
      double s = 0, surv = 1;
      for (int i = 0; i < 8; ++i) {
        curve.push_back({s, surv});
        s += (1 - s) * u(gen) * 0.5;
        surv *= u(gen);
      }
      RelistCurveSet set;
      set.set(2, 2, curve);
      const double t = 365 + 300 * u(gen);
      const auto r = sample_relist_time(t, 45, set, u(gen));
      if (r) CHECK(*r < t);
    }
  }

  TEST_CASE("de-novo immunization") {
    const auto dict = small_dict();
    const auto cand = HlaTyping::parse(dict, "A1 A2 B7 B8 DR4 DR7");
    const auto donor = HlaTyping::parse(dict, "A3 A11 B35 B44 DR15 DR7");
    Rng rng(1);
    CHECK(simulate_de_novo_immunization(dict, cand, cand, 1.0, rng).empty());
    const auto all = simulate_de_novo_immunization(dict, donor, cand, 1.0, rng);
    CHECK(all.size() == 5);
    double total = 0;
    for (int i = 0; i < 10000; ++i) total += simulate_de_novo_immunization(dict, donor, cand, 0.2, rng).size();
    CHECK(total / 10000 == doctest::Approx(1.0).epsilon(0.03));
  }

  TEST_CASE("pool loading rejects incomplete streams") {
    const auto ok = RelistingPool::from_table(Table::parse(
        "id,country,age,dialysis_days,r,t,statuses\nQ1,NL,50,400,100,600,0:T;120:NT;900:D\n", "pool.csv"));
    REQUIRE(ok.entries().size() == 1);
    CHECK(ok.entries()[0].statuses.size() == 3);
    CHECK_THROWS_AS(RelistingPool::from_table(Table::parse(
                        "id,country,age,dialysis_days,r,t,statuses\nQ1,NL,50,400,100,600,0:T;120:FU\n", "pool.csv")),
                    InputError);
    CHECK_THROWS_AS(RelistingPool::from_table(Table::parse(
                        "id,country,age,dialysis_days,r,t,statuses\nQ1,NL,50,400,700,600,0:T;900:D\n", "pool.csv")),
                    InputError);
  }

  TEST_CASE("calipers and relaxation") {
    const RelistingPool pool({entry("near", "NL", 50, 400, 100, 600), entry("far-age", "NL", 90, 400, 100, 600),
                              entry("far-r", "NL", 50, 400, 3000, 3600), entry("be", "BE", 52, 380, 120, 650)});
    RelistQuery q{"NL", 50, 400, 110, 610};
    const auto m = relist_candidates(q, pool);
    // Fewer than five matches: country is relaxed, then the within-year flag.
    CHECK(m == std::vector<std::size_t>{0, 3});
    Calipers one;
    one.min_matches = 1;
    CHECK(relist_candidates(q, pool, one) == std::vector<std::size_t>{0});
  }

  TEST_CASE("nearest matches by Mahalanobis distance") {
    const RelistingPool pool({entry("a", "NL", 50, 400, 100, 400), entry("b", "NL", 50, 400, 200, 500),
                              entry("c", "NL", 50, 400, 150, 800)});
    const RelistQuery q{"NL", 50, 400, 120, 450};
    // Covariance of (r, t) over the three entries, by hand.
    const double mr = 150, mt = 1700.0 / 3;
    double srr = 0, stt = 0, srt = 0;
    for (auto [r, t] : {std::pair{100.0, 400.0}, {200.0, 500.0}, {150.0, 800.0}}) {
      srr += (r - mr) * (r - mr) / 2;
      stt += (t - mt) * (t - mt) / 2;
      srt += (r - mr) * (t - mt) / 2;
    }
    const double det = srr * stt - srt * srt;
    auto d2 = [&](double r, double t) {
      const double dr = r - q.r, dt = t - q.t;
      return (dr * dr * stt - 2 * dr * dt * srt + dt * dt * srr) / det;
    };
    std::vector<std::pair<double, std::size_t>> oracle = {{d2(100, 400), 0}, {d2(200, 500), 1}, {d2(150, 800), 2}};
    std::sort(oracle.begin(), oracle.end());
    const auto got = nearest_relistings(q, pool, {0, 1, 2}, 3);
    REQUIRE(got.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == oracle[i].second);
    CHECK(nearest_relistings(q, pool, {0, 1, 2}, 2).size() == 2);
    // A single match falls back to standardized Euclidean distance.
    CHECK(nearest_relistings(q, pool, {2}, 5) == std::vector<std::size_t>{2});
  }

  TEST_CASE("synthetic re-listing") {
    const auto dict = small_dict();
    const auto rec = recipient(dict);
    const Date tx = Date::parse("2021-06-01");
    Rng rng(4);
    const RelistingPool single({entry("only", "NL", 55, 1300, 300, 700)});
    for (int i = 0; i < 20; ++i) {
      const auto s = build_synthetic_relisting(rec, tx, 700, 300, single, {dict.resolve("B44")}, rng, "P1/r", "NL");
      REQUIRE(s.candidate.has_value());
      CHECK(s.match_id == "only");
      const auto& c = *s.candidate;
      CHECK(c.id == "P1/r");
      CHECK(c.patient_id == "P1");
      CHECK(c.hla == rec.hla);
      CHECK(c.profile == rec.profile);
      CHECK(c.unacceptables == UnacceptableSet::parse(dict, "A3 B44"));
      CHECK(c.prior_tx);
      CHECK(c.registration == tx + 300);
      CHECK(c.dialysis_days(c.registration) == 1300);
      CHECK(c.status == Urgency::T);
      REQUIRE_FALSE(c.updates.empty());
      CHECK(c.updates.back().value == "D");
    }
    const RelistingPool nowhere({entry("old", "NL", 95, 9000, 3000, 6000)});
    const auto none = build_synthetic_relisting(rec, tx, 700, 300, nowhere, {}, rng, "P1/r", "NL");
    CHECK_FALSE(none.candidate.has_value());
    CHECK_FALSE(none.note.empty());
    CHECK_FALSE(build_synthetic_relisting(rec, tx, 700, 300, RelistingPool{}, {}, rng, "x", "NL").candidate);
  }
}
