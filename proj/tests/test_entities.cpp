#include <doctest.h>

#include <sstream>

#include "etk/date.hpp"
#include "etk/table.hpp"

using namespace etk;

TEST_SUITE("entities") {
  TEST_CASE("dates") {
    const auto d = Date::parse("2021-03-01");
    CHECK(d.to_string() == "2021-03-01");
    CHECK(d - Date::parse("2021-02-28") == 1);
    CHECK(Date::parse("2020-03-01") - Date::parse("2020-02-28") == 2);
    CHECK(Date::from_ymd(1970, 1, 1).days() == 0);
    CHECK(age_in_years(Date::parse("2000-06-15"), Date::parse("2021-06-14")) == 20);
    CHECK(age_in_years(Date::parse("2000-06-15"), Date::parse("2021-06-15")) == 21);
    CHECK_THROWS_AS(Date::parse("2021-02-30"), std::invalid_argument);
    CHECK_THROWS_AS(Date::parse("21-02-03"), std::invalid_argument);
  }

  TEST_CASE("tables") {
    const auto t = Table::parse("# model_id=x scale=2\na,b,c\n1, two ,\n\n3,4,5\n", "t.csv");
    CHECK(t.meta().at("model_id") == "x");
    CHECK(t.meta().at("scale") == "2");
    REQUIRE(t.rows().size() == 2);
    CHECK(t.rows()[0].at("b") == "two");
    CHECK_FALSE(t.rows()[0].opt("c").has_value());
    CHECK(t.rows()[1].integer("c") == 5);
    CHECK_THROWS_AS(t.require_columns({"a", "zz"}), InputError);
    try {
      (void)t.rows()[0].number("b");
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("t.csv:") != std::string::npos);
    }
    CHECK_THROWS_AS(Table::parse("a,b\n1,2,3\n", "bad.csv"), InputError);
  }

  TEST_CASE("table writer round trip") {
    std::ostringstream os;
    TableWriter w(os, {"x", "y"});
    w.row({"1", format_number(0.125)});
    CHECK_THROWS(w.row({"only one"}));
    const auto t = Table::parse(os.str(), "mem");
    CHECK(t.rows().at(0).number("y") == 0.125);
  }
}
