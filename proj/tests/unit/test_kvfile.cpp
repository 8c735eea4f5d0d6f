// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <vector>

#include "oracles.hpp"
#include "snapseg/kvfile.hpp"

using namespace snapseg;

TEST_CASE("parse handles comments, blanks, whitespace and repeated keys") {
  const auto kv = KeyValues::parse("# header\n\n a = 1 \nb=two words # trailing\na = 3\n");
  CHECK(kv.get_int("a", 0) == 3);
  CHECK(kv.get_string("b", "") == "two words");
  CHECK(kv.get_double("missing", 2.5) == 2.5);
  CHECK_THROWS(KeyValues::parse("no equals sign\n"));
  CHECK_THROWS(KeyValues::parse(" = 4\n"));
}

TEST_CASE("typed getters validate their input") {
  const auto kv = KeyValues::parse("i = 12\nd = 1e-3\nb1 = true\nb0 = 0\nl = 1, 2 3\nbad = 1.5x\n");
  CHECK(kv.get_int("i", 0) == 12);
  CHECK(kv.get_double("d", 0) == 1e-3);
  CHECK(kv.get_bool("b1", false));
  CHECK_FALSE(kv.get_bool("b0", true));
  CHECK(kv.get_int_list("l", {}) == std::vector<int>{1, 2, 3});
  CHECK_THROWS(kv.get_int("bad", 0));
  CHECK_THROWS(kv.get_double("bad", 0));
  CHECK_THROWS(kv.get_bool("i", false));
  CHECK_THROWS(kv.get_uint64("d", 0));
}

TEST_CASE("format_double round trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::numeric_limits<double>::max()}) {
    const auto kv = KeyValues::parse("x = " + format_double(v) + "\n");
    CHECK(kv.get_double("x", 0) == v);
  }
  CHECK(parse_double_list("0.5,0.25") == std::vector<double>{0.5, 0.25});
}

TEST_CASE("to_text and save produce text that parses back to the same map") {
  snapseg::testing::TempDir dir("kv");
  KeyValues kv;
  kv.set("alpha", "1");
  kv.set("beta", "x y");
  kv.save(dir.file("k.txt"));
  const auto back = KeyValues::load(dir.file("k.txt"));
  CHECK(back.entries() == kv.entries());
  CHECK(KeyValues::parse(kv.to_text()).entries() == kv.entries());
}
