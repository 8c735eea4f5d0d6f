// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "snapseg/common.hpp"
#include "snapseg/evaluation.hpp"

using namespace snapseg;

TEST_CASE("confusion and metrics on a hand-computed example") {
  // truth: 0 0 0 1 1 2, pred: 0 0 1 1 0 1, plus one unlabeled entry
  const std::vector<int> truth{0, 0, 0, 1, 1, 2, kUnlabeled};
  const std::vector<int> pred{0, 0, 1, 1, 0, 1, 2};
  const auto cm = confusion(truth, pred, 4);
  CHECK(cm.total() == 6);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(2, 1) == 1);
  const auto m = metrics(cm);
  CHECK(m.oa == doctest::Approx(3.0 / 6.0));
  // class 0: p = 2/3, r = 2/3 ; class 1: p = 1/3, r = 1/2 ; class 2: p = 0, r = 0
  CHECK(m.precision[0] == doctest::Approx(2.0 / 3));
  CHECK(m.recall[1] == doctest::Approx(0.5));
  CHECK(m.f1[1] == doctest::Approx(2 * (1.0 / 3) * 0.5 / (1.0 / 3 + 0.5)));
  CHECK(m.f1[2] == 0.0);
  CHECK_FALSE(m.present[3]);
  CHECK_FALSE(m.in_truth[3]);
  CHECK(m.average_f == doctest::Approx((2.0 / 3 + 0.4 + 0.0) / 3.0));
}

TEST_CASE("metrics agree with a direct recount on random labels") {
  Rng rng(4);
  std::uniform_int_distribution<int> lab(0, 4);
  std::vector<int> t(1000);
  std::vector<int> p(1000);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = lab(rng);
    p[i] = lab(rng) < 2 ? t[i] : lab(rng);
  }
  const auto m = metrics(confusion(t, p, 5));
  int correct = 0;
  for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
  CHECK(m.oa == doctest::Approx(correct / 1000.0));
  for (int c = 0; c < 5; ++c) {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp += t[i] == c && p[i] == c;
      fp += t[i] != c && p[i] == c;
      fn += t[i] == c && p[i] != c;
    }
    CHECK(m.f1[static_cast<std::size_t>(c)] == doctest::Approx(2.0 * tp / (2.0 * tp + fp + fn)));
  }
}

TEST_CASE("bad inputs are rejected") {
  CHECK_THROWS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}, 2));
  CHECK_THROWS(confusion(std::vector<int>{0}, std::vector<int>{2}, 2));
  CHECK_THROWS(metrics(confusion(std::vector<int>{kUnlabeled}, std::vector<int>{0}, 2)));
}

TEST_CASE("label-fraction sweep averages over seeds") {
  std::vector<std::pair<double, std::uint64_t>> calls;
  const auto run = [&calls](double f, std::uint64_t s) {
    calls.emplace_back(f, s);
    Metrics m;
    m.oa = f + 0.01 * static_cast<double>(s);
    m.f1 = {0.5, 1.0};
    m.present = {true, s == 1};
    m.average_f = 0.5;
    return m;
  };
  const std::vector<double> fractions{0.05, 1.0};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto rows = label_fraction_sweep(run, fractions, seeds);
  CHECK(calls.size() == 4);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].mean_oa == doctest::Approx(0.065));
  CHECK(rows[0].std_oa == doctest::Approx(0.005));
  CHECK(rows[1].mean_f1[1] == doctest::Approx(1.0));  // only seed 1 had class 1
  CHECK_THROWS(label_fraction_sweep(run, std::vector<double>{0.0}, seeds));

  snapseg::testing::TempDir dir("eval");
  const std::vector<std::string> names{"a", "b"};
  write_sweep_csv(rows, names, dir.file("s.csv"));
  std::ifstream in(dir.file("s.csv"));
  std::string first;
  std::string header;
  std::getline(in, first);
  std::getline(in, header);
  CHECK(first == "# snapseg-sweep v1");
  CHECK(header == "fraction,n_seeds,mean_oa,std_oa,mean_average_f,f1_a,f1_b");
  CHECK(format_sweep_table(rows, names).find("100.0%") != std::string::npos);
}

TEST_CASE("report writers produce versioned CSVs and readable tables") {
  snapseg::testing::TempDir dir("eval");
  const std::vector<int> t{0, 1, 1};
  const std::vector<int> p{0, 1, 0};
  const auto cm = confusion(t, p, 3);
  const auto m = metrics(cm);
  const std::vector<std::string> names{"terrain", "building", "cars"};
  write_metrics_csv(m, names, dir.file("m.csv"));
  write_confusion_csv(cm, names, dir.file("c.csv"));
  std::ifstream mc(dir.file("m.csv"));
  std::stringstream ms;
  ms << mc.rdbuf();
  CHECK(ms.str().rfind("# snapseg-metrics v1\n", 0) == 0);
  CHECK(ms.str().find("cars,0,") != std::string::npos);
  std::ifstream cc(dir.file("c.csv"));
  std::stringstream cs;
  cs << cc.rdbuf();
  CHECK(cs.str().find("building,1,1,0\n") != std::string::npos);
  const std::string table = format_metrics_table(m, names);
  CHECK(table.find("overall accuracy 66.67%") != std::string::npos);
  CHECK(table.find("cars") != std::string::npos);
}
