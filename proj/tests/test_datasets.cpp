#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "redsds/datasets.hpp"
#include "redsds/error.hpp"

using namespace redsds;
using namespace redsds::data;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "redsds_test_datasets";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(BouncingBall, StaysBetweenWalls) {
  for (const auto& r : gen_bouncing_ball(50, 200, 1, 0.0)) {
    ASSERT_EQ(r.length(), 200u);
    ASSERT_TRUE(r.labels);
    for (double x : r.target) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, kWallDistance);
    }
  }
}

TEST(BouncingBall, ZeroVelocityIsConstant) {
  auto p = simulate_ball(3.0, 0.0, 50);
  for (std::size_t t = 0; t < 50; ++t) {
    EXPECT_EQ(p.position[t], 3.0);
    EXPECT_EQ(p.labels[t], 1);
  }
}

TEST(BouncingBall, PeriodicBounce) {
  // speed 0.5 covers the 20-unit round trip in 40 steps
  auto p = simulate_ball(2.0, 0.5, 161);
  for (std::size_t t = 40; t < 161; ++t) EXPECT_NEAR(p.position[t], p.position[t - 40], 1e-9);
  EXPECT_NEAR(p.position[16], 10.0, 1e-12);
  EXPECT_NEAR(p.position[36], 0.0, 1e-12);
}

TEST(BouncingBall, LabelsFlipExactlyAtReflections) {
  auto p = simulate_ball(9.3, 0.4, 100);
  for (std::size_t t = 1; t < 100; ++t) {
    const double step = p.position[t] - p.position[t - 1];
    const bool reflected = std::abs(std::abs(step) - 0.4) > 1e-9 || (step > 0) != (p.velocity[t - 1] > 0);
    EXPECT_EQ(p.labels[t] != p.labels[t - 1], reflected) << "t=" << t;
  }
  EXPECT_EQ(p.labels[0], 1);
  EXPECT_EQ(p.labels[2], 0);
}

TEST(BouncingBall, NoiseLevel) {
  auto recs = gen_bouncing_ball(20, 100, 2, 0.1);
  auto clean = gen_bouncing_ball(20, 100, 2, 0.0);
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < recs.size(); ++i)
    for (std::size_t t = 0; t < 100; ++t, ++n) {
      // the clean draw shares the seed, so the trajectories coincide
      const double e = recs[i].target[t] - clean[i].target[t];
      ss += e * e;
    }
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), 0.1, 0.01);
}

TEST(BouncingBall, Deterministic) {
  auto a = gen_bouncing_ball(5, 30, 7), b = gen_bouncing_ball(5, 30, 7), c = gen_bouncing_ball(5, 30, 8);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].target, b[i].target);
    EXPECT_EQ(a[i].labels, b[i].labels);
  }
  EXPECT_NE(a[0].target, c[0].target);
  EXPECT_THROW(gen_bouncing_ball(0, 10, 1), ContractError);
}

TEST(ThreeMode, DurationTables) {
  auto s = make_three_mode_system(0);
  const double expected[3][4][2] = {{{6, 2.0 / 17}, {11, 5.0 / 17}, {16, 7.0 / 17}, {20, 3.0 / 17}},
                                    {{8, 1.0 / 4}, {17, 2.0 / 5}, {19, 3.0 / 10}, {20, 1.0 / 20}},
                                    {{13, 3.0 / 17}, {16, 7.0 / 17}, {18, 5.0 / 17}, {20, 2.0 / 17}}};
  for (std::size_t k = 0; k < 3; ++k) {
    double total = 0.0;
    for (std::size_t d = 1; d <= 25; ++d) total += s.duration_prob(k, d);
    EXPECT_NEAR(total, 1.0, 1e-15);
    for (const auto& e : expected[k]) EXPECT_EQ(s.duration_prob(k, static_cast<std::size_t>(e[0])), e[1]);
    EXPECT_EQ(s.duration_prob(k, 5), 0.0);
    EXPECT_EQ(s.increment_prob(k, 3), 1.0);
    EXPECT_EQ(s.increment_prob(k, 20), 0.0);
  }
  EXPECT_NEAR(s.increment_prob(0, 6), 15.0 / 17.0, 1e-15);
  EXPECT_NEAR(s.increment_prob(0, 7), 1.0, 1e-15);
  for (std::size_t k = 0; k < 3; ++k) {
    double row = 0.0;
    for (double p : s.switch_matrix[k]) row += p;
    EXPECT_NEAR(row, 1.0, 1e-15);
  }
}

TEST(ThreeMode, SegmentLengthsInRange) {
  auto s = make_three_mode_system(1);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    auto p = simulate_three_mode(s, 200, rng);
    // interior segments: every reset follows a count in [6, 20]
    for (std::size_t t = 1; t < 200; ++t) {
      EXPECT_LE(p.c[t], 20u);
      if (p.c[t] == 1) EXPECT_GE(p.c[t - 1], 6u);
      else EXPECT_EQ(p.z[t], p.z[t - 1]);
    }
  }
}

TEST(ThreeMode, CompletedDurationsFollowTables) {
  auto s = make_three_mode_system(3);
  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> counts(3, std::vector<double>(21, 0.0));
  std::vector<double> totals(3, 0.0);
  for (int i = 0; i < 400; ++i) {
    auto p = simulate_three_mode(s, 300, rng);
    for (std::size_t t = 1; t < 300; ++t) {
      // the first segment starts at count 1 too, so every completed segment counts
      if (p.c[t] == 1) {
        counts[p.z[t - 1]][p.c[t - 1]] += 1.0;
        totals[p.z[t - 1]] += 1.0;
      }
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    ASSERT_GT(totals[k], 1000.0);
    for (std::size_t d = 1; d <= 20; ++d) {
      const double p = s.duration_prob(k, d), freq = counts[k][d] / totals[k];
      EXPECT_NEAR(freq, p, 4.0 * std::sqrt(p * (1 - p) / totals[k]) + 1e-12) << "k=" << k << " d=" << d;
    }
  }
}

TEST(ThreeMode, Deterministic) {
  auto s = make_three_mode_system(5);
  auto s2 = make_three_mode_system(5);
  EXPECT_EQ(s.c, s2.c);
  EXPECT_EQ(s.d, s2.d);
  auto a = gen_three_mode(s, 3, 50, 6), b = gen_three_mode(s, 3, 50, 6);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].target, b[i].target);
    EXPECT_EQ(a[i].labels, b[i].labels);
    EXPECT_EQ(a[i].length(), 50u);
  }
  for (double d : s.d) {
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
  EXPECT_EQ(s.b[0][0], 0.0);
}

TEST(ThreeMode, TrendShiftsEmissions) {
  auto flat = make_three_mode_system(7), trend = make_three_mode_system(7, 0.05);
  std::mt19937_64 r1(8), r2(8);
  auto a = simulate_three_mode(flat, 40, r1), b = simulate_three_mode(trend, 40, r2);
  for (std::size_t t = 0; t < 40; ++t) EXPECT_NEAR(b.y[t] - a.y[t], 0.05 * static_cast<double>(t), 1e-12);
}

TEST(Jsonl, RoundTripIsExact) {
  std::vector<TimeSeriesRecord> recs;
  TimeSeriesRecord a;
  a.id = 3;
  a.dim = 2;
  a.target = {0.1, 1.0 / 3.0, -2.5e-300, 7.0, std::nextafter(1.0, 2.0), -0.0};
  a.labels = std::vector<int>{0, 1, 1};
  a.controls = RecordControls{4, 1, {0.5, 0.25, 0.125}};
  a.start = "2020-01-01";
  a.freq = "H";
  TimeSeriesRecord b;
  b.id = -1;
  b.target = {1.0, 2.0};
  recs = {a, b};
  auto path = temp_file("roundtrip.jsonl");
  write_jsonl(recs, path);
  auto back = load_jsonl(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, 3);
  EXPECT_EQ(back[0].dim, 2u);
  for (std::size_t i = 0; i < a.target.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back[0].target[i]), std::bit_cast<std::uint64_t>(a.target[i]));
  EXPECT_EQ(back[0].labels, a.labels);
  ASSERT_TRUE(back[0].controls);
  EXPECT_EQ(back[0].controls->static_id, 4u);
  EXPECT_EQ(back[0].controls->time, a.controls->time);
  EXPECT_EQ(back[0].start, a.start);
  EXPECT_EQ(back[0].freq, a.freq);
  EXPECT_FALSE(back[1].labels);
  EXPECT_FALSE(back[1].controls);
  EXPECT_FALSE(back[1].start);
  EXPECT_EQ(record_to_json_line(back[1]).find("labels"), std::string::npos);
  // writing again reproduces the file byte for byte
  auto again = temp_file("roundtrip2.jsonl");
  write_jsonl(back, again);
  std::ifstream f1(path), f2(again);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
}

TEST(Jsonl, ScalarTargetRows) {
  auto r = record_from_json_line(R"({"id": 1, "target": [1, 2.5, 3]})");
  EXPECT_EQ(r.dim, 1u);
  EXPECT_EQ(r.target, (std::vector<double>{1, 2.5, 3}));
}

TEST(Jsonl, RejectsInconsistentRecords) {
  EXPECT_THROW(record_from_json_line(R"({"id": 1, "target": [1, 2], "labels": [0]})"), DataError);
  EXPECT_THROW(record_from_json_line(R"({"id": 1, "target": [[1, 2], [3]]})"), DataError);
  EXPECT_THROW(record_from_json_line(R"({"target": [1, 2]})"), DataError);
  EXPECT_THROW(record_from_json_line(R"({"id": 1, "target": []})"), DataError);
  EXPECT_THROW(record_from_json_line(R"([1, 2])"), DataError);
  EXPECT_THROW(record_from_json_line(R"({"id": 1, "target": [1, 2], "controls": {"static_id": 0, "time": [[1]]}})"),
               DataError);
}

TEST(Jsonl, ErrorNamesTheLine) {
  auto path = temp_file("bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id": 0, "target": [1]})" << "\n\n" << R"({"id": 1, "target": [1, )" << "\n";
  }
  try {
    load_jsonl(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_jsonl(temp_file("missing.jsonl")), DataError);
}

TEST(Bees, FeaturesAndChunks) {
  RawBeeSeries s;
  s.id = 5;
  const std::size_t T = 400;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 3.0);
  for (std::size_t t = 0; t < T; ++t) {
    s.x.push_back(10.0 + n(rng));
    s.y.push_back(-4.0 + 2.0 * n(rng));
    s.theta.push_back(0.01 * static_cast<double>(t) * static_cast<double>(t));
    s.labels.push_back(t < 100 ? 0 : (t < 250 ? 1 : (t < 300 ? 2 : 0)));
  }
  auto out = preprocess_bees({s}, 120);
  // changes at 100, 250 and 300; the chunk at 300 runs past the end
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ((*out[0].labels)[0], 1);
  EXPECT_EQ((*out[1].labels)[0], 2);
  for (const auto& r : out) {
    EXPECT_EQ(r.dim, 4u);
    EXPECT_EQ(r.length(), 120u);
    for (std::size_t t = 0; t < 120; ++t) {
      const double sn = r.target[t * 4 + 2], cs = r.target[t * 4 + 3];
      EXPECT_NEAR(sn * sn + cs * cs, 1.0, 1e-12);
    }
  }
  EXPECT_NEAR(std::cos(s.theta[100]), out[0].target[3], 1e-15);
}

TEST(Bees, StandardizedCoordinates) {
  RawBeeSeries s;
  const std::size_t T = 240;
  for (std::size_t t = 0; t < T; ++t) {
    s.x.push_back(std::sin(0.1 * static_cast<double>(t)) * 5.0 + 3.0);
    s.y.push_back(static_cast<double>(t));
    s.theta.push_back(0.0);
    s.labels.push_back(t == 0 ? 1 : 0);
  }
  // a single change at t = 1 yields one chunk covering t = 1..T-1 when chunk = T - 1
  auto out = preprocess_bees({s}, T - 1);
  ASSERT_EQ(out.size(), 1u);
  double mx = 0.0, my = 0.0, sx = 0.0, sy = 0.0;
  std::vector<double> xs, ys;
  for (std::size_t t = 0; t < T - 1; ++t) {
    xs.push_back(out[0].target[t * 4]);
    ys.push_back(out[0].target[t * 4 + 1]);
  }
  // recover the standardized value at t = 0 from the affine relation for y
  const double slope = ys[1] - ys[0];
  const double y0 = ys[0] - slope;
  const double x0 = (s.x[0] - s.x[1]) / (s.x[2] - s.x[1]) * (xs[1] - xs[0]) + xs[0];
  xs.insert(xs.begin(), x0);
  ys.insert(ys.begin(), y0);
  for (std::size_t t = 0; t < T; ++t) mx += xs[t], my += ys[t];
  mx /= T, my /= T;
  for (std::size_t t = 0; t < T; ++t) sx += (xs[t] - mx) * (xs[t] - mx), sy += (ys[t] - my) * (ys[t] - my);
  EXPECT_NEAR(mx, 0.0, 1e-9);
  EXPECT_NEAR(my, 0.0, 1e-12);
  EXPECT_NEAR(sx / T, 1.0, 1e-9);
  EXPECT_NEAR(sy / T, 1.0, 1e-12);
}

TEST(Bees, ShortSeriesSkippedWithWarning) {
  RawBeeSeries s;
  s.id = 12;
  s.x = {1, 2, 3};
  s.y = {1, 0, 1};
  s.theta = {0, 1, 2};
  s.labels = {0, 1, 1};
  std::vector<std::string> warnings;
  EXPECT_TRUE(preprocess_bees({s}, 120, &warnings).empty());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("12"), std::string::npos);
  s.labels.pop_back();
  EXPECT_THROW(preprocess_bees({s}, 2), DataError);
}
