#include "redsds/datasets.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "redsds/error.hpp"
#include "redsds/prob.hpp"

namespace redsds::data {

using nlohmann::json;

namespace {

std::mt19937_64 series_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::string record_name(const TimeSeriesRecord& r) { return "record " + std::to_string(r.id); }

}  // namespace

void TimeSeriesRecord::validate() const {
  if (dim == 0) throw DataError(record_name(*this) + ": dimension must be positive");
  if (target.empty() || target.size() % dim != 0)
    throw DataError(record_name(*this) + ": target must hold T rows of " + std::to_string(dim) + " values");
  const std::size_t T = length();
  if (labels && labels->size() != T)
    throw DataError(record_name(*this) + ": " + std::to_string(labels->size()) + " labels for " +
                    std::to_string(T) + " steps");
  if (controls && controls->time.size() != controls->time_dim * T && controls->time_dim > 0)
    throw DataError(record_name(*this) + ": time controls must cover every step");
}

// ---------------------------------------------------------------------------

BallPath simulate_ball(double x0, double v0, std::size_t T) {
  BallPath p;
  double x = x0, v = v0;
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      x += v;
      if (x > kWallDistance) {
        x = 2.0 * kWallDistance - x;
        v = -v;
      } else if (x < 0.0) {
        x = -x;
        v = -v;
      }
    }
    p.position.push_back(x);
    p.velocity.push_back(v);
    p.labels.push_back(v >= 0.0 ? 1 : 0);
  }
  return p;
}

std::vector<TimeSeriesRecord> gen_bouncing_ball(std::size_t n_series, std::size_t T, std::uint64_t seed,
                                                double noise_sd) {
  require(n_series >= 1 && T >= 1, "gen_bouncing_ball: n_series and T must be positive");
  std::vector<TimeSeriesRecord> out;
  out.reserve(n_series);
  for (std::size_t i = 0; i < n_series; ++i) {
    auto rng = series_rng(seed, i);
    std::uniform_real_distribution<double> pos(0.0, kWallDistance);
    std::uniform_real_distribution<double> vel(-0.5, 0.5);
    std::normal_distribution<double> noise(0.0, noise_sd);
    double x0 = pos(rng);
    while (x0 == 0.0) x0 = pos(rng);
    const double v0 = vel(rng);
    BallPath path = simulate_ball(x0, v0, T);
    TimeSeriesRecord r;
    r.id = static_cast<std::int64_t>(i);
    r.target.resize(T);
    for (std::size_t t = 0; t < T; ++t) r.target[t] = path.position[t] + noise(rng);
    r.labels = std::move(path.labels);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

double ThreeModeSystem::duration_prob(std::size_t k, std::size_t duration) const {
  if (duration < kMinDuration || duration > kMaxDuration) return 0.0;
  return rho[k][duration - kMinDuration];
}

double ThreeModeSystem::increment_prob(std::size_t k, std::size_t count) const {
  if (count < kMinDuration) return 1.0;
  if (count >= kMaxDuration) return 0.0;
  double tail = 0.0;
  for (std::size_t d = count; d <= kMaxDuration; ++d) tail += duration_prob(k, d);
  if (tail <= 0.0) return 1.0;
  return 1.0 - duration_prob(k, count) / tail;
}

ThreeModeSystem make_three_mode_system(std::uint64_t seed, double trend) {
  ThreeModeSystem s;
  s.switch_matrix = {{{0.1, 0.2, 0.7}, {0.3, 0.5, 0.2}, {0.3, 0.3, 0.4}}};
  auto& r = s.rho;
  r = {};
  r[0][0] = 2.0 / 17, r[0][5] = 5.0 / 17, r[0][10] = 7.0 / 17, r[0][14] = 3.0 / 17;
  r[1][2] = 1.0 / 4, r[1][11] = 2.0 / 5, r[1][13] = 3.0 / 10, r[1][14] = 1.0 / 20;
  r[2][7] = 3.0 / 17, r[2][10] = 7.0 / 17, r[2][12] = 5.0 / 17, r[2][14] = 2.0 / 17;
  const double angles[3] = {0.0, std::numbers::pi / 8, std::numbers::pi / 4};
  for (std::size_t k = 0; k < 3; ++k) {
    const double co = std::cos(angles[k]), si = std::sin(angles[k]);
    s.A[k] = {0.99 * co, -0.99 * si, 0.99 * si, 0.99 * co};
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> offset(0, 2);
  s.b[0] = {0.0, 0.0};
  for (std::size_t k = 1; k < 3; ++k) {
    const double e0 = normal(rng), e1 = normal(rng);
    s.b[k] = {0.25 * e0, 0.25 * e1};
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double c0 = normal(rng), c1 = normal(rng);
    s.c[k] = {c0, c1};
  }
  for (std::size_t k = 0; k < 3; ++k) s.d[k] = offset(rng);
  s.trend = trend;
  return s;
}

ThreeModePath simulate_three_mode(const ThreeModeSystem& s, std::size_t T, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ThreeModePath p;
  const double sx = std::sqrt(s.state_var), sy = std::sqrt(s.emission_var), s0 = std::sqrt(s.init_var);
  const double uniform3[3] = {1.0, 1.0, 1.0};
  std::size_t z = prob::sample_index(uniform3, unif(rng));
  std::size_t c = 1;
  double x0 = s.init_mean[0] + s0 * normal(rng);
  double x1 = s.init_mean[1] + s0 * normal(rng);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      if (unif(rng) < s.increment_prob(z, c)) {
        ++c;
      } else {
        c = 1;
        z = prob::sample_index(s.switch_matrix[z], unif(rng));
      }
      const auto& A = s.A[z];
      const double n0 = A[0] * x0 + A[1] * x1 + s.b[z][0] + sx * normal(rng);
      const double n1 = A[2] * x0 + A[3] * x1 + s.b[z][1] + sx * normal(rng);
      x0 = n0;
      x1 = n1;
    }
    const double mean = s.c[z][0] * x0 + s.c[z][1] * x1 + s.d[z] + s.trend * static_cast<double>(t);
    p.y.push_back(mean + sy * normal(rng));
    p.x.push_back(x0);
    p.x.push_back(x1);
    p.z.push_back(static_cast<int>(z));
    p.c.push_back(c);
  }
  return p;
}

std::vector<TimeSeriesRecord> gen_three_mode(const ThreeModeSystem& system, std::size_t n_series, std::size_t T,
                                             std::uint64_t seed) {
  require(n_series >= 1 && T >= 1, "gen_three_mode: n_series and T must be positive");
  std::vector<TimeSeriesRecord> out;
  out.reserve(n_series);
  for (std::size_t i = 0; i < n_series; ++i) {
    auto rng = series_rng(seed, i);
    ThreeModePath p = simulate_three_mode(system, T, rng);
    TimeSeriesRecord r;
    r.id = static_cast<std::int64_t>(i);
    r.target = std::move(p.y);
    r.labels = std::move(p.z);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

TimeSeriesRecord record_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record must be a JSON object");
  TimeSeriesRecord r;
  try {
    r.id = j.at("id").get<std::int64_t>();
    const json& target = j.at("target");
    if (!target.is_array() || target.empty()) throw DataError("target must be a non-empty array");
    if (target.front().is_array()) {
      r.dim = target.front().size();
      for (const json& row : target) {
        if (!row.is_array() || row.size() != r.dim) throw DataError("target rows must have equal length");
        for (const json& v : row) r.target.push_back(v.get<double>());
      }
    } else {
      r.dim = 1;
      for (const json& v : target) r.target.push_back(v.get<double>());
    }
    if (j.contains("controls")) {
      const json& c = j.at("controls");
      RecordControls rc;
      rc.static_id = c.at("static_id").get<std::size_t>();
      if (c.contains("time")) {
        const json& time = c.at("time");
        if (!time.empty()) rc.time_dim = time.front().size();
        for (const json& row : time) {
          if (row.size() != rc.time_dim) throw DataError("time controls must have equal-length rows");
          for (const json& v : row) rc.time.push_back(v.get<double>());
        }
      }
      r.controls = std::move(rc);
    }
    if (j.contains("labels")) r.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("start")) r.start = j.at("start").get<std::string>();
    if (j.contains("freq")) r.freq = j.at("freq").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  if (r.controls && r.controls->time_dim > 0 && r.controls->time.size() != r.controls->time_dim * r.length())
    throw DataError(record_name(r) + ": time controls have " + std::to_string(r.controls->time.size() / r.controls->time_dim) +
                    " rows for " + std::to_string(r.length()) + " steps");
  r.validate();
  return r;
}

std::string record_to_json_line(const TimeSeriesRecord& r) {
  json j;
  j["id"] = r.id;
  json target = json::array();
  for (std::size_t t = 0; t < r.length(); ++t) {
    target.push_back(std::vector<double>(r.target.begin() + t * r.dim, r.target.begin() + (t + 1) * r.dim));
  }
  j["target"] = std::move(target);
  if (r.controls) {
    json c;
    c["static_id"] = r.controls->static_id;
    json time = json::array();
    const std::size_t F = r.controls->time_dim;
    for (std::size_t t = 0; F > 0 && t < r.controls->time.size() / F; ++t)
      time.push_back(std::vector<double>(r.controls->time.begin() + t * F, r.controls->time.begin() + (t + 1) * F));
    c["time"] = std::move(time);
    j["controls"] = std::move(c);
  }
  if (r.labels) j["labels"] = *r.labels;
  if (r.start) j["start"] = *r.start;
  if (r.freq) j["freq"] = *r.freq;
  return j.dump();
}

std::vector<TimeSeriesRecord> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<TimeSeriesRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::vector<TimeSeriesRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

std::vector<TimeSeriesRecord> preprocess_bees(const std::vector<RawBeeSeries>& raw, std::size_t chunk,
                                              std::vector<std::string>* warnings) {
  require(chunk >= 1, "preprocess_bees: chunk length must be positive");
  std::vector<TimeSeriesRecord> out;
  std::int64_t next_id = 0;
  for (const RawBeeSeries& s : raw) {
    const std::size_t T = s.x.size();
    if (s.y.size() != T || s.theta.size() != T || s.labels.size() != T)
      throw DataError("bee series " + std::to_string(s.id) + ": x, y, theta and labels differ in length");
    if (T < chunk) {
      if (warnings) warnings->push_back("bee series " + std::to_string(s.id) + " shorter than " +
                                        std::to_string(chunk) + " steps, skipped");
      continue;
    }
    auto standardize = [&](const std::vector<double>& v) {
      double mean = 0.0;
      for (double a : v) mean += a;
      mean /= static_cast<double>(T);
      double var = 0.0;
      for (double a : v) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / static_cast<double>(T));
      if (!(sd > 0.0)) throw DataError("bee series " + std::to_string(s.id) + ": constant coordinate");
      std::vector<double> o(T);
      for (std::size_t t = 0; t < T; ++t) o[t] = (v[t] - mean) / sd;
      return o;
    };
    const std::vector<double> xs = standardize(s.x), ys = standardize(s.y);
    for (std::size_t start = 1; start + chunk <= T; ++start) {
      if (s.labels[start] == s.labels[start - 1]) continue;
      TimeSeriesRecord r;
      r.id = next_id++;
      r.dim = 4;
      r.labels.emplace();
      for (std::size_t t = start; t < start + chunk; ++t) {
        r.target.insert(r.target.end(), {xs[t], ys[t], std::sin(s.theta[t]), std::cos(s.theta[t])});
        r.labels->push_back(s.labels[t]);
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace redsds::data
