#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace redsds::data {

struct RecordControls {
  std::size_t static_id = 0;
  std::size_t time_dim = 0;
  std::vector<double> time;  // [T, time_dim]
};

struct TimeSeriesRecord {
  std::int64_t id = 0;
  std::size_t dim = 1;
  std::vector<double> target;  // [T, dim]
  std::optional<RecordControls> controls;
  std::optional<std::vector<int>> labels;
  std::optional<std::string> start;
  std::optional<std::string> freq;

  std::size_t length() const { return dim ? target.size() / dim : 0; }
  // Throws DataError when the fields are not length-consistent.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Bouncing ball between walls at 0 and 10.

inline constexpr double kWallDistance = 10.0;

struct BallPath {
  std::vector<double> position;  // noiseless
  std::vector<double> velocity;
  std::vector<int> labels;  // 1 while velocity >= 0
};

// Constant speed; a crossing of either wall reflects the position back into
// range and negates the velocity in the same step.
BallPath simulate_ball(double x0, double v0, std::size_t T);

std::vector<TimeSeriesRecord> gen_bouncing_ball(std::size_t n_series, std::size_t T, std::uint64_t seed,
                                                double noise_sd = 0.1);

// ---------------------------------------------------------------------------
// Switching linear system with three modes and explicit durations.

struct ThreeModeSystem {
  static constexpr std::size_t kModes = 3;
  static constexpr std::size_t kMinDuration = 6;
  static constexpr std::size_t kMaxDuration = 20;
  std::array<std::array<double, 3>, 3> switch_matrix{};
  std::array<std::array<double, kMaxDuration - kMinDuration + 1>, 3> rho{};  // durations 6..20
  std::array<std::array<double, 4>, 3> A{};                                  // row-major 2x2
  std::array<std::array<double, 2>, 3> b{};
  std::array<std::array<double, 2>, 3> c{};
  std::array<double, 3> d{};
  double state_var = 0.01;
  double emission_var = 0.04;
  double init_var = 0.01;
  std::array<double, 2> init_mean{2.0, 0.0};
  double trend = 0.0;  // added to the emission mean as trend * t

  // Probability of duration `duration` (1-based) for mode k; 0 outside [6, 20].
  double duration_prob(std::size_t k, std::size_t duration) const;
  // Count increment probability v_k(c).
  double increment_prob(std::size_t k, std::size_t count) const;
};

// Fixed constants with (eps_2, eps_3, c_k, d_k) drawn from `seed`.
ThreeModeSystem make_three_mode_system(std::uint64_t seed, double trend = 0.0);

struct ThreeModePath {
  std::vector<double> y;       // [T]
  std::vector<double> x;       // [T, 2]
  std::vector<int> z;          // [T]
  std::vector<std::size_t> c;  // [T], 1-based counts
};
ThreeModePath simulate_three_mode(const ThreeModeSystem& system, std::size_t T, std::mt19937_64& rng);

std::vector<TimeSeriesRecord> gen_three_mode(const ThreeModeSystem& system, std::size_t n_series, std::size_t T,
                                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// JSON lines: {"id", "target": [[...], ...], "controls": {"static_id", "time"},
// "labels", "start", "freq"}; optional keys may be absent.

std::vector<TimeSeriesRecord> load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<TimeSeriesRecord>& records, const std::filesystem::path& path);
TimeSeriesRecord record_from_json_line(const std::string& line);
std::string record_to_json_line(const TimeSeriesRecord& record);

// ---------------------------------------------------------------------------
// Dancing bees preprocessing.

struct RawBeeSeries {
  std::int64_t id = 0;
  std::vector<double> x, y, theta;
  std::vector<int> labels;
};

inline constexpr std::size_t kBeeChunkLength = 120;

// Standardizes (x, y) per series, emits [x, y, sin theta, cos theta] and cuts
// chunks of `chunk` steps starting at every label change (t >= 1). Chunks
// running past the end are dropped; series shorter than `chunk` are skipped.
std::vector<TimeSeriesRecord> preprocess_bees(const std::vector<RawBeeSeries>& raw,
                                              std::size_t chunk = kBeeChunkLength,
                                              std::vector<std::string>* warnings = nullptr);

}  // namespace redsds::data
