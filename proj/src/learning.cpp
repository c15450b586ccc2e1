#include "redsds/learning.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "redsds/error.hpp"
#include "redsds/hsmm.hpp"

namespace redsds::learning {

void AnnealSchedule::validate() const {
  require(minimum > 0.0 && initial >= minimum, "anneal: need initial >= minimum > 0");
  require(rate > 0.0 && rate <= 1.0, "anneal: decay rate must lie in (0, 1]");
  require(begin >= 0 && every >= 1, "anneal: begin must be >= 0 and every >= 1");
}

double AnnealSchedule::at(std::int64_t step) const {
  require(step >= 0, "anneal: negative step");
  if (step < begin) return initial;
  const auto decays = static_cast<double>((step - begin) / every);
  return std::max(minimum, initial * std::pow(rate, decays));
}

void TrainConfig::validate() const {
  require(batch_size >= 1, "train: batch size must be positive");
  require(steps >= 0, "train: steps must be non-negative");
  require(samples >= 1, "train: samples must be positive");
  require(checkpoint_every >= 0, "train: checkpoint interval must be non-negative");
  switch_temperature.validate();
  duration_temperature.validate();
}

Batch make_batch(std::span<const data::TimeSeriesRecord* const> records, std::size_t T,
                 std::span<const std::size_t> offsets, forecast::Normalization normalization) {
  require(!records.empty(), "make_batch: no records");
  require(offsets.empty() || offsets.size() == records.size(), "make_batch: one offset per record");
  Batch b;
  b.T = T;
  b.B = records.size();
  b.dim = records.front()->dim;
  b.y.resize(T * b.B * b.dim);
  const bool with_controls = records.front()->controls.has_value();
  for (std::size_t s = 0; s < b.B; ++s) {
    const data::TimeSeriesRecord& r = *records[s];
    const std::size_t off = offsets.empty() ? 0 : offsets[s];
    if (r.dim != b.dim) throw DataError("batch mixes observation dimensions");
    if (off + T > r.length())
      throw DataError("record " + std::to_string(r.id) + " has " + std::to_string(r.length()) +
                      " steps, window needs " + std::to_string(off + T));
    std::vector<double> window(r.target.begin() + off * b.dim, r.target.begin() + (off + T) * b.dim);
    if (normalization != forecast::Normalization::none) {
      auto n = forecast::normalize(window, normalization, "record " + std::to_string(r.id));
      window = std::move(n.values);
      b.log_det.push_back(n.log_det);
    }
    for (std::size_t t = 0; t < T; ++t)
      std::copy_n(window.begin() + t * b.dim, b.dim, b.y.begin() + (t * b.B + s) * b.dim);
    b.ids.push_back(r.id);
    if (r.controls.has_value() != with_controls) throw DataError("batch mixes series with and without controls");
    if (with_controls) {
      model::SeriesControls c;
      c.static_id = r.controls->static_id;
      const std::size_t F = r.controls->time_dim;
      if (F > 0) c.time_features.assign(r.controls->time.begin() + off * F, r.controls->time.begin() + (off + T) * F);
      b.controls.push_back(std::move(c));
    }
  }
  return b;
}

Batch make_batch(std::span<const data::TimeSeriesRecord> records) {
  require(!records.empty(), "make_batch: no records");
  std::vector<const data::TimeSeriesRecord*> ptrs;
  for (const auto& r : records) {
    if (r.length() != records.front().length()) throw DataError("make_batch: series lengths differ");
    ptrs.push_back(&r);
  }
  return make_batch(ptrs, records.front().length(), {}, forecast::Normalization::none);
}

nn::Tensor standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = normal(rng);
  return nn::Tensor::constant({rows, cols}, std::move(v));
}

ElboResult elbo(const model::SwitchingModel& model, const inference::InferenceNetwork& net, const Batch& batch,
                const model::Temperatures& temps, const nn::Tensor& noise) {
  const auto& cfg = model.config();
  require(batch.dim == cfg.obs_dim, "elbo: observation dimension does not match the model");
  require(cfg.controls_enabled == !batch.controls.empty(), "elbo: controls must be present exactly when enabled");
  const std::size_t T = batch.T, B = batch.B;
  const nn::Tensor Y = nn::Tensor::constant({T * B, batch.dim}, batch.y);
  const nn::Tensor U = model.batch_controls(batch.controls, T);
  ElboResult r;
  r.sample = net.sample(Y, U, noise, T, B);
  auto series_name = [&](std::size_t s) { return std::to_string(batch.ids.empty() ? s : batch.ids[s]); };
  r.dp = model.dp_tensors(Y, r.sample.x, U, T, B, temps);
  const std::size_t K = cfg.num_switches;
  for (std::size_t i = 0; i < T * B * K; ++i) {
    if (!std::isfinite(r.dp.b[i]))
      throw NumericError("non-finite conditional likelihood for series " + series_name((i / K) % B));
  }
  r.loglik = hsmm::loglik(r.dp, T, B, cfg.max_duration);
  nn::Tensor per_series = r.loglik - r.sample.log_q;
  if (!batch.log_det.empty()) per_series = per_series + nn::Tensor::constant({B}, batch.log_det);
  for (std::size_t s = 0; s < B; ++s) {
    if (!std::isfinite(per_series[s])) throw NumericError("non-finite bound for series " + series_name(s));
  }
  r.objective = nn::mean(per_series);
  return r;
}

std::string metrics_header() { return "step\telbo\ttau_z\ttau_rho\tlr\tgrad_norm"; }

std::string format_metrics(const StepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g", static_cast<long long>(m.step), m.elbo,
                m.tau_z, m.tau_rho, m.learning_rate, m.grad_norm);
  return buf;
}

namespace {

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::int64_t step) {
  const auto s = static_cast<std::uint64_t>(step);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(s),
                    static_cast<std::uint32_t>(s >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Trainer::Trainer(const model::ModelConfig& model_config, const TrainConfig& train_config)
    : model_config_(model_config),
      train_config_((train_config.validate(), train_config)),
      init_rng_(derived_rng(train_config.seed, 1, 0)),
      model_(model_config, store_, init_rng_),
      net_(model_config, store_, init_rng_) {}

StepMetrics Trainer::step(std::span<const data::TimeSeriesRecord> records, const std::filesystem::path& dump_dir) {
  require(!records.empty(), "train: dataset is empty");
  const TrainConfig& tc = train_config_;
  const std::int64_t step = state_.step;
  auto rng = derived_rng(tc.seed, 2, step);

  // Batch without replacement when the dataset is large enough.
  const std::size_t N = records.size();
  std::vector<std::size_t> picks;
  if (tc.batch_size <= N) {
    std::vector<std::size_t> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < tc.batch_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, N - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    picks.assign(idx.begin(), idx.begin() + tc.batch_size);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    for (std::size_t i = 0; i < tc.batch_size; ++i) picks.push_back(pick(rng));
  }
  std::size_t T = tc.window;
  if (T == 0) {
    T = records[picks.front()].length();
    for (std::size_t i : picks)
      if (records[i].length() != T) throw DataError("series lengths differ; set a training window");
  }
  std::vector<const data::TimeSeriesRecord*> ptrs;
  std::vector<std::size_t> offsets;
  for (std::size_t i : picks) {
    const auto& r = records[i];
    if (r.length() < T) throw DataError("record " + std::to_string(r.id) + " is shorter than the training window");
    std::uniform_int_distribution<std::size_t> off(0, r.length() - T);
    const std::size_t o = off(rng);
    for (std::size_t k = 0; k < tc.samples; ++k) {
      ptrs.push_back(&r);
      offsets.push_back(o);
    }
  }
  const Batch batch = make_batch(ptrs, T, offsets, tc.normalization);
  const nn::Tensor noise = standard_normal(T * batch.B, model_config_.state_dim, rng);
  const model::Temperatures temps = tc.temperatures(step);

  auto dump = [&](const std::string& what) {
    if (!dump_dir.empty()) {
      std::filesystem::create_directories(dump_dir);
      std::vector<data::TimeSeriesRecord> rs;
      for (const auto* p : ptrs) rs.push_back(*p);
      data::write_jsonl(rs, dump_dir / ("nonfinite_batch_step" + std::to_string(step) + ".jsonl"));
    }
    throw NumericError("step " + std::to_string(step) + ": " + what);
  };

  ElboResult r;
  try {
    r = elbo(model_, net_, batch, temps, noise);
  } catch (const NumericError& e) {
    dump(e.what());
  }
  const nn::GradMap grads = nn::backward(-r.objective, store_);
  for (const auto& [name, g] : grads)
    for (double v : g)
      if (!std::isfinite(v)) dump("non-finite gradient for " + name);
  const nn::StepReport report = nn::adam_step(store_, grads, state_, tc.optimizer);
  return {step, r.objective.item(), temps.switch_tau, temps.duration_tau, report.learning_rate, report.grad_norm};
}

void Trainer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  store_.save(dir / "params.ckpt");
  state_.save(dir / "optimizer.ckpt");
}

void Trainer::load(const std::filesystem::path& dir) {
  store_.assign_all(nn::ParamStore::load(dir / "params.ckpt"));
  if (std::filesystem::exists(dir / "optimizer.ckpt")) {
    state_ = nn::OptimizerState::load(dir / "optimizer.ckpt");
  } else {
    state_ = {};
  }
}

void train(Trainer& trainer, std::span<const data::TimeSeriesRecord> records,
           const std::function<void(const StepMetrics&)>& on_step, const std::filesystem::path& checkpoint_dir) {
  const TrainConfig& tc = trainer.config();
  while (trainer.steps_done() < tc.steps) {
    const auto dump_dir = checkpoint_dir.empty() ? std::filesystem::path{} : checkpoint_dir / "dump";
    const StepMetrics m = trainer.step(records, dump_dir);
    if (on_step) on_step(m);
    const std::int64_t done = trainer.steps_done();
    if (!checkpoint_dir.empty() && tc.checkpoint_every > 0 && done % tc.checkpoint_every == 0 && done < tc.steps)
      trainer.save(checkpoint_dir / ("step" + std::to_string(done)));
  }
  if (!checkpoint_dir.empty()) trainer.save(checkpoint_dir / "final");
}

double evaluate_elbo(const model::SwitchingModel& model, const inference::InferenceNetwork& net,
                     std::span<const data::TimeSeriesRecord> records, const model::Temperatures& temps,
                     std::uint64_t seed, std::size_t batch_size) {
  require(!records.empty(), "evaluate_elbo: no records");
  nn::NoGradGuard guard;
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, records.size() - i);
    const Batch b = make_batch(records.subspan(i, n));
    const nn::Tensor noise = standard_normal(b.T * b.B, model.config().state_dim, rng);
    total += elbo(model, net, b, temps, noise).objective.item() * static_cast<double>(n);
  }
  return total / static_cast<double>(records.size());
}

}  // namespace redsds::learning
