#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "redsds/datasets.hpp"
#include "redsds/error.hpp"
#include "redsds/forecasting.hpp"
#include "redsds/learning.hpp"
#include "redsds/segmentation.hpp"

namespace redsds::cli {

namespace fs = std::filesystem;

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_manifest(const RunOptions& run, const std::string& command, json extra = json::object()) {
  json m;
  m["command"] = command;
  m["seed"] = run.config.at("seed");
  m["version"] = git_describe();
  m["config"] = run.config;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = *it;
  auto out = open_out(run.out / "manifest.json");
  out << m.dump(2) << '\n';
}

std::vector<data::TimeSeriesRecord> load_dataset(const json& config, const char* key) {
  const std::string path = config.at("data").at(key).get<std::string>();
  if (path.empty()) throw ContractError(std::string("no dataset given: set data.") + key);
  if (!fs::exists(path)) throw DataError("dataset not found: " + path);
  auto records = data::load_jsonl(path);
  if (records.empty()) throw DataError("dataset is empty: " + path);
  return records;
}

struct Loaded {
  model::ModelConfig model;
  learning::TrainConfig train;
  std::unique_ptr<learning::Trainer> trainer;
  model::Temperatures temps;
};

Loaded load_checkpoint(const RunOptions& run) {
  if (run.checkpoint.empty()) throw ContractError("--checkpoint is required");
  if (!fs::exists(run.checkpoint / "params.ckpt"))
    throw DataError("no params.ckpt in checkpoint directory " + run.checkpoint.string());
  Loaded l;
  l.model = model_config(run.config);
  l.train = train_config(run.config);
  l.trainer = std::make_unique<learning::Trainer>(l.model, l.train);
  l.trainer->load(run.checkpoint);
  // inference uses the temperatures reached at the end of training
  l.temps = l.train.temperatures(l.train.steps);
  return l;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.empty() ? std::nan("") : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::optional<json> checkpoint_config(const fs::path& checkpoint) {
  // train writes config.json at the top of its output directory,
  // checkpoints live in <out>/checkpoints/<name>
  for (const fs::path& p : {checkpoint / "config.json", checkpoint / ".." / ".." / "config.json"}) {
    if (fs::exists(p)) return read_config_file(p);
  }
  return std::nullopt;
}

void cmd_generate(const RunOptions& run) {
  const json& d = run.config.at("data");
  const std::string gen = d.at("generator").get<std::string>();
  const auto seed = run.config.at("seed").get<std::uint64_t>();
  auto n_train = d.at("train_series").get<std::size_t>();
  auto n_test = d.at("test_series").get<std::size_t>();
  auto T = d.at("length").get<std::size_t>();
  std::vector<data::TimeSeriesRecord> train, test;
  if (gen == "bouncing_ball") {
    if (!n_train) n_train = 100000;
    if (!n_test) n_test = 1000;
    if (!T) T = 100;
    const double sd = d.at("noise_sd").get<double>();
    train = data::gen_bouncing_ball(n_train, T, derive_seed(seed, 1), sd);
    test = data::gen_bouncing_ball(n_test, T, derive_seed(seed, 2), sd);
  } else if (gen == "three_mode") {
    if (!n_train) n_train = 10000;
    if (!n_test) n_test = 500;
    if (!T) T = 180;
    const auto system = data::make_three_mode_system(seed, d.at("trend").get<double>());
    train = data::gen_three_mode(system, n_train, T, derive_seed(seed, 1));
    test = data::gen_three_mode(system, n_test, T, derive_seed(seed, 2));
  } else {
    throw ContractError("unknown generator '" + gen + "' (bouncing_ball, three_mode)");
  }
  fs::create_directories(run.out);
  data::write_jsonl(train, run.out / "train.jsonl");
  data::write_jsonl(test, run.out / "test.jsonl");
  write_manifest(run, "generate", {{"train_series", n_train}, {"test_series", n_test}, {"length", T}});
}

void cmd_train(const RunOptions& run) {
  const auto model_cfg = model_config(run.config);
  const auto train_cfg = train_config(run.config);
  const auto records = load_dataset(run.config, "train");
  learning::Trainer trainer(model_cfg, train_cfg);
  if (!run.resume.empty()) {
    if (!fs::exists(run.resume / "params.ckpt"))
      throw DataError("no params.ckpt in resume directory " + run.resume.string());
    trainer.load(run.resume);
  }
  fs::create_directories(run.out);
  {
    auto cfg = open_out(run.out / "config.json");
    cfg << run.config.dump(2) << '\n';
  }
  // Keep metric rows from before the resume point when continuing in place.
  std::vector<std::string> kept;
  const fs::path metrics_path = run.out / "metrics.tsv";
  if (!run.resume.empty() && fs::exists(metrics_path)) {
    std::ifstream in(metrics_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (std::stoll(line.substr(0, line.find('\t'))) < trainer.steps_done()) kept.push_back(line);
    }
  }
  auto metrics = open_out(metrics_path);
  metrics << learning::metrics_header() << '\n';
  for (const auto& line : kept) metrics << line << '\n';
  const std::int64_t start = trainer.steps_done();
  learning::train(
      trainer, records,
      [&](const learning::StepMetrics& m) {
        metrics << learning::format_metrics(m) << '\n';
        if (m.step % 100 == 0) metrics.flush();
      },
      run.out / "checkpoints");
  metrics.flush();
  json extra = {{"start_step", start}, {"steps", train_cfg.steps}};
  if (!run.resume.empty()) extra["resume"] = run.resume.string();
  write_manifest(run, "train", extra);
}

void cmd_segment(const RunOptions& run) {
  Loaded l = load_checkpoint(run);
  const auto records = load_dataset(run.config, "test");
  const auto batch = run.config.at("segment").at("batch_size").get<std::size_t>();
  require(batch >= 1, "segment.batch_size must be positive");
  std::vector<segmentation::SeriesSegmentation> segs;
  // segment_records needs equal lengths within a call
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    while (j < records.size() && records[j].length() == records[i].length()) ++j;
    auto part = segmentation::segment_records(l.trainer->model(), l.trainer->network(),
                                              std::span(records).subspan(i, j - i), l.temps, batch);
    segs.insert(segs.end(), part.begin(), part.end());
    i = j;
  }
  fs::create_directories(run.out);
  auto labels = open_out(run.out / "labels.txt");
  auto metrics = open_out(run.out / "metrics.tsv");
  metrics << "series_id\taccuracy\tnmi\tari\n";
  std::vector<double> acc, nmi, ari;
  for (std::size_t i = 0; i < records.size(); ++i) {
    labels << segs[i].id << '\t';
    for (std::size_t t = 0; t < segs[i].labels.size(); ++t) labels << (t ? " " : "") << segs[i].labels[t];
    labels << '\n';
    if (!records[i].labels) {
      metrics << records[i].id << "\tNA\tNA\tNA\n";
      continue;
    }
    const auto& truth = *records[i].labels;
    acc.push_back(segmentation::matched_accuracy(segs[i].labels, truth));
    nmi.push_back(segmentation::nmi(segs[i].labels, truth));
    ari.push_back(segmentation::ari(segs[i].labels, truth));
    metrics << records[i].id << '\t' << fmt(acc.back()) << '\t' << fmt(nmi.back()) << '\t' << fmt(ari.back()) << '\n';
  }
  metrics << "mean\t" << fmt(mean_of(acc)) << '\t' << fmt(mean_of(nmi)) << '\t' << fmt(mean_of(ari)) << '\n';
  metrics << "std\t" << fmt(std_of(acc)) << '\t' << fmt(std_of(nmi)) << '\t' << fmt(std_of(ari)) << '\n';
  write_manifest(run, "segment", {{"checkpoint", run.checkpoint.string()}});
  std::cout << "accuracy " << fmt(mean_of(acc)) << "  nmi " << fmt(mean_of(nmi)) << "  ari " << fmt(mean_of(ari))
            << '\n';
}

void cmd_forecast(const RunOptions& run) {
  Loaded l = load_checkpoint(run);
  const auto records = load_dataset(run.config, "test");
  const json& f = run.config.at("forecast");
  const auto seed = run.config.at("seed").get<std::uint64_t>();
  forecast::ForecastOptions opt;
  opt.horizon = f.at("horizon").get<std::size_t>();
  opt.num_paths = f.at("num_paths").get<std::size_t>();
  opt.sample_noise = f.at("sample_noise").get<bool>();
  opt.normalization = l.train.normalization;
  opt.temperatures = l.temps;
  const auto fixed_context = f.at("context").get<std::size_t>();
  const auto levels = forecast::default_quantile_grid();

  fs::create_directories(run.out);
  auto out = open_out(run.out / "forecasts.jsonl");
  auto table = open_out(run.out / "crps.tsv");
  table << "series_id\tcrps\tpersistence_crps\n";
  std::vector<double> model_scores, naive_scores;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::size_t context = fixed_context;
    if (context == 0) {
      if (r.length() <= opt.horizon)
        throw DataError("record " + std::to_string(r.id) + " is not longer than the forecast horizon");
      context = r.length() - opt.horizon;
    }
    opt.seed = derive_seed(seed, 3, i);
    const auto result = forecast::forecast_unroll(l.trainer->model(), l.trainer->network(), r, context, opt);
    json line = {{"id", r.id}, {"context", context}, {"horizon", opt.horizon}, {"levels", levels},
                 {"quantiles", result.quantiles(levels)}, {"mean", result.mean()}};
    out << line.dump() << '\n';
    double score = std::nan(""), naive = std::nan("");
    if (opt.horizon > 0 && r.dim == 1 && context + opt.horizon <= r.length()) {
      score = forecast::mean_crps(result, r, context, levels);
      const auto p = forecast::persistence_forecast(r, context, opt.horizon);
      naive = 0.0;
      for (std::size_t t = 0; t < opt.horizon; ++t)
        naive += forecast::crps(std::span(&p[t], 1), r.target[context + t], levels);
      naive /= static_cast<double>(opt.horizon);
      model_scores.push_back(score);
      naive_scores.push_back(naive);
    }
    table << r.id << '\t' << fmt(score) << '\t' << fmt(naive) << '\n';
  }
  table << "mean\t" << fmt(mean_of(model_scores)) << '\t' << fmt(mean_of(naive_scores)) << '\n';
  write_manifest(run, "forecast", {{"checkpoint", run.checkpoint.string()}});
  std::cout << "crps " << fmt(mean_of(model_scores)) << "  persistence " << fmt(mean_of(naive_scores)) << '\n';
}

}  // namespace redsds::cli
