#include "redsds/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "redsds/error.hpp"
#include "redsds/learning.hpp"

namespace redsds::segmentation {

std::vector<int> argmax_labels(std::span<const double> marg, std::size_t T, std::size_t K) {
  require(marg.size() == T * K && K >= 1, "argmax_labels: expected [T, K] marginals");
  std::vector<int> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (marg[t * K + k] > marg[t * K + best]) best = k;
    out[t] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> segment(const hsmm::DiscretePosterior& posterior) {
  return argmax_labels(posterior.switch_marginals(), posterior.T, posterior.K);
}

// Kuhn-Munkres with potentials, O(n^3), on costs = -weight.
std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t n = weight.size();
  for (const auto& row : weight) require(row.size() == n, "assignment: matrix must be square");
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weight[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

namespace {

struct Contingency {
  std::vector<int> pred_labels, truth_labels;
  std::vector<std::vector<double>> counts;  // [pred][truth]
  double n = 0.0;
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size())
    throw ContractError("labelings differ in length (" + std::to_string(pred.size()) + " vs " +
                                           std::to_string(truth.size()) + ")");
  Contingency c;
  std::map<int, std::size_t> pi, ti;
  for (int a : pred) pi.emplace(a, 0);
  for (int b : truth) ti.emplace(b, 0);
  for (auto& [label, idx] : pi) {
    idx = c.pred_labels.size();
    c.pred_labels.push_back(label);
  }
  for (auto& [label, idx] : ti) {
    idx = c.truth_labels.size();
    c.truth_labels.push_back(label);
  }
  c.counts.assign(pi.size(), std::vector<double>(ti.size(), 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i) c.counts[pi[pred[i]]][ti[truth[i]]] += 1.0;
  c.n = static_cast<double>(pred.size());
  return c;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

std::vector<int> best_label_mapping(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  const std::size_t n = std::max(c.pred_labels.size(), c.truth_labels.size());
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < c.pred_labels.size(); ++i)
    for (std::size_t j = 0; j < c.truth_labels.size(); ++j) w[i][j] = c.counts[i][j];
  const auto a = max_weight_assignment(w);
  int max_pred = 0;
  for (int l : c.pred_labels) max_pred = std::max(max_pred, l);
  std::vector<int> mapping(static_cast<std::size_t>(std::max(0, max_pred)) + 1, -1);
  for (std::size_t i = 0; i < c.pred_labels.size(); ++i) {
    if (c.pred_labels[i] < 0) continue;
    mapping[static_cast<std::size_t>(c.pred_labels[i])] = a[i] < c.truth_labels.size() ? c.truth_labels[a[i]] : -1;
  }
  return mapping;
}

double matched_accuracy(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  if (c.n == 0.0) return 1.0;
  const std::size_t n = std::max(c.pred_labels.size(), c.truth_labels.size());
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < c.pred_labels.size(); ++i)
    for (std::size_t j = 0; j < c.truth_labels.size(); ++j) w[i][j] = c.counts[i][j];
  const auto a = max_weight_assignment(w);
  double hits = 0.0;
  for (std::size_t i = 0; i < n; ++i) hits += w[i][a[i]];
  return hits / c.n;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  if (c.n == 0.0) return 1.0;
  std::vector<double> rows(c.pred_labels.size(), 0.0), cols(c.truth_labels.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      rows[i] += c.counts[i][j];
      cols[j] += c.counts[i][j];
    }
  const double hp = entropy(rows, c.n), ht = entropy(cols, c.n);
  if (hp == 0.0 && ht == 0.0) {
    // Both labelings constant: identical partitions.
    return 1.0;
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double nij = c.counts[i][j];
      if (nij > 0.0) mi += (nij / c.n) * std::log(c.n * nij / (rows[i] * cols[j]));
    }
  const double denom = 0.5 * (hp + ht);
  return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  if (c.n <= 1.0) return 1.0;
  std::vector<double> rows(c.pred_labels.size(), 0.0), cols(c.truth_labels.size(), 0.0);
  double index = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      rows[i] += c.counts[i][j];
      cols[j] += c.counts[i][j];
      index += comb2(c.counts[i][j]);
    }
  double sum_rows = 0.0, sum_cols = 0.0;
  for (double r : rows) sum_rows += comb2(r);
  for (double k : cols) sum_cols += comb2(k);
  const double expected = sum_rows * sum_cols / comb2(c.n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both trivial partitions
  return (index - expected) / (max_index - expected);
}

std::vector<SeriesSegmentation> segment_records(const model::SwitchingModel& model,
                                                const inference::InferenceNetwork& net,
                                                std::span<const data::TimeSeriesRecord> records,
                                                const model::Temperatures& temps, std::size_t batch_size) {
  nn::NoGradGuard guard;
  const auto& cfg = model.config();
  std::vector<SeriesSegmentation> out;
  for (std::size_t i = 0; i < records.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, records.size() - i);
    const learning::Batch b = learning::make_batch(records.subspan(i, n));
    const nn::Tensor Y = nn::Tensor::constant({b.T * b.B, b.dim}, b.y);
    const nn::Tensor U = model.batch_controls(b.controls, b.T);
    const nn::Tensor zero = nn::Tensor::zeros({b.T * b.B, cfg.state_dim});
    const auto sample = net.sample(Y, U, zero, b.T, b.B);
    const auto dp = model.dp_tensors(Y, sample.x, U, b.T, b.B, temps);
    for (std::size_t s = 0; s < b.B; ++s) {
      const auto post = hsmm::posterior(hsmm::extract(dp, b.T, b.B, cfg.max_duration, s));
      SeriesSegmentation seg;
      seg.id = b.ids[s];
      seg.switch_marginals = post.switch_marginals();
      seg.labels = argmax_labels(seg.switch_marginals, post.T, post.K);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace redsds::segmentation
