#pragma once

#include <span>
#include <vector>

#include "redsds/datasets.hpp"
#include "redsds/hsmm.hpp"
#include "redsds/inference_net.hpp"
#include "redsds/model.hpp"

namespace redsds::segmentation {

// Most likely switch per step from count-marginalized posteriors [T, K];
// ties go to the smaller index.
std::vector<int> argmax_labels(std::span<const double> switch_marginals, std::size_t T, std::size_t K);
std::vector<int> segment(const hsmm::DiscretePosterior& posterior);

// Maximum-weight perfect matching on a square matrix (row -> column).
std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight);

// Accuracy after the best one-to-one relabeling of `pred`.
double matched_accuracy(std::span<const int> pred, std::span<const int> truth);
// Best mapping pred label -> truth label over the labels present (unmatched: -1).
std::vector<int> best_label_mapping(std::span<const int> pred, std::span<const int> truth);
// Mutual information over the arithmetic mean of the two entropies.
double nmi(std::span<const int> pred, std::span<const int> truth);
double ari(std::span<const int> pred, std::span<const int> truth);

struct SeriesSegmentation {
  std::int64_t id = 0;
  std::vector<int> labels;
  std::vector<double> switch_marginals;  // [T, K]
};

// Runs the posterior mean path through exact inference for each record and
// labels every step. Records in one call must share their length.
std::vector<SeriesSegmentation> segment_records(const model::SwitchingModel& model,
                                                const inference::InferenceNetwork& net,
                                                std::span<const data::TimeSeriesRecord> records,
                                                const model::Temperatures& temps, std::size_t batch_size = 64);

}  // namespace redsds::segmentation
