#pragma once

#include <cstdint>
#include <vector>

#include "ddar/data.hpp"
#include "ddar/model.hpp"
#include "ddar/training.hpp"

namespace ddar {

// Plain DNN with a linear softmax head; shares the extractor family and the
// Adam training loop with DDAR so head/regularization differences are
// isolated.
struct SoftmaxModel {
    ExtractorConfig config;
    ExtractorWeights extractor;
    Matrix head_w;  // embed_dim x C
    Matrix head_b;  // 1 x C
    int num_classes = 2;
};

struct SoftmaxPrediction {
    Matrix probabilities;             // B x C, rows sum to 1
    std::vector<int> labels;
    std::vector<double> confidence;   // max probability
    std::vector<double> uncertainty;  // predictive entropy / log C, in [0,1]
};

SoftmaxModel train_softmax(const Dataset& dataset, const ExtractorConfig& extractor_config,
                           const TrainConfig& train_config);

Matrix softmax_logits(const SoftmaxModel& model, const Matrix& X);
SoftmaxPrediction softmax_uncertainty(const SoftmaxModel& model, const Matrix& X);

// T stochastic forward passes with dropout active; mean probabilities,
// uncertainty = entropy of the mean. Requires dropout_rate > 0.
SoftmaxPrediction mc_dropout_predict(const SoftmaxModel& model, const Matrix& X, std::size_t passes,
                                     std::uint64_t seed);

struct DeepEnsemble {
    std::vector<SoftmaxModel> members;
    bool duplicate_seed_warning = false;
};

DeepEnsemble deep_ensemble(const Dataset& dataset, const ExtractorConfig& extractor_config,
                           const TrainConfig& train_config, const std::vector<std::uint64_t>& seeds);

SoftmaxPrediction ensemble_predict(const DeepEnsemble& ensemble, const Matrix& X);

}  // namespace ddar
