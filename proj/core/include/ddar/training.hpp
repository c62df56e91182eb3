#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddar/data.hpp"
#include "ddar/losses.hpp"
#include "ddar/model.hpp"
#include "ddar/rng.hpp"

namespace ddar {

// NaN/Inf detected in a loss or parameter; distinct from data/config errors
// so callers can report numeric failures separately.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    std::size_t max_steps = 2000;
    double lambda = 0.1;
    double sigma = 0.3;
    std::size_t num_prototypes = 64;
    std::size_t centroid_dim = 128;
    double ema_gamma = 0.999;
    std::uint64_t seed = 0;
    LossTerms loss_terms;

    void validate() const;
};

// Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamState {
    std::vector<Matrix> m, v;
    std::size_t step = 0;

    void init(const std::vector<Matrix*>& params);
};

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state, double learning_rate);

struct TrainState {
    AdamState adam;
    std::size_t step = 0;
    std::vector<LossBreakdown> loss_history;
    std::uint64_t seed = 0;
};

// Seeded shuffled minibatch stream; a fresh permutation per epoch, the final
// short batch of an epoch is kept.
class MinibatchIterator {
public:
    MinibatchIterator(std::size_t n, std::size_t batch_size, Rng& rng);
    std::vector<std::size_t> next();

private:
    std::size_t n_, batch_size_, cursor_ = 0;
    Rng& rng_;
    std::vector<std::size_t> order_;
};

// EMA centroid update: for every class present in the batch,
// psi_c <- gamma * psi_c + (1 - gamma) * mean over its members of W_c f~.
// Classes absent from the batch are untouched; no gradient flows through.
void update_centroids_ema(DdarModel& model, const ForwardTrace& trace,
                          const std::vector<int>& labels, double gamma);

// Full training loop: forward -> losses -> backward -> Adam -> centroid EMA,
// per step, deterministic given (dataset, configs, seed). Throws
// std::runtime_error on NaN/Inf in the loss or any parameter.
std::pair<DdarModel, TrainState> train(const Dataset& dataset,
                                       const ExtractorConfig& extractor_config,
                                       const TrainConfig& train_config);

void save_loss_history_csv(const std::vector<LossBreakdown>& history, const std::string& path);

}  // namespace ddar
