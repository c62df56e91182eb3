#include "ddar/training.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ddar/io.hpp"

namespace ddar {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("TrainConfig: lambda not in [0,1]");
    if (sigma <= 0.0) throw std::invalid_argument("TrainConfig: sigma <= 0");
    if (ema_gamma < 0.0 || ema_gamma > 1.0)
        throw std::invalid_argument("TrainConfig: ema_gamma not in [0,1]");
    if (num_prototypes < 2) throw std::invalid_argument("TrainConfig: num_prototypes < 2");
}

void AdamState::init(const std::vector<Matrix*>& params) {
    m.clear();
    v.clear();
    for (const Matrix* p : params) {
        m.emplace_back(p->rows(), p->cols());
        v.emplace_back(p->rows(), p->cols());
    }
    step = 0;
}

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state, double learning_rate) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        Matrix& p = *params[t];
        const Matrix& g = grads[t];
        check_same_shape(p, g, "adam_step");
        Matrix& m = state.m[t];
        Matrix& v = state.v[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            p[i] -= learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
}

MinibatchIterator::MinibatchIterator(std::size_t n, std::size_t batch_size, Rng& rng)
    : n_(n), batch_size_(batch_size), rng_(rng) {
    if (batch_size_ < 1) throw std::invalid_argument("minibatches: batch_size < 1");
    if (n_ < 1) throw std::invalid_argument("minibatches: empty dataset");
}

std::vector<std::size_t> MinibatchIterator::next() {
    if (cursor_ >= order_.size()) {
        order_ = rng_.permutation(n_);
        cursor_ = 0;
    }
    const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
    std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                   order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return batch;
}

void update_centroids_ema(DdarModel& model, const ForwardTrace& trace,
                          const std::vector<int>& labels, double gamma) {
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("update_centroids_ema: gamma not in [0,1]");
    for (int c = 0; c < model.num_classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t b = 0; b < labels.size(); ++b)
            if (labels[b] == c) members.push_back(b);
        if (members.empty()) continue;
        // class mean of W_c f~ over batch members
        Matrix mean(1, model.centroid_dim);
        for (std::size_t b : members) {
            for (std::size_t j = 0; j < model.centroid_dim; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < model.num_prototypes(); ++k)
                    acc += model.rbf_weights[c](j, k) * trace.f_tilde(b, k);
                mean(0, j) += acc;
            }
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t j = 0; j < model.centroid_dim; ++j)
            model.centroids[c](0, j) =
                gamma * model.centroids[c](0, j) + (1.0 - gamma) * mean(0, j) * inv;
    }
}

namespace {

void check_finite(const DdarModel& model, const LossBreakdown& loss, std::size_t step) {
    if (!std::isfinite(loss.total))
        throw NumericError("train: non-finite loss at step " + std::to_string(step));
    for (const Matrix* p : trainable_params(const_cast<DdarModel&>(model)))
        if (!p->all_finite())
            throw NumericError("train: non-finite parameter at step " +
                                     std::to_string(step));
    for (const Matrix& c : model.centroids)
        if (!c.all_finite())
            throw NumericError("train: non-finite centroid at step " +
                                     std::to_string(step));
}

}  // namespace

std::pair<DdarModel, TrainState> train(const Dataset& dataset,
                                       const ExtractorConfig& extractor_config,
                                       const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.size() == 0) throw std::invalid_argument("train: empty dataset");
    const int num_classes = dataset.num_classes();
    if (num_classes < 2) throw std::invalid_argument("train: need at least 2 classes");
    std::vector<std::size_t> per_class(static_cast<std::size_t>(num_classes), 0);
    for (int y : dataset.y) {
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("train: label " + std::to_string(y) + " out of range");
        ++per_class[static_cast<std::size_t>(y)];
    }
    for (int c = 0; c < num_classes; ++c)
        if (per_class[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("train: class " + std::to_string(c) + " has no samples");

    Rng rng(cfg.seed);
    DdarModel model = init_model(extractor_config, num_classes, cfg.num_prototypes,
                                 cfg.centroid_dim, cfg.sigma, cfg.lambda, InitStrategy::Random,
                                 rng);
    TrainState state;
    state.seed = cfg.seed;
    state.adam.init(trainable_params(model));

    MinibatchIterator batches(dataset.size(), cfg.batch_size, rng);
    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
        const auto idx = batches.next();
        Matrix X(idx.size(), dataset.dim());
        std::vector<int> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < dataset.dim(); ++j) X(i, j) = dataset.X(idx[i], j);
            y[i] = dataset.y[idx[i]];
        }

        ModelGraph graph = build_forward(model, X, /*training=*/true, &rng);
        TotalLoss loss = total_loss(graph, y, cfg.lambda, cfg.loss_terms);
        backward(loss.node);

        auto params = trainable_params(model);
        std::vector<Matrix> grads;
        grads.reserve(params.size());
        for (const NodePtr& p : graph.params) grads.push_back(p->grad);
        const ForwardTrace trace = graph.trace();

        adam_step(params, grads, state.adam, cfg.learning_rate);
        update_centroids_ema(model, trace, y, cfg.ema_gamma);

        state.loss_history.push_back(loss.breakdown);
        state.step = step;
        check_finite(model, loss.breakdown, step);
    }
    return {std::move(model), std::move(state)};
}

void save_loss_history_csv(const std::vector<LossBreakdown>& history, const std::string& path) {
    std::ostringstream out;
    out << "step,rbf,dissimilar,entropy,total\n";
    char buf[128];
    for (std::size_t i = 0; i < history.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i + 1, history[i].rbf,
                      history[i].dissimilar, history[i].entropy, history[i].total);
        out << buf;
    }
    write_file_atomic(path, out.str());
}

}  // namespace ddar
