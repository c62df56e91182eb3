#include "ddar/baselines.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace ddar {

namespace {

std::vector<Matrix*> softmax_params(SoftmaxModel& model) {
    std::vector<Matrix*> p;
    ExtractorWeights& e = model.extractor;
    p.push_back(&e.w_in);
    p.push_back(&e.b_in);
    for (std::size_t i = 0; i < e.w_block.size(); ++i) {
        p.push_back(&e.w_block[i]);
        p.push_back(&e.b_block[i]);
    }
    p.push_back(&e.w_out);
    p.push_back(&e.b_out);
    p.push_back(&model.head_w);
    p.push_back(&model.head_b);
    return p;
}

NodePtr logits_graph(const SoftmaxModel& model, const Matrix& X, bool training, Rng* rng,
                     std::vector<NodePtr>& params) {
    NodePtr z = extractor_graph(model.extractor, model.config.dropout_rate, X, training, rng,
                                params);
    auto hw = leaf(model.head_w), hb = leaf(model.head_b);
    params.push_back(hw);
    params.push_back(hb);
    return add_rowvec(matmul(z, hw), hb);
}

Matrix row_softmax(const Matrix& logits) {
    return softmax_row(leaf(logits))->value;
}

SoftmaxPrediction from_probs(Matrix probs) {
    SoftmaxPrediction p;
    const std::size_t B = probs.rows(), C = probs.cols();
    p.labels.resize(B);
    p.confidence.resize(B);
    p.uncertainty.resize(B);
    const double log_c = std::log(static_cast<double>(C));
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t best = 0;
        double entropy = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            if (probs(b, c) > probs(b, best)) best = c;
            if (probs(b, c) > 0.0) entropy -= probs(b, c) * std::log(probs(b, c));
        }
        p.labels[b] = static_cast<int>(best);
        p.confidence[b] = probs(b, best);
        p.uncertainty[b] = std::min(entropy / log_c, 1.0);
    }
    p.probabilities = std::move(probs);
    return p;
}

}  // namespace

SoftmaxModel train_softmax(const Dataset& dataset, const ExtractorConfig& extractor_config,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.size() == 0) throw std::invalid_argument("train_softmax: empty dataset");
    const int num_classes = dataset.num_classes();
    if (num_classes < 2) throw std::invalid_argument("train_softmax: need at least 2 classes");

    Rng rng(cfg.seed);
    SoftmaxModel model;
    model.config = extractor_config;
    model.num_classes = num_classes;
    model.extractor = init_extractor(extractor_config, rng);
    model.head_w = rng.gaussian_matrix(extractor_config.embed_dim, num_classes,
                                       std::sqrt(2.0 / static_cast<double>(extractor_config.embed_dim)));
    model.head_b = Matrix(1, num_classes);

    AdamState adam;
    adam.init(softmax_params(model));
    MinibatchIterator batches(dataset.size(), cfg.batch_size, rng);
    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
        const auto idx = batches.next();
        Matrix X(idx.size(), dataset.dim());
        std::vector<int> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < dataset.dim(); ++j) X(i, j) = dataset.X(idx[i], j);
            y[i] = dataset.y[idx[i]];
        }
        std::vector<NodePtr> leaves;
        NodePtr logits = logits_graph(model, X, /*training=*/true, &rng, leaves);
        NodePtr loss = cross_entropy_with_logits(logits, y);
        backward(loss);
        if (!std::isfinite(loss->value[0]))
            throw NumericError("train_softmax: non-finite loss at step " +
                                     std::to_string(step));
        std::vector<Matrix> grads;
        grads.reserve(leaves.size());
        for (const NodePtr& p : leaves) grads.push_back(p->grad);
        adam_step(softmax_params(model), grads, adam, cfg.learning_rate);
    }
    return model;
}

Matrix softmax_logits(const SoftmaxModel& model, const Matrix& X) {
    std::vector<NodePtr> unused;
    return logits_graph(model, X, false, nullptr, unused)->value;
}

SoftmaxPrediction softmax_uncertainty(const SoftmaxModel& model, const Matrix& X) {
    return from_probs(row_softmax(softmax_logits(model, X)));
}

SoftmaxPrediction mc_dropout_predict(const SoftmaxModel& model, const Matrix& X,
                                     std::size_t passes, std::uint64_t seed) {
    if (model.config.dropout_rate <= 0.0)
        throw std::invalid_argument("mc_dropout_predict: model has no dropout");
    if (passes < 1) throw std::invalid_argument("mc_dropout_predict: passes < 1");
    Rng rng(seed);
    Matrix mean(X.rows(), static_cast<std::size_t>(model.num_classes));
    for (std::size_t t = 0; t < passes; ++t) {
        std::vector<NodePtr> unused;
        Matrix probs = row_softmax(logits_graph(model, X, /*training=*/true, &rng, unused)->value);
        accumulate(mean, probs);
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] /= static_cast<double>(passes);
    return from_probs(std::move(mean));
}

DeepEnsemble deep_ensemble(const Dataset& dataset, const ExtractorConfig& extractor_config,
                           const TrainConfig& train_config,
                           const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 2) throw std::invalid_argument("deep_ensemble: need K >= 2 members");
    DeepEnsemble e;
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    e.duplicate_seed_warning = unique.size() != seeds.size();
    for (std::uint64_t seed : seeds) {
        TrainConfig cfg = train_config;
        cfg.seed = seed;
        e.members.push_back(train_softmax(dataset, extractor_config, cfg));
    }
    return e;
}

SoftmaxPrediction ensemble_predict(const DeepEnsemble& ensemble, const Matrix& X) {
    if (ensemble.members.empty()) throw std::invalid_argument("ensemble_predict: no members");
    Matrix mean(X.rows(), static_cast<std::size_t>(ensemble.members[0].num_classes));
    for (const SoftmaxModel& m : ensemble.members)
        accumulate(mean, row_softmax(softmax_logits(m, X)));
    for (std::size_t i = 0; i < mean.size(); ++i)
        mean[i] /= static_cast<double>(ensemble.members.size());
    return from_probs(std::move(mean));
}

}  // namespace ddar
