#include "ddar/model.hpp"

#include <cmath>
#include <stdexcept>

namespace ddar {

void ExtractorConfig::validate() const {
    if (input_dim < 1 || width < 1 || embed_dim < 1)
        throw std::invalid_argument("ExtractorConfig: dimensions must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("ExtractorConfig: dropout_rate must be in [0,1)");
}

void DdarModel::validate() const {
    config.validate();
    if (prototypes.rows() < 2)
        throw std::invalid_argument("DdarModel: need at least 2 prototypes");
    if (prototypes.cols() != config.embed_dim)
        throw std::invalid_argument("DdarModel: prototype dim " +
                                    std::to_string(prototypes.cols()) + " != embed_dim " +
                                    std::to_string(config.embed_dim));
    for (std::size_t i = 0; i < prototypes.rows(); ++i)
        if (row_norm(prototypes, i) == 0.0)
            throw std::invalid_argument("DdarModel: prototype " + std::to_string(i) +
                                        " has zero norm");
    if (sigma <= 0.0) throw std::invalid_argument("DdarModel: sigma must be positive");
    if (rbf_weights.size() != static_cast<std::size_t>(num_classes) ||
        centroids.size() != static_cast<std::size_t>(num_classes))
        throw std::invalid_argument("DdarModel: per-class tensor count != num_classes");
    for (int c = 0; c < num_classes; ++c) {
        if (rbf_weights[c].rows() != centroid_dim || rbf_weights[c].cols() != num_prototypes())
            throw std::invalid_argument("DdarModel: W_" + std::to_string(c) + " has shape " +
                                        rbf_weights[c].shape_str());
        if (centroids[c].rows() != 1 || centroids[c].cols() != centroid_dim)
            throw std::invalid_argument("DdarModel: centroid " + std::to_string(c) +
                                        " has shape " + centroids[c].shape_str());
    }
}

std::vector<Matrix*> trainable_params(DdarModel& model) {
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
    p.push_back(&model.prototypes);
    for (auto& w : model.rbf_weights) p.push_back(&w);
    return p;
}

namespace {

NodePtr dropout_mask(const NodePtr& h, double rate, Rng& rng) {
    // Inverted dropout: kept units scaled by 1/(1-p) so eval needs no rescale.
    const Matrix& v = h->value;
    Matrix mask(v.rows(), v.cols());
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.next_uniform() < rate ? 0.0 : keep;
    return mul(h, leaf(std::move(mask)));
}

}  // namespace

namespace {

// Consumes 2 + 2*depth + 2 leaves starting at params[offset].
NodePtr extractor_graph_from(const std::vector<NodePtr>& params, std::size_t offset,
                             std::size_t depth, double dropout_rate, const Matrix& X,
                             bool training, Rng* dropout_rng) {
    const bool use_dropout = training && dropout_rate > 0.0;
    if (use_dropout && dropout_rng == nullptr)
        throw std::invalid_argument("extractor: training-mode dropout needs an rng");
    std::size_t i = offset;
    NodePtr w_in = params[i++], b_in = params[i++];
    if (X.cols() != w_in->value.rows())
        throw std::invalid_argument("extractor: input dim " + std::to_string(X.cols()) +
                                    " != " + std::to_string(w_in->value.rows()));
    NodePtr h = add_rowvec(matmul(leaf(X), w_in), b_in);
    for (std::size_t b = 0; b < depth; ++b) {
        NodePtr wb = params[i++], bb = params[i++];
        h = add(h, relu(add_rowvec(matmul(h, wb), bb)));
        if (use_dropout) h = dropout_mask(h, dropout_rate, *dropout_rng);
    }
    NodePtr w_out = params[i++], b_out = params[i++];
    return add_rowvec(matmul(h, w_out), b_out);
}

}  // namespace

NodePtr extractor_graph(const ExtractorWeights& w, double dropout_rate, const Matrix& X,
                        bool training, Rng* dropout_rng, std::vector<NodePtr>& params) {
    const std::size_t offset = params.size();
    params.push_back(leaf(w.w_in));
    params.push_back(leaf(w.b_in));
    for (std::size_t i = 0; i < w.w_block.size(); ++i) {
        params.push_back(leaf(w.w_block[i]));
        params.push_back(leaf(w.b_block[i]));
    }
    params.push_back(leaf(w.w_out));
    params.push_back(leaf(w.b_out));
    return extractor_graph_from(params, offset, w.w_block.size(), dropout_rate, X, training,
                                dropout_rng);
}

ModelGraph build_forward_with(const DdarModel& model, const std::vector<NodePtr>& params,
                              const Matrix& X, bool training, Rng* dropout_rng) {
    const std::size_t depth = model.config.depth;
    const std::size_t expected = 2 + 2 * depth + 2 + 1 +
                                 static_cast<std::size_t>(model.num_classes);
    if (params.size() != expected)
        throw std::invalid_argument("build_forward_with: expected " + std::to_string(expected) +
                                    " parameter leaves, got " + std::to_string(params.size()));
    ModelGraph g;
    g.params = params;
    g.z = extractor_graph_from(params, 0, depth, model.config.dropout_rate, X, training,
                               dropout_rng);
    std::size_t i = 2 + 2 * depth + 2;
    NodePtr protos = params[i++];
    g.d_p = cosine_rows(g.z, protos);
    g.f_tilde = expn(neg(g.d_p));

    const double n = static_cast<double>(model.centroid_dim);
    const double inv = -1.0 / (n * 2.0 * model.sigma * model.sigma);
    std::vector<NodePtr> kernel_cols;
    for (int c = 0; c < model.num_classes; ++c) {
        NodePtr wc = params[i++];
        auto proj = matmul(g.f_tilde, transpose(wc));            // B x n
        auto diff = sub_rowvec(proj, leaf(model.centroids[c]));  // centroid: constant
        kernel_cols.push_back(expn(scale(row_sum(square(diff)), inv)));
    }
    g.kernels = concat_cols(kernel_cols);
    return g;
}

ModelGraph build_forward(const DdarModel& model, const Matrix& X, bool training,
                         Rng* dropout_rng) {
    std::vector<NodePtr> params;
    for (const Matrix* p : trainable_params(const_cast<DdarModel&>(model)))
        params.push_back(leaf(*p));
    return build_forward_with(model, params, X, training, dropout_rng);
}

Matrix feature_extract(const DdarModel& model, const Matrix& X) {
    std::vector<NodePtr> params;
    return extractor_graph(model.extractor, model.config.dropout_rate, X, false, nullptr, params)
        ->value;
}

Matrix dm_layer(const Matrix& z, const Matrix& prototypes) {
    return cosine_rows(leaf(z), leaf(prototypes))->value;
}

Matrix discriminant_embed(const Matrix& d_p) {
    Matrix out = d_p;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(-out[i]);
    return out;
}

Matrix rbf_kernels(const Matrix& f_tilde, const DdarModel& model) {
    const double n = static_cast<double>(model.centroid_dim);
    const double denom = n * 2.0 * model.sigma * model.sigma;
    Matrix out(f_tilde.rows(), model.num_classes);
    for (int c = 0; c < model.num_classes; ++c) {
        Matrix proj = matmul_nt(f_tilde, model.rbf_weights[c]);  // B x n
        for (std::size_t b = 0; b < proj.rows(); ++b) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < proj.cols(); ++j) {
                const double d = proj(b, j) - model.centroids[c](0, j);
                d2 += d * d;
            }
            out(b, c) = std::exp(-d2 / denom);
        }
    }
    return out;
}

ForwardTrace forward(const DdarModel& model, const Matrix& X) {
    ForwardTrace t;
    t.z = feature_extract(model, X);
    t.d_p = dm_layer(t.z, model.prototypes);
    t.f_tilde = discriminant_embed(t.d_p);
    t.kernels = rbf_kernels(t.f_tilde, model);
    return t;
}

Prediction predict(const DdarModel& model, const Matrix& X) {
    const Matrix k = forward(model, X).kernels;
    Prediction p;
    p.labels.resize(k.rows());
    p.confidence.resize(k.rows());
    p.uncertainty.resize(k.rows());
    for (std::size_t b = 0; b < k.rows(); ++b) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k.cols(); ++c)
            if (k(b, c) > k(b, best)) best = c;
        p.labels[b] = static_cast<int>(best);
        p.confidence[b] = k(b, best);
        p.uncertainty[b] = 1.0 - k(b, best);
    }
    return p;
}

ExtractorWeights init_extractor(const ExtractorConfig& config, Rng& rng) {
    config.validate();
    auto he = [&rng](std::size_t fan_in, std::size_t fan_out) {
        return rng.gaussian_matrix(fan_in, fan_out, std::sqrt(2.0 / static_cast<double>(fan_in)));
    };
    ExtractorWeights w;
    w.w_in = he(config.input_dim, config.width);
    w.b_in = Matrix(1, config.width);
    for (std::size_t i = 0; i < config.depth; ++i) {
        w.w_block.push_back(he(config.width, config.width));
        w.b_block.push_back(Matrix(1, config.width));
    }
    w.w_out = he(config.width, config.embed_dim);
    w.b_out = Matrix(1, config.embed_dim);
    return w;
}

DdarModel init_model(const ExtractorConfig& config, int num_classes,
                     std::size_t num_prototypes, std::size_t centroid_dim, double sigma,
                     double lambda, InitStrategy strategy, Rng& rng,
                     const Dataset* labeled_data) {
    if (num_classes < 2) throw std::invalid_argument("init_model: need at least 2 classes");
    if (num_prototypes < 2) throw std::invalid_argument("init_model: need at least 2 prototypes");

    DdarModel m;
    m.config = config;
    m.num_classes = num_classes;
    m.centroid_dim = centroid_dim;
    m.sigma = sigma;
    m.lambda = lambda;
    m.extractor = init_extractor(config, rng);

    m.prototypes = rng.gaussian_matrix(num_prototypes, config.embed_dim);
    for (std::size_t i = 0; i < num_prototypes; ++i) {
        const double nrm = row_norm(m.prototypes, i);
        for (std::size_t j = 0; j < config.embed_dim; ++j) m.prototypes(i, j) /= nrm;
    }

    if (strategy == InitStrategy::ClassMean) {
        if (labeled_data == nullptr)
            throw std::invalid_argument("init_model: class_mean requires labeled data");
        if (num_prototypes < static_cast<std::size_t>(num_classes))
            throw std::invalid_argument("init_model: class_mean needs m >= C");
        std::vector<NodePtr> unused;
        const Matrix z = extractor_graph(m.extractor, 0.0, labeled_data->X, false, nullptr,
                                         unused)->value;
        for (int c = 0; c < num_classes; ++c) {
            std::size_t count = 0;
            std::vector<double> mean(config.embed_dim, 0.0);
            for (std::size_t i = 0; i < labeled_data->size(); ++i) {
                if (labeled_data->y[i] != c) continue;
                for (std::size_t j = 0; j < config.embed_dim; ++j) mean[j] += z(i, j);
                ++count;
            }
            if (count == 0)
                throw std::invalid_argument("init_model: class " + std::to_string(c) +
                                            " has no labeled samples");
            for (std::size_t j = 0; j < config.embed_dim; ++j)
                m.prototypes(c, j) = mean[j] / static_cast<double>(count);
        }
    }

    const double w_scale = 1.0 / std::sqrt(static_cast<double>(num_prototypes));
    for (int c = 0; c < num_classes; ++c) {
        m.rbf_weights.push_back(rng.gaussian_matrix(centroid_dim, num_prototypes, w_scale));
        m.centroids.push_back(Matrix(1, centroid_dim));
    }
    m.validate();
    return m;
}

}  // namespace ddar
