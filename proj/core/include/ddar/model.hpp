#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ddar/autodiff.hpp"
#include "ddar/data.hpp"
#include "ddar/matrix.hpp"
#include "ddar/rng.hpp"

namespace ddar {

struct ExtractorConfig {
    std::size_t input_dim = 2;
    std::size_t width = 128;
    std::size_t depth = 12;
    std::size_t embed_dim = 128;
    double dropout_rate = 0.01;

    void validate() const;
};

// Input projection, `depth` residual blocks h <- h + relu(W h + b), output
// projection. Weights stored row-major as (in x out) so batches multiply on
// the left.
struct ExtractorWeights {
    Matrix w_in, b_in;
    std::vector<Matrix> w_block, b_block;
    Matrix w_out, b_out;
};

struct DdarModel {
    ExtractorConfig config;
    ExtractorWeights extractor;
    Matrix prototypes;                 // m x d, rows nonzero
    std::vector<Matrix> rbf_weights;   // per class: n x m
    std::vector<Matrix> centroids;     // per class: 1 x n, EMA-updated
    double sigma = 0.3;
    double lambda = 0.1;
    int num_classes = 2;
    std::size_t centroid_dim = 128;    // n

    std::size_t num_prototypes() const { return prototypes.rows(); }
    void validate() const;
};

struct ForwardTrace {
    Matrix z;        // B x d
    Matrix d_p;      // B x m, entries in [-1, 1]
    Matrix f_tilde;  // B x m, entries in [1/e, e]
    Matrix kernels;  // B x C, entries in (0, 1]
};

// The forward pass as a differentiable graph. `params` aligns with
// trainable_params(model); centroids enter as constants (EMA-only, no
// gradient flow).
struct ModelGraph {
    std::vector<NodePtr> params;
    NodePtr z, d_p, f_tilde, kernels;

    ForwardTrace trace() const {
        return {z->value, d_p->value, f_tilde->value, kernels->value};
    }
};

// Fixed enumeration order: extractor weights, prototypes, then W_c per class.
std::vector<Matrix*> trainable_params(DdarModel& model);

// Builds z only (shared with the softmax baseline). `inputs` receives the
// parameter leaves in extractor order. dropout_rng required when training
// and dropout_rate > 0.
NodePtr extractor_graph(const ExtractorWeights& w, double dropout_rate, const Matrix& X,
                        bool training, Rng* dropout_rng, std::vector<NodePtr>& params);

ModelGraph build_forward(const DdarModel& model, const Matrix& X, bool training = false,
                         Rng* dropout_rng = nullptr);

// Same graph but over caller-supplied parameter leaves (aligned with
// trainable_params); used by gradient checks that need to read leaf grads.
ModelGraph build_forward_with(const DdarModel& model, const std::vector<NodePtr>& params,
                              const Matrix& X, bool training = false,
                              Rng* dropout_rng = nullptr);

// Value-only conveniences.
Matrix feature_extract(const DdarModel& model, const Matrix& X);
Matrix dm_layer(const Matrix& z, const Matrix& prototypes);
Matrix discriminant_embed(const Matrix& d_p);
Matrix rbf_kernels(const Matrix& f_tilde, const DdarModel& model);
ForwardTrace forward(const DdarModel& model, const Matrix& X);

struct Prediction {
    std::vector<int> labels;
    std::vector<double> confidence;   // max_c K_c
    std::vector<double> uncertainty;  // 1 - max_c K_c
};

// Ties break toward the lowest class index.
Prediction predict(const DdarModel& model, const Matrix& X);

enum class InitStrategy { Random, ClassMean };

// Random: Gaussian prototypes row-normalized to unit norm. ClassMean: the
// first C prototypes are per-class means of the embedded data, the rest
// random; requires labeled data.
DdarModel init_model(const ExtractorConfig& config, int num_classes,
                     std::size_t num_prototypes, std::size_t centroid_dim, double sigma,
                     double lambda, InitStrategy strategy, Rng& rng,
                     const Dataset* labeled_data = nullptr);

ExtractorWeights init_extractor(const ExtractorConfig& config, Rng& rng);

}  // namespace ddar
