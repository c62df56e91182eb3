#pragma once

#include <vector>

#include "ddar/autodiff.hpp"
#include "ddar/model.hpp"

namespace ddar {

struct LossBreakdown {
    double rbf = 0.0;
    double dissimilar = 0.0;
    double entropy = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

// Controls which regularization terms enter the total (ablation switches).
struct LossTerms {
    bool dissimilar = true;
    bool entropy = true;
};

// Mean over the batch of the one-vs-rest BCE between kernels and one-hot
// labels (graph node; thin wrapper over rbf_bce).
NodePtr rbf_bce_loss(const NodePtr& kernels, const std::vector<int>& labels);

// Mean pairwise cosine similarity of the prototype rows; minimizing it
// pushes prototypes apart and keeps them from collapsing onto one direction.
NodePtr dissimilarity_loss(const NodePtr& prototypes);

// Mean over the batch of the negative entropy of softmax(d_p); ranges in
// [-log m, 0], minimized at the uniform distribution.
NodePtr entropy_reg_loss(const NodePtr& d_p);

struct TotalLoss {
    NodePtr node;  // scalar, differentiable end-to-end
    LossBreakdown breakdown;
};

TotalLoss total_loss(const ModelGraph& graph, const std::vector<int>& labels, double lambda,
                     const LossTerms& terms = {});

// Value-only conveniences for tests and reporting.
double rbf_bce_loss_value(const Matrix& kernels, const std::vector<int>& labels);
double dissimilarity_loss_value(const Matrix& prototypes);
double entropy_reg_loss_value(const Matrix& d_p);

}  // namespace ddar
