#include "ddar/losses.hpp"

#include <stdexcept>

namespace ddar {

NodePtr rbf_bce_loss(const NodePtr& kernels, const std::vector<int>& labels) {
    return rbf_bce(kernels, labels);
}

NodePtr dissimilarity_loss(const NodePtr& prototypes) {
    const std::size_t m = prototypes->value.rows();
    if (m < 2) throw std::invalid_argument("dissimilarity_loss: need at least 2 prototypes");
    NodePtr sims = cosine_rows(prototypes, prototypes);  // m x m
    Matrix upper(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) upper(i, j) = 1.0;
    const double pairs = static_cast<double>(m * (m - 1)) / 2.0;
    return scale(reduce(ReduceKind::Sum, mul(sims, leaf(std::move(upper)))), 1.0 / pairs);
}

NodePtr entropy_reg_loss(const NodePtr& d_p) {
    NodePtr s = softmax_row(d_p);
    const double batch = static_cast<double>(d_p->value.rows());
    return scale(reduce(ReduceKind::Sum, mul(s, logn(s))), 1.0 / batch);
}

TotalLoss total_loss(const ModelGraph& graph, const std::vector<int>& labels, double lambda,
                     const LossTerms& terms) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("total_loss: lambda must be in [0,1]");
    // prototypes leaf sits right after the extractor weights
    const std::size_t proto_idx = graph.params.size() -
                                  static_cast<std::size_t>(graph.kernels->value.cols()) - 1;
    NodePtr rbf = rbf_bce_loss(graph.kernels, labels);
    TotalLoss out;
    out.breakdown.lambda = lambda;
    out.breakdown.rbf = rbf->value[0];
    out.node = rbf;
    NodePtr reg;
    if (terms.dissimilar) {
        NodePtr d = dissimilarity_loss(graph.params[proto_idx]);
        out.breakdown.dissimilar = d->value[0];
        reg = d;
    }
    if (terms.entropy) {
        NodePtr e = entropy_reg_loss(graph.d_p);
        out.breakdown.entropy = e->value[0];
        reg = reg ? add(reg, e) : e;
    }
    if (reg && lambda != 0.0) out.node = add(rbf, scale(reg, lambda));
    out.breakdown.total = out.node->value[0];
    return out;
}

double rbf_bce_loss_value(const Matrix& kernels, const std::vector<int>& labels) {
    return rbf_bce(leaf(kernels), labels)->value[0];
}

double dissimilarity_loss_value(const Matrix& prototypes) {
    return dissimilarity_loss(leaf(prototypes))->value[0];
}

double entropy_reg_loss_value(const Matrix& d_p) {
    return entropy_reg_loss(leaf(d_p))->value[0];
}

}  // namespace ddar
