#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ddar/matrix.hpp"

namespace ddar {

// Reverse-mode tape over whole-matrix operations. Each Node holds its value,
// an accumulated gradient of the same shape, and a local backward rule that
// pushes the node's gradient into its parents. Graphs are built fresh per
// evaluation; parameters enter as leaves and their grads are read after
// backward().
struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // no-op for leaves
};

using NodePtr = std::shared_ptr<Node>;

NodePtr leaf(Matrix value);

enum class EwKind { Relu, Exp, Neg, Log, Square };
enum class ReduceKind { Sum, Mean, RowL2Norm };

NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr elementwise(EwKind kind, const NodePtr& a);
inline NodePtr relu(const NodePtr& a) { return elementwise(EwKind::Relu, a); }
inline NodePtr expn(const NodePtr& a) { return elementwise(EwKind::Exp, a); }
inline NodePtr neg(const NodePtr& a) { return elementwise(EwKind::Neg, a); }
inline NodePtr logn(const NodePtr& a) { return elementwise(EwKind::Log, a); }
inline NodePtr square(const NodePtr& a) { return elementwise(EwKind::Square, a); }

// Row-wise cosine similarity: z (B x d) against p (m x d) -> B x m.
// Rejects zero-norm rows on either side (prototype collapse must be loud).
NodePtr cosine_rows(const NodePtr& z, const NodePtr& p);

NodePtr softmax_row(const NodePtr& a);
NodePtr reduce(ReduceKind kind, const NodePtr& a);

NodePtr add(const NodePtr& a, const NodePtr& b);
// a (B x n) plus / minus a 1 x n row vector broadcast over rows.
NodePtr add_rowvec(const NodePtr& a, const NodePtr& v);
NodePtr sub_rowvec(const NodePtr& a, const NodePtr& v);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double s);
NodePtr row_sum(const NodePtr& a);  // B x n -> B x 1
NodePtr concat_cols(const std::vector<NodePtr>& columns);  // each B x 1 -> B x C
NodePtr transpose(const NodePtr& a);

// Mean over the batch of the multiclass one-vs-rest binary cross entropy
// between kernel values and one-hot labels; kernel values are clamped to
// [1e-12, 1 - 1e-12] inside the logs.
NodePtr rbf_bce(const NodePtr& kernels, const std::vector<int>& labels);

// Mean over the batch of -log softmax(logits)[label], computed stably.
NodePtr cross_entropy_with_logits(const NodePtr& logits, const std::vector<int>& labels);

// Seeds grad with 1 at the scalar output and propagates in reverse
// topological order; every reachable node is visited exactly once.
void backward(const NodePtr& output);

// Max relative error between the reverse-mode gradient and central finite
// differences, over all coordinates of all inputs. Denominator
// max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<NodePtr(const std::vector<NodePtr>&)>& f,
                  const std::vector<Matrix>& inputs, double h = 1e-5);
double grad_check(const std::function<NodePtr(const NodePtr&)>& f, const Matrix& x,
                  double h = 1e-5);

}  // namespace ddar
