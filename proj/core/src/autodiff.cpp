#include "ddar/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ddar {

namespace {

NodePtr make_node(Matrix value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->grad = Matrix(value.rows(), value.cols());
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
    return n;
}

constexpr double kBceClamp = 1e-12;

double clamp_prob(double k) { return std::clamp(k, kBceClamp, 1.0 - kBceClamp); }

}  // namespace

NodePtr leaf(Matrix value) {
    return make_node(std::move(value), {}, nullptr);
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    Matrix v = matmul_nn(a->value, b->value);  // throws on inner-dim mismatch
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(std::move(v), {a, b}, [ap, bp](Node& self) {
        accumulate(ap->grad, matmul_nt(self.grad, bp->value));
        accumulate(bp->grad, matmul_tn(ap->value, self.grad));
    });
}

NodePtr elementwise(EwKind kind, const NodePtr& a) {
    const Matrix& x = a->value;
    Matrix v(x.rows(), x.cols());
    switch (kind) {
        case EwKind::Relu:
            for (std::size_t i = 0; i < x.size(); ++i) v[i] = x[i] > 0.0 ? x[i] : 0.0;
            break;
        case EwKind::Exp:
            for (std::size_t i = 0; i < x.size(); ++i) v[i] = std::exp(x[i]);
            break;
        case EwKind::Neg:
            for (std::size_t i = 0; i < x.size(); ++i) v[i] = -x[i];
            break;
        case EwKind::Log:
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i] <= 0.0)
                    throw std::domain_error("log: non-positive entry " + std::to_string(x[i]));
                v[i] = std::log(x[i]);
            }
            break;
        case EwKind::Square:
            for (std::size_t i = 0; i < x.size(); ++i) v[i] = x[i] * x[i];
            break;
    }
    Node* ap = a.get();
    return make_node(std::move(v), {a}, [ap, kind](Node& self) {
        Matrix& g = ap->grad;
        const Matrix& x = ap->value;
        const Matrix& y = self.value;
        const Matrix& up = self.grad;
        switch (kind) {
            case EwKind::Relu:
                // subgradient at exactly 0 is 0
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += x[i] > 0.0 ? up[i] : 0.0;
                break;
            case EwKind::Exp:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * y[i];
                break;
            case EwKind::Neg:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= up[i];
                break;
            case EwKind::Log:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] / x[i];
                break;
            case EwKind::Square:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * up[i] * x[i];
                break;
        }
    });
}

NodePtr cosine_rows(const NodePtr& z, const NodePtr& p) {
    const Matrix& zv = z->value;
    const Matrix& pv = p->value;
    if (zv.cols() != pv.cols()) {
        throw std::invalid_argument("cosine_rows: dimension mismatch " + zv.shape_str() + " vs " +
                                    pv.shape_str());
    }
    const std::size_t B = zv.rows(), m = pv.rows();
    std::vector<double> zn(B), pn(m);
    for (std::size_t b = 0; b < B; ++b) {
        zn[b] = row_norm(zv, b);
        if (zn[b] == 0.0)
            throw std::domain_error("cosine_rows: zero-norm input row " + std::to_string(b));
    }
    for (std::size_t i = 0; i < m; ++i) {
        pn[i] = row_norm(pv, i);
        if (pn[i] == 0.0)
            throw std::domain_error("cosine_rows: zero-norm prototype row " + std::to_string(i));
    }
    Matrix v(B, m);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < m; ++i)
            v(b, i) = row_dot(zv, b, pv, i) / (zn[b] * pn[i]);

    Node* zp = z.get();
    Node* pp = p.get();
    return make_node(std::move(v), {z, p}, [zp, pp, zn, pn](Node& self) {
        const Matrix& zv = zp->value;
        const Matrix& pv = pp->value;
        const Matrix& c = self.value;
        const Matrix& up = self.grad;
        const std::size_t B = zv.rows(), m = pv.rows(), d = zv.cols();
        // d c_bi / d z_b = p_i/(|z||p|) - c_bi z_b/|z|^2, and symmetrically for p_i.
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < m; ++i) {
                const double g = up(b, i);
                if (g == 0.0) continue;
                const double inv = 1.0 / (zn[b] * pn[i]);
                const double cz = c(b, i) / (zn[b] * zn[b]);
                const double cp = c(b, i) / (pn[i] * pn[i]);
                for (std::size_t j = 0; j < d; ++j) {
                    zp->grad(b, j) += g * (pv(i, j) * inv - cz * zv(b, j));
                    pp->grad(i, j) += g * (zv(b, j) * inv - cp * pv(i, j));
                }
            }
        }
    });
}

NodePtr softmax_row(const NodePtr& a) {
    const Matrix& x = a->value;
    Matrix v(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mx = x(r, 0);
        for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(r, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            v(r, j) = std::exp(x(r, j) - mx);
            denom += v(r, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) v(r, j) /= denom;
    }
    Node* ap = a.get();
    return make_node(std::move(v), {a}, [ap](Node& self) {
        const Matrix& s = self.value;
        const Matrix& up = self.grad;
        for (std::size_t r = 0; r < s.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < s.cols(); ++j) dot += up(r, j) * s(r, j);
            for (std::size_t j = 0; j < s.cols(); ++j)
                ap->grad(r, j) += s(r, j) * (up(r, j) - dot);
        }
    });
}

NodePtr reduce(ReduceKind kind, const NodePtr& a) {
    const Matrix& x = a->value;
    Node* ap = a.get();
    switch (kind) {
        case ReduceKind::Sum: {
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
            return make_node(Matrix{{acc}}, {a}, [ap](Node& self) {
                const double g = self.grad[0];
                for (std::size_t i = 0; i < ap->grad.size(); ++i) ap->grad[i] += g;
            });
        }
        case ReduceKind::Mean: {
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
            const double n = static_cast<double>(x.size());
            return make_node(Matrix{{acc / n}}, {a}, [ap, n](Node& self) {
                const double g = self.grad[0] / n;
                for (std::size_t i = 0; i < ap->grad.size(); ++i) ap->grad[i] += g;
            });
        }
        case ReduceKind::RowL2Norm: {
            Matrix v(x.rows(), 1);
            for (std::size_t r = 0; r < x.rows(); ++r) v(r, 0) = row_norm(x, r);
            return make_node(std::move(v), {a}, [ap](Node& self) {
                const Matrix& x = ap->value;
                for (std::size_t r = 0; r < x.rows(); ++r) {
                    const double nrm = self.value(r, 0);
                    if (nrm == 0.0) continue;
                    const double g = self.grad(r, 0) / nrm;
                    for (std::size_t j = 0; j < x.cols(); ++j) ap->grad(r, j) += g * x(r, j);
                }
            });
        }
    }
    throw std::logic_error("reduce: unknown kind");
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    Matrix v = ddar::add(a->value, b->value);
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(std::move(v), {a, b}, [ap, bp](Node& self) {
        accumulate(ap->grad, self.grad);
        accumulate(bp->grad, self.grad);
    });
}

NodePtr add_rowvec(const NodePtr& a, const NodePtr& v) {
    const Matrix& x = a->value;
    const Matrix& r = v->value;
    if (r.rows() != 1 || r.cols() != x.cols()) {
        throw std::invalid_argument("add_rowvec: expected 1x" + std::to_string(x.cols()) +
                                    ", got " + r.shape_str());
    }
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += r(0, j);
    Node* ap = a.get();
    Node* vp = v.get();
    return make_node(std::move(out), {a, v}, [ap, vp](Node& self) {
        accumulate(ap->grad, self.grad);
        for (std::size_t i = 0; i < self.grad.rows(); ++i)
            for (std::size_t j = 0; j < self.grad.cols(); ++j)
                vp->grad(0, j) += self.grad(i, j);
    });
}

NodePtr sub_rowvec(const NodePtr& a, const NodePtr& v) {
    return add_rowvec(a, neg(v));
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    Matrix v = hadamard(a->value, b->value);
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(std::move(v), {a, b}, [ap, bp](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ap->grad[i] += self.grad[i] * bp->value[i];
            bp->grad[i] += self.grad[i] * ap->value[i];
        }
    });
}

NodePtr scale(const NodePtr& a, double s) {
    Matrix v = ddar::scale(a->value, s);
    Node* ap = a.get();
    return make_node(std::move(v), {a}, [ap, s](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += s * self.grad[i];
    });
}

NodePtr row_sum(const NodePtr& a) {
    const Matrix& x = a->value;
    Matrix v(x.rows(), 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) acc += x(r, j);
        v(r, 0) = acc;
    }
    Node* ap = a.get();
    return make_node(std::move(v), {a}, [ap](Node& self) {
        for (std::size_t r = 0; r < ap->grad.rows(); ++r)
            for (std::size_t j = 0; j < ap->grad.cols(); ++j)
                ap->grad(r, j) += self.grad(r, 0);
    });
}

NodePtr concat_cols(const std::vector<NodePtr>& columns) {
    if (columns.empty()) throw std::invalid_argument("concat_cols: no columns");
    const std::size_t B = columns[0]->value.rows();
    Matrix v(B, columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const Matrix& col = columns[c]->value;
        if (col.rows() != B || col.cols() != 1)
            throw std::invalid_argument("concat_cols: column " + std::to_string(c) +
                                        " has shape " + col.shape_str());
        for (std::size_t b = 0; b < B; ++b) v(b, c) = col(b, 0);
    }
    std::vector<Node*> raw;
    raw.reserve(columns.size());
    for (const auto& c : columns) raw.push_back(c.get());
    return make_node(std::move(v), columns, [raw](Node& self) {
        for (std::size_t c = 0; c < raw.size(); ++c)
            for (std::size_t b = 0; b < self.grad.rows(); ++b)
                raw[c]->grad(b, 0) += self.grad(b, c);
    });
}

NodePtr transpose(const NodePtr& a) {
    Matrix v = ddar::transpose(a->value);
    Node* ap = a.get();
    return make_node(std::move(v), {a}, [ap](Node& self) {
        accumulate(ap->grad, ddar::transpose(self.grad));
    });
}

NodePtr rbf_bce(const NodePtr& kernels, const std::vector<int>& labels) {
    const Matrix& k = kernels->value;
    const std::size_t B = k.rows(), C = k.cols();
    if (labels.size() != B)
        throw std::invalid_argument("rbf_bce: batch " + std::to_string(B) + " vs " +
                                    std::to_string(labels.size()) + " labels");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw std::out_of_range("rbf_bce: label " + std::to_string(y) + " outside [0," +
                                    std::to_string(C) + ")");
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const double kc = clamp_prob(k(b, c));
            const bool pos = static_cast<std::size_t>(labels[b]) == c;
            loss -= pos ? std::log(kc) : std::log(1.0 - kc);
        }
    }
    loss /= static_cast<double>(B);
    Node* kp = kernels.get();
    return make_node(Matrix{{loss}}, {kernels}, [kp, labels](Node& self) {
        const Matrix& k = kp->value;
        const double g = self.grad[0] / static_cast<double>(k.rows());
        for (std::size_t b = 0; b < k.rows(); ++b) {
            for (std::size_t c = 0; c < k.cols(); ++c) {
                const double kc = clamp_prob(k(b, c));
                const bool pos = static_cast<std::size_t>(labels[b]) == c;
                kp->grad(b, c) += g * (pos ? -1.0 / kc : 1.0 / (1.0 - kc));
            }
        }
    });
}

NodePtr cross_entropy_with_logits(const NodePtr& logits, const std::vector<int>& labels) {
    const Matrix& x = logits->value;
    const std::size_t B = x.rows(), C = x.cols();
    if (labels.size() != B)
        throw std::invalid_argument("cross_entropy: batch mismatch");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw std::out_of_range("cross_entropy: label out of range");
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double mx = x(b, 0);
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, x(b, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < C; ++j) denom += std::exp(x(b, j) - mx);
        loss += mx + std::log(denom) - x(b, static_cast<std::size_t>(labels[b]));
    }
    loss /= static_cast<double>(B);
    Node* lp = logits.get();
    return make_node(Matrix{{loss}}, {logits}, [lp, labels](Node& self) {
        const Matrix& x = lp->value;
        const double g = self.grad[0] / static_cast<double>(x.rows());
        for (std::size_t b = 0; b < x.rows(); ++b) {
            double mx = x(b, 0);
            for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(b, j));
            double denom = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) denom += std::exp(x(b, j) - mx);
            for (std::size_t j = 0; j < x.cols(); ++j) {
                const double s = std::exp(x(b, j) - mx) / denom;
                const double onehot = static_cast<std::size_t>(labels[b]) == j ? 1.0 : 0.0;
                lp->grad(b, j) += g * (s - onehot);
            }
        }
    });
}

void backward(const NodePtr& output) {
    if (output->value.rows() != 1 || output->value.cols() != 1)
        throw std::invalid_argument("backward: output must be scalar, got " +
                                    output->value.shape_str());
    // Iterative post-order DFS yields a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{output.get(), 0}};
    visited.insert(output.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    output->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

double grad_check(const std::function<NodePtr(const std::vector<NodePtr>&)>& f,
                  const std::vector<Matrix>& inputs, double h) {
    std::vector<NodePtr> leaves;
    leaves.reserve(inputs.size());
    for (const auto& x : inputs) leaves.push_back(leaf(x));
    NodePtr out = f(leaves);
    backward(out);

    auto eval = [&](const std::vector<Matrix>& xs) {
        std::vector<NodePtr> ls;
        ls.reserve(xs.size());
        for (const auto& x : xs) ls.push_back(leaf(x));
        return f(ls)->value[0];
    };

    double max_err = 0.0;
    std::vector<Matrix> probe = inputs;
    for (std::size_t m = 0; m < inputs.size(); ++m) {
        for (std::size_t i = 0; i < inputs[m].size(); ++i) {
            const double orig = probe[m][i];
            probe[m][i] = orig + h;
            const double fp = eval(probe);
            probe[m][i] = orig - h;
            const double fm = eval(probe);
            probe[m][i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic = leaves[m]->grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
        }
    }
    return max_err;
}

double grad_check(const std::function<NodePtr(const NodePtr&)>& f, const Matrix& x, double h) {
    return grad_check(
        [&f](const std::vector<NodePtr>& ls) { return f(ls[0]); }, {x}, h);
}

}  // namespace ddar
