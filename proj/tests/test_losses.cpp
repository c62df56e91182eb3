#include <cmath>
#include <stdexcept>

#include "ddar/losses.hpp"
#include "ddar/model.hpp"
#include "ddar/training.hpp"
#include "doctest.h"

using namespace ddar;

TEST_CASE("rbf_bce_loss values") {
    const double eps = 1e-9;
    CHECK(rbf_bce_loss_value(Matrix{{1.0 - eps, eps}}, {0}) == doctest::Approx(0.0).epsilon(1e-7));

    CHECK(rbf_bce_loss_value(Matrix{{0.5, 0.5}}, {0}) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    // mean reduction: two identical rows match B=1
    CHECK(rbf_bce_loss_value(Matrix{{0.3, 0.6}, {0.3, 0.6}}, {0, 0}) ==
          doctest::Approx(rbf_bce_loss_value(Matrix{{0.3, 0.6}}, {0})).epsilon(1e-12));

    CHECK_THROWS_AS(rbf_bce_loss_value(Matrix{{0.5, 0.5}}, {2}), std::out_of_range);
    // nonnegative, even at saturation
    CHECK(rbf_bce_loss_value(Matrix{{1.0, 0.0}}, {0}) >= 0.0);
}

TEST_CASE("dissimilarity_loss values") {
    CHECK(dissimilarity_loss_value(Matrix{{1, 0}, {2, 0}}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dissimilarity_loss_value(Matrix{{1, 0}, {0, 1}}) == doctest::Approx(0.0).epsilon(1e-12));

    const double r = 1.0 / std::sqrt(2.0);
    CHECK(dissimilarity_loss_value(Matrix{{1, 0}, {0, 1}, {r, r}}) ==
          doctest::Approx((0.0 + r + r) / 3.0).epsilon(1e-9));

    CHECK_THROWS_AS(dissimilarity_loss_value(Matrix{{1, 0}}), std::invalid_argument);
}

TEST_CASE("dissimilarity_loss range") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const double v = dissimilarity_loss_value(rng.gaussian_matrix(6, 4));
        CHECK(v >= -1.0 - 1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("one gradient step on dissimilarity separates near-collinear prototypes") {
    Matrix protos{{1.0, 0.01}, {1.0, -0.01}};
    const double before = dissimilarity_loss_value(protos);
    auto p = leaf(protos);
    backward(dissimilarity_loss(p));
    Matrix stepped = protos;
    for (std::size_t i = 0; i < stepped.size(); ++i) stepped[i] -= 0.05 * p->grad[i];
    CHECK(dissimilarity_loss_value(stepped) < before);
}

TEST_CASE("entropy_reg_loss values") {
    // uniform row attains the minimum -log m
    CHECK(entropy_reg_loss_value(Matrix{{0.4, 0.4, 0.4, 0.4}}) ==
          doctest::Approx(-std::log(4.0)).epsilon(1e-12));

    // near one-hot approaches 0 from below
    const double nearly = entropy_reg_loss_value(Matrix{{40.0, 0.0, 0.0}});
    CHECK(nearly < 0.0);
    CHECK(nearly > -1e-10);

    const double expect = 0.75 * std::log(0.75) + 0.25 * std::log(0.25);
    CHECK(entropy_reg_loss_value(Matrix{{std::log(3.0), 0.0}}) ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("entropy_reg_loss range property") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        Matrix d_p = rng.gaussian_matrix(4, 5);
        const double v = entropy_reg_loss_value(d_p);
        CHECK(v <= 0.0 + 1e-12);
        CHECK(v >= -std::log(5.0) - 1e-12);
    }
}

namespace {

DdarModel tiny_model(std::uint64_t seed) {
    ExtractorConfig c;
    c.input_dim = 2;
    c.width = 8;
    c.depth = 1;
    c.embed_dim = 8;
    c.dropout_rate = 0.0;
    Rng rng(seed);
    return init_model(c, 2, 4, 8, 0.3, 0.1, InitStrategy::Random, rng);
}

}  // namespace

TEST_CASE("total_loss composition") {
    DdarModel m = tiny_model(21);
    Rng rng(22);
    Matrix X = rng.gaussian_matrix(6, 2);
    std::vector<int> y{0, 1, 0, 1, 1, 0};

    ModelGraph g0 = build_forward(m, X);
    TotalLoss l0 = total_loss(g0, y, 0.0);
    CHECK(l0.breakdown.total == l0.breakdown.rbf);

    ModelGraph g1 = build_forward(m, X);
    TotalLoss l1 = total_loss(g1, y, 0.1);
    CHECK(l1.breakdown.total ==
          doctest::Approx(l1.breakdown.rbf +
                          0.1 * (l1.breakdown.dissimilar + l1.breakdown.entropy))
              .epsilon(1e-12));
    CHECK(l1.breakdown.rbf >= 0.0);

    // disabled terms report zero and drop out of the total
    ModelGraph g2 = build_forward(m, X);
    LossTerms only_d;
    only_d.entropy = false;
    TotalLoss l2 = total_loss(g2, y, 0.1, only_d);
    CHECK(l2.breakdown.entropy == 0.0);
    CHECK(l2.breakdown.total ==
          doctest::Approx(l2.breakdown.rbf + 0.1 * l2.breakdown.dissimilar).epsilon(1e-12));

    CHECK_THROWS_AS(total_loss(g2, y, 1.5), std::invalid_argument);
}

TEST_CASE("total_loss gradient matches finite differences over all parameters") {
    DdarModel m = tiny_model(31);
    Rng rng(32);
    Matrix X = rng.gaussian_matrix(4, 2);
    std::vector<int> y{0, 1, 1, 0};

    std::vector<Matrix> inputs;
    for (Matrix* p : trainable_params(m)) inputs.push_back(*p);
    const double err = grad_check(
        [&](const std::vector<NodePtr>& leaves) {
            ModelGraph g = build_forward_with(m, leaves, X);
            return total_loss(g, y, 0.1).node;
        },
        inputs);
    CHECK(err < 1e-4);
}
