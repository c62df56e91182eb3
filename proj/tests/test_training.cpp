#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ddar/checkpoint.hpp"
#include "ddar/data.hpp"
#include "ddar/io.hpp"
#include "ddar/training.hpp"
#include "doctest.h"

using namespace ddar;

TEST_CASE("adam_step basics") {
    Matrix p{{1.0, -2.0}};
    std::vector<Matrix*> params{&p};
    AdamState state;
    state.init(params);

    SUBCASE("zero gradient leaves parameters unchanged") {
        adam_step(params, {Matrix(1, 2)}, state, 0.1);
        CHECK(p == Matrix{{1.0, -2.0}});
    }

    SUBCASE("first step is approximately -lr * sign(g)") {
        adam_step(params, {Matrix{{0.5, -3.0}}}, state, 0.1);
        CHECK(p(0, 0) == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
        CHECK(p(0, 1) == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
    }

    SUBCASE("identical state and gradient give identical results") {
        Matrix q = p;
        std::vector<Matrix*> qparams{&q};
        AdamState state2;
        state2.init(qparams);
        Matrix g{{0.3, 0.7}};
        adam_step(params, {g}, state, 0.05);
        adam_step(qparams, {g}, state2, 0.05);
        CHECK(p == q);
    }
}

TEST_CASE("minibatch iterator") {
    Rng rng(7);
    MinibatchIterator it(10, 4, rng);
    std::vector<std::size_t> sizes;
    std::set<std::size_t> seen;
    for (int i = 0; i < 3; ++i) {
        auto b = it.next();
        sizes.push_back(b.size());
        seen.insert(b.begin(), b.end());
    }
    CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
    CHECK(seen.size() == 10);

    Rng r1(13), r2(13);
    MinibatchIterator a(10, 4, r1), b(10, 4, r2);
    CHECK(a.next() == b.next());

    // different epochs draw different permutations from one stream
    Rng r3(13);
    MinibatchIterator c(8, 8, r3);
    auto e1 = c.next();
    auto e2 = c.next();
    CHECK(e1 != e2);
}

namespace {

ExtractorConfig tiny_extractor() {
    ExtractorConfig c;
    c.input_dim = 2;
    c.width = 8;
    c.depth = 1;
    c.embed_dim = 8;
    c.dropout_rate = 0.0;
    return c;
}

TrainConfig tiny_train(std::size_t steps, std::uint64_t seed = 3) {
    TrainConfig t;
    t.max_steps = steps;
    t.batch_size = 16;
    t.num_prototypes = 4;
    t.centroid_dim = 8;
    t.seed = seed;
    return t;
}

}  // namespace

TEST_CASE("update_centroids_ema") {
    Rng rng(5);
    DdarModel m = init_model(tiny_extractor(), 2, 4, 8, 0.3, 0.1, InitStrategy::Random, rng);
    Matrix X = rng.gaussian_matrix(4, 2);
    ForwardTrace trace = forward(m, X);
    std::vector<int> labels{0, 0, 1, 1};

    SUBCASE("gamma 1 leaves centroids unchanged") {
        auto before = m.centroids;
        update_centroids_ema(m, trace, labels, 1.0);
        CHECK(m.centroids[0] == before[0]);
        CHECK(m.centroids[1] == before[1]);
    }

    SUBCASE("gamma 0 sets the batch class mean of W_c f~") {
        update_centroids_ema(m, trace, labels, 0.0);
        Matrix proj = matmul_nt(trace.f_tilde, m.rbf_weights[0]);  // B x n
        for (std::size_t j = 0; j < m.centroid_dim; ++j)
            CHECK(m.centroids[0](0, j) ==
                  doctest::Approx(0.5 * (proj(0, j) + proj(1, j))).epsilon(1e-12));
    }

    SUBCASE("gamma 0.5 from zero centroid gives half the class mean") {
        m.centroids[1].fill(0.0);
        update_centroids_ema(m, trace, labels, 0.5);
        Matrix proj = matmul_nt(trace.f_tilde, m.rbf_weights[1]);
        for (std::size_t j = 0; j < m.centroid_dim; ++j)
            CHECK(m.centroids[1](0, j) ==
                  doctest::Approx(0.25 * (proj(2, j) + proj(3, j))).epsilon(1e-12));
    }

    SUBCASE("classes absent from the batch are untouched") {
        auto before = m.centroids[1];
        update_centroids_ema(m, trace, {0, 0, 0, 0}, 0.5);
        CHECK(m.centroids[1] == before);
    }
}

TEST_CASE("train loop determinism and degenerate cases") {
    Dataset data = gen_two_moons(40, 0.1, 99);

    SUBCASE("zero steps returns the initialized model") {
        auto [model, state] = train(data, tiny_extractor(), tiny_train(0));
        Rng rng(3);
        DdarModel expected =
            init_model(tiny_extractor(), 2, 4, 8, 0.3, 0.1, InitStrategy::Random, rng);
        CHECK(model.prototypes == expected.prototypes);
        CHECK(state.loss_history.empty());
    }

    SUBCASE("fixed seed gives a bit-identical checkpoint") {
        auto [m1, s1] = train(data, tiny_extractor(), tiny_train(20));
        auto [m2, s2] = train(data, tiny_extractor(), tiny_train(20));
        save_checkpoint(m1, "det_a.bin");
        save_checkpoint(m2, "det_b.bin");
        CHECK(read_file("det_a.bin") == read_file("det_b.bin"));
        std::remove("det_a.bin");
        std::remove("det_b.bin");
        CHECK(s1.loss_history.back().total == s2.loss_history.back().total);
    }

    SUBCASE("training rejects bad datasets") {
        Dataset empty;
        empty.X = Matrix(0, 2);
        CHECK_THROWS_AS(train(empty, tiny_extractor(), tiny_train(1)), std::invalid_argument);

        Dataset one_class = data;
        for (auto& y : one_class.y) y = 0;
        CHECK_THROWS_AS(train(one_class, tiny_extractor(), tiny_train(1)),
                        std::invalid_argument);
    }

    SUBCASE("loss history export") {
        auto [model, state] = train(data, tiny_extractor(), tiny_train(5));
        save_loss_history_csv(state.loss_history, "hist.csv");
        const std::string text = read_file("hist.csv");
        CHECK(text.rfind("step,rbf,dissimilar,entropy,total\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 6);
        std::remove("hist.csv");
    }
}

TEST_CASE("short training run decreases loss and keeps parameters finite") {
    Dataset data = gen_two_moons(60, 0.1, 12);
    auto [model, state] = train(data, tiny_extractor(), tiny_train(150, 4));
    for (const auto& h : state.loss_history) CHECK(std::isfinite(h.total));
    for (Matrix* p : trainable_params(model)) CHECK(p->all_finite());

    double early = 0.0, late = 0.0;
    for (int i = 0; i < 20; ++i) {
        early += state.loss_history[static_cast<std::size_t>(i)].total;
        late += state.loss_history[state.loss_history.size() - 20 + static_cast<std::size_t>(i)].total;
    }
    CHECK(late < early);
}
