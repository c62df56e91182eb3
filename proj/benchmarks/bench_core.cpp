#include <benchmark/benchmark.h>

#include "ddar/data.hpp"
#include "ddar/losses.hpp"
#include "ddar/model.hpp"
#include "ddar/training.hpp"

using namespace ddar;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.next_gaussian();
    return m;
}

void bm_matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Matrix a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
    for (auto _ : state) {
        Matrix c = matmul_nn(a, b);
        benchmark::DoNotOptimize(c);
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

void bm_forward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    ExtractorConfig ec;
    ec.input_dim = 2;
    ec.width = 64;
    ec.depth = 4;
    ec.embed_dim = 64;
    ec.dropout_rate = 0.0;
    DdarModel model = init_model(ec, 2, 64, 32, 0.3, 0.1, InitStrategy::Random, rng);
    Matrix X = random_matrix(batch, 2, rng);
    for (auto _ : state) {
        ForwardTrace t = forward(model, X);
        benchmark::DoNotOptimize(t.kernels);
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_forward)->Arg(64)->Arg(256)->Arg(1024);

void bm_loss_backward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    ExtractorConfig ec;
    ec.input_dim = 2;
    ec.width = 64;
    ec.depth = 4;
    ec.embed_dim = 64;
    ec.dropout_rate = 0.0;
    DdarModel model = init_model(ec, 2, 64, 32, 0.3, 0.1, InitStrategy::Random, rng);
    Matrix X = random_matrix(batch, 2, rng);
    std::vector<int> y(batch);
    for (std::size_t i = 0; i < batch; ++i) y[i] = static_cast<int>(i % 2);
    for (auto _ : state) {
        ModelGraph g = build_forward(model, X);
        TotalLoss loss = total_loss(g, y, 0.1);
        backward(loss.node);
        benchmark::DoNotOptimize(loss.breakdown.total);
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_loss_backward)->Arg(64)->Arg(256);

void bm_train_steps(benchmark::State& state) {
    Dataset data = gen_two_moons(500, 0.1, 7);
    ExtractorConfig ec;
    ec.input_dim = 2;
    ec.width = 32;
    ec.depth = 0;
    ec.embed_dim = 32;
    ec.dropout_rate = 0.01;
    TrainConfig tc;
    tc.max_steps = static_cast<std::size_t>(state.range(0));
    tc.centroid_dim = 4;
    tc.seed = 7;
    for (auto _ : state) {
        auto [model, st] = train(data, ec, tc);
        benchmark::DoNotOptimize(model.prototypes);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_train_steps)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
