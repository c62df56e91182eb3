#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ddar/eval.hpp"
#include "ddar/rng.hpp"
#include "doctest.h"

using namespace ddar;

TEST_CASE("accuracy") {
    CHECK(accuracy({1, 0, 1}, {1, 0, 1}) == 1.0);
    CHECK(accuracy({1, 1, 1}, {0, 0, 0}) == 0.0);
    CHECK(accuracy({1, 0, 1, 1}, {1, 0, 1, 0}) == 0.75);
    CHECK_THROWS_AS(accuracy({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(accuracy({1}, {1, 0}), std::invalid_argument);
}

TEST_CASE("ece hand-counted fixtures") {
    CHECK(ece({1.0, 1.0, 1.0}, {true, true, true}) == 0.0);
    CHECK(ece({0.8}, {true}) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(ece({0.6, 0.6}, {true, false}) == doctest::Approx(0.1).epsilon(1e-12));

    // two bins with 15 equal-width bins: 0.2 -> bin 2, 0.9 -> bin 13
    // contribution (1/2)|0 - 0.2| + (1/2)|1 - 0.9| = 0.15
    CHECK(ece({0.2, 0.9}, {false, true}) == doctest::Approx(0.15).epsilon(1e-12));

    CHECK_THROWS_AS(ece({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(ece({1.5}, {true}), std::invalid_argument);
}

TEST_CASE("ece zero when every bin is calibrated") {
    // each (conf, correct-rate) pair lands in its own bin and matches exactly
    std::vector<double> conf;
    std::vector<bool> correct;
    for (int i = 0; i < 4; ++i) {
        conf.push_back(0.25);
        correct.push_back(i < 1);  // bin acc 0.25
    }
    for (int i = 0; i < 4; ++i) {
        conf.push_back(0.75);
        correct.push_back(i < 3);  // bin acc 0.75
    }
    CHECK(ece(conf, correct) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("auroc fixtures") {
    CHECK(auroc({0.1, 0.2}, {0.8, 0.9}) == 1.0);
    CHECK(auroc({0.5, 0.5}, {0.5, 0.5}) == 0.5);
    CHECK(auroc({0.5, 0.1}, {0.9, 0.4}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(auroc({}, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(auroc({0.5}, {}), std::invalid_argument);
}

TEST_CASE("auroc symmetry on 100 random tie-free score sets") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(8), b(11);
        // distinct values by construction: strictly increasing jittered sequence
        double v = 0.0;
        for (double& x : a) x = (v += 0.5 + rng.next_uniform());
        for (double& x : b) x = (v += 0.5 + rng.next_uniform());
        std::vector<std::size_t> perm = rng.permutation(a.size() + b.size());
        std::vector<double> pool(a.begin(), a.end());
        pool.insert(pool.end(), b.begin(), b.end());
        std::vector<double> sa, sb;
        for (std::size_t i = 0; i < pool.size(); ++i)
            (i < a.size() ? sa : sb).push_back(pool[perm[i]]);
        CHECK(auroc(sa, sb) + auroc(sb, sa) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("auroc invariant under strictly increasing transforms") {
    std::vector<double> id = {0.1, 0.4, 0.35, 0.9};
    std::vector<double> ood = {0.2, 0.85, 0.6};
    const double base = auroc(id, ood);
    auto apply = [](std::vector<double> v, auto f) {
        std::transform(v.begin(), v.end(), v.begin(), f);
        return v;
    };
    auto f = [](double x) { return std::exp(3.0 * x) - 7.0; };
    CHECK(auroc(apply(id, f), apply(ood, f)) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("uncertainty grid geometry") {
    auto scorer = [](const Matrix& pts) {
        std::vector<double> conf(pts.rows()), unc(pts.rows());
        for (std::size_t i = 0; i < pts.rows(); ++i) {
            conf[i] = pts(i, 0);
            unc[i] = pts(i, 1);
        }
        return std::make_pair(conf, unc);
    };

    GridResult g = uncertainty_grid(scorer, {-1.0, 1.0, 0.0, 2.0}, 2);
    REQUIRE(g.xs.size() == 4);
    // row-major, x fastest: corners in order
    CHECK(g.xs == std::vector<double>{-1.0, 1.0, -1.0, 1.0});
    CHECK(g.ys == std::vector<double>{0.0, 0.0, 2.0, 2.0});
    CHECK(g.confidence == g.xs);
    CHECK(g.uncertainty == g.ys);

    GridResult g3 = uncertainty_grid(scorer, {0.0, 1.0, 0.0, 1.0}, 3);
    REQUIRE(g3.xs.size() == 9);
    CHECK(g3.xs[1] == doctest::Approx(0.5));
    CHECK(g3.ys[3] == doctest::Approx(0.5));
    CHECK(g3.xs[8] == 1.0);
    CHECK(g3.ys[8] == 1.0);

    CHECK_THROWS_AS(uncertainty_grid(scorer, {0.0, 1.0, 0.0, 1.0}, 1),
                    std::invalid_argument);
}

TEST_CASE("lipschitz diagnostic") {
    Matrix x{{0, 0}, {1, 0}, {0, 2}, {3, 3}};
    std::vector<std::pair<std::size_t, std::size_t>> pairs = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};

    SUBCASE("identity map: all ratios 1") {
        LipschitzDiagnostic d = lipschitz_diagnostic(x, x, pairs);
        CHECK(d.min_ratio == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(d.max_ratio == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(d.skipped_pairs == 0);
    }
    SUBCASE("scaling by 2: all ratios 2") {
        Matrix y = scale(x, 2.0);
        LipschitzDiagnostic d = lipschitz_diagnostic(x, y, pairs);
        CHECK(d.min_ratio == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(d.max_ratio == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("constant map: all ratios 0") {
        Matrix y(4, 2);
        LipschitzDiagnostic d = lipschitz_diagnostic(x, y, pairs);
        CHECK(d.min_ratio == 0.0);
        CHECK(d.max_ratio == 0.0);
    }
    SUBCASE("coincident pair skipped and counted") {
        Matrix xx{{1, 1}, {1, 1}, {0, 2}};
        LipschitzDiagnostic d = lipschitz_diagnostic(xx, xx, {{0, 1}, {0, 2}});
        CHECK(d.skipped_pairs == 1);
        CHECK(d.max_ratio == doctest::Approx(1.0));
    }
}

TEST_CASE("pca2 axis-aligned fixture") {
    // centered points at +-2 e1 and +-e2: cov = diag(8/3, 2/3), direction e1
    Matrix axis{{2, 0}, {-2, 0}, {0, 1}, {0, -1}};
    Pca2Result r = pca2(axis);
    CHECK(r.eigenvalue1 == doctest::Approx(8.0 / 3.0).epsilon(1e-10));
    CHECK(r.eigenvalue2 == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
    // first component is +-e1: projections of (2,0) and (-2,0) are +-2
    CHECK(std::abs(r.projection(0, 0)) == doctest::Approx(2.0).epsilon(1e-10));
    // power iteration leaves a small angle error in the direction
    CHECK(std::abs(r.projection(2, 0)) < 1e-5);
}

TEST_CASE("pca2 on 2-D data is distance preserving") {
    Rng rng(7);
    Matrix pts = rng.gaussian_matrix(20, 2);
    // stretch so the spectrum is not degenerate
    for (std::size_t i = 0; i < pts.rows(); ++i) pts(i, 0) *= 3.0;
    Pca2Result r = pca2(pts);
    for (std::size_t i = 0; i < pts.rows(); ++i)
        for (std::size_t j = i + 1; j < pts.rows(); ++j) {
            const double dx0 = pts(i, 0) - pts(j, 0), dy0 = pts(i, 1) - pts(j, 1);
            const double dx1 = r.projection(i, 0) - r.projection(j, 0);
            const double dy1 = r.projection(i, 1) - r.projection(j, 1);
            CHECK(std::sqrt(dx1 * dx1 + dy1 * dy1) ==
                  doctest::Approx(std::sqrt(dx0 * dx0 + dy0 * dy0)).epsilon(1e-8));
        }
    // total variance preserved when k == 2
    double total = 0.0;
    double mean0 = 0.0, mean1 = 0.0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        mean0 += pts(i, 0);
        mean1 += pts(i, 1);
    }
    mean0 /= 20.0;
    mean1 /= 20.0;
    for (std::size_t i = 0; i < pts.rows(); ++i)
        total += (pts(i, 0) - mean0) * (pts(i, 0) - mean0) +
                 (pts(i, 1) - mean1) * (pts(i, 1) - mean1);
    total /= 19.0;
    CHECK(r.eigenvalue1 + r.eigenvalue2 == doctest::Approx(total).epsilon(1e-8));
}

TEST_CASE("pca2 duplicates and errors") {
    Matrix base{{1, 2, 3}, {4, 5, 6}, {-1, 0, 2}, {0, 0, 0}};
    Matrix dup(8, 3);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            dup(i, j) = base(i, j);
            dup(i + 4, j) = base(i, j);
        }
    Pca2Result r = pca2(dup);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(r.projection(i, 0) == doctest::Approx(r.projection(i + 4, 0)).epsilon(1e-10));
        CHECK(r.projection(i, 1) == doctest::Approx(r.projection(i + 4, 1)).epsilon(1e-10));
    }
    CHECK_THROWS_AS(pca2(Matrix{{1, 2}, {3, 4}}), std::invalid_argument);
    CHECK_THROWS_AS(pca2(Matrix{{1, 1}, {1, 1}, {1, 1}}), std::invalid_argument);
}

TEST_CASE("collapse score") {
    Matrix id{{0, 0}, {1, 0}};
    CHECK(collapse_score(id, id) == 0.0);
    CHECK(collapse_score(id, Matrix{{0, 3}}) == doctest::Approx(3.0).epsilon(1e-12));

    Matrix far{{100, 100}, {101, 100}};
    CHECK(collapse_score(id, far) > 10.0);

    // translation + rotation invariance
    Matrix ood{{0, 3}, {2, 2}};
    const double base = collapse_score(id, ood);
    auto rot = [](const Matrix& m, double c, double s, double tx, double ty) {
        Matrix out(m.rows(), 2);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            out(i, 0) = c * m(i, 0) - s * m(i, 1) + tx;
            out(i, 1) = s * m(i, 0) + c * m(i, 1) + ty;
        }
        return out;
    };
    const double c = std::cos(0.7), s = std::sin(0.7);
    CHECK(collapse_score(rot(id, c, s, 5, -3), rot(ood, c, s, 5, -3)) ==
          doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("grid and report serialization") {
    auto scorer = [](const Matrix& pts) {
        std::vector<double> conf(pts.rows(), 0.5), unc(pts.rows(), 0.25);
        return std::make_pair(conf, unc);
    };
    GridResult g = uncertainty_grid(scorer, {0.0, 1.0, 0.0, 1.0}, 2);
    save_grid_csv(g, "grid.csv");
    std::ifstream in("grid.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,confidence,uncertainty");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 4);
    std::remove("grid.csv");

    EvalReport rep;
    rep.accuracy = 0.9;
    rep.ece = 0.05;
    rep.n_id = 10;
    rep.per_point.push_back({0.8, 0.2, 1, 1});
    save_report_json(rep, "rep.json");
    std::ifstream jin("rep.json");
    std::string all((std::istreambuf_iterator<char>(jin)), std::istreambuf_iterator<char>());
    CHECK(all.find("\"accuracy\"") != std::string::npos);
    CHECK(all.find("auroc") == std::string::npos);  // absent without OOD
    std::remove("rep.json");

    save_per_point_csv(rep, "pp.csv");
    std::ifstream pin("pp.csv");
    std::getline(pin, header);
    CHECK(header == "confidence,uncertainty,label,prediction");
    std::remove("pp.csv");
}
