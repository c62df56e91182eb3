#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddar/matrix.hpp"
#include "ddar/rng.hpp"

namespace ddar {

struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-8
};

// Features plus integer labels; label -1 marks unlabeled OOD points.
struct Dataset {
    Matrix X;
    std::vector<int> y;
    std::string name;
    std::optional<NormStats> norm_stats;

    std::size_t size() const { return X.rows(); }
    std::size_t dim() const { return X.cols(); }
    int num_classes() const;
};

// Standard two-moons parametrization: outer arc (cos t, sin t), inner arc
// (1 - cos t, -sin t + 0.5), t uniform on [0, pi], plus isotropic Gaussian
// noise. Labels 0 (outer) and 1 (inner).
Dataset gen_two_moons(std::size_t n_per_class, double noise_std, std::uint64_t seed);

// n points at equally spaced angles on the circle of the given radius around
// the two-moons centroid (0.5, 0.25), plus isotropic Gaussian jitter.
// All labels -1.
Dataset gen_ood_ring(std::size_t n, double radius, double jitter, std::uint64_t seed);

// Gaussian clusters, one label per center. centers is k x d.
Dataset gen_blobs(const Matrix& centers, std::size_t n_per_center, double stddev,
                  std::uint64_t seed);

// CSV with header x1,...,xd[,label]; values written with 17 significant
// digits so float64 round-trips exactly.
Dataset load_csv(const std::string& path, bool has_labels);
void save_csv(const Dataset& dataset, const std::string& path);

NormStats normalize_fit(const Dataset& dataset);
Dataset normalize_apply(const Dataset& dataset, const NormStats& stats);

// Seeded stratified split; per-class test counts are round(fraction * n_c).
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                  std::uint64_t seed);

}  // namespace ddar
