#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ddar/matrix.hpp"

namespace ddar {

struct EvalReport {
    double accuracy = 0.0;
    double ece = 0.0;
    std::optional<double> auroc;  // absent when no OOD data supplied
    double mean_uncertainty_id = 0.0;
    std::optional<double> mean_uncertainty_ood;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    // (confidence, uncertainty, label, prediction) per ID point
    struct PerPoint {
        double confidence;
        double uncertainty;
        int label;
        int prediction;
    };
    std::vector<PerPoint> per_point;
};

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// Expected calibration error over equal-width right-inclusive bins
// (default 15); empty bins contribute nothing.
double ece(const std::vector<double>& confidences, const std::vector<bool>& correct,
           std::size_t num_bins = 15);

// Mann-Whitney U statistic: probability a random OOD point scores higher
// uncertainty than a random ID point, ties counted half.
double auroc(const std::vector<double>& uncertainty_id,
             const std::vector<double>& uncertainty_ood);

struct GridResult {
    double xmin, xmax, ymin, ymax;
    std::size_t resolution;
    std::vector<double> xs, ys;           // row-major grid coordinates
    std::vector<double> confidence;
    std::vector<double> uncertainty;
};

// Evaluates the scorer over a regular resolution x resolution grid including
// the boundary, row-major with x varying fastest.
GridResult uncertainty_grid(
    const std::function<std::pair<std::vector<double>, std::vector<double>>(const Matrix&)>&
        scorer,
    std::array<double, 4> bounds, std::size_t resolution);

struct LipschitzDiagnostic {
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    std::array<std::size_t, 20> histogram{};
    std::size_t skipped_pairs = 0;  // coincident inputs
};

// Ratios ||g(x1)-g(x2)|| / ||x1-x2|| over the given index pairs into
// (inputs, embeddings). Purely diagnostic.
LipschitzDiagnostic lipschitz_diagnostic(
    const Matrix& inputs, const Matrix& embeddings,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

struct Pca2Result {
    Matrix projection;  // n x 2
    double eigenvalue1 = 0.0;
    double eigenvalue2 = 0.0;
};

// Top-2 principal components of the sample covariance by power iteration
// with deflation (tolerance 1e-10, max 1000 iterations, deterministic start).
Pca2Result pca2(const Matrix& points);

// (median over OOD of nearest-ID distance) / (median ID-ID pairwise distance
// over a seeded subsample of at most 10^4 pairs). Higher = less collapse.
double collapse_score(const Matrix& embed_id, const Matrix& embed_ood,
                      std::uint64_t seed = 0);

void save_grid_csv(const GridResult& grid, const std::string& path);
void save_report_json(const EvalReport& report, const std::string& path);
void save_per_point_csv(const EvalReport& report, const std::string& path);

}  // namespace ddar
