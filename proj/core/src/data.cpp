#include "ddar/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ddar/io.hpp"

namespace ddar {

int Dataset::num_classes() const {
    int mx = -1;
    for (int label : y) mx = std::max(mx, label);
    return mx + 1;
}

Dataset gen_two_moons(std::size_t n_per_class, double noise_std, std::uint64_t seed) {
    if (n_per_class < 1) throw std::invalid_argument("gen_two_moons: n_per_class must be >= 1");
    if (noise_std < 0.0) throw std::invalid_argument("gen_two_moons: negative noise");
    Rng rng(seed);
    Dataset d;
    d.name = "two-moons";
    d.X = Matrix(2 * n_per_class, 2);
    d.y.resize(2 * n_per_class);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        const double t = rng.next_uniform(0.0, std::numbers::pi);
        d.X(i, 0) = std::cos(t);
        d.X(i, 1) = std::sin(t);
        d.y[i] = 0;
    }
    for (std::size_t i = 0; i < n_per_class; ++i) {
        const double t = rng.next_uniform(0.0, std::numbers::pi);
        d.X(n_per_class + i, 0) = 1.0 - std::cos(t);
        d.X(n_per_class + i, 1) = 0.5 - std::sin(t);
        d.y[n_per_class + i] = 1;
    }
    if (noise_std > 0.0)
        for (std::size_t i = 0; i < d.X.size(); ++i) d.X[i] += noise_std * rng.next_gaussian();
    return d;
}

Dataset gen_ood_ring(std::size_t n, double radius, double jitter, std::uint64_t seed) {
    if (radius <= 0.0) throw std::invalid_argument("gen_ood_ring: radius must be positive");
    constexpr double cx = 0.5, cy = 0.25;  // two-moons centroid
    Rng rng(seed);
    Dataset d;
    d.name = "ood-ring";
    d.X = Matrix(n, 2);
    d.y.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        d.X(i, 0) = cx + radius * std::cos(theta);
        d.X(i, 1) = cy + radius * std::sin(theta);
    }
    if (jitter > 0.0)
        for (std::size_t i = 0; i < d.X.size(); ++i) d.X[i] += jitter * rng.next_gaussian();
    return d;
}

Dataset gen_blobs(const Matrix& centers, std::size_t n_per_center, double stddev,
                  std::uint64_t seed) {
    if (centers.rows() < 1) throw std::invalid_argument("gen_blobs: need at least one center");
    Rng rng(seed);
    Dataset d;
    d.name = "blobs";
    const std::size_t k = centers.rows(), dim = centers.cols();
    d.X = Matrix(k * n_per_center, dim);
    d.y.resize(k * n_per_center);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n_per_center; ++i) {
            const std::size_t r = c * n_per_center + i;
            for (std::size_t j = 0; j < dim; ++j)
                d.X(r, j) = centers(c, j) + stddev * rng.next_gaussian();
            d.y[r] = static_cast<int>(c);
        }
    }
    return d;
}

Dataset load_csv(const std::string& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);

    std::vector<std::string> header;
    std::stringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) header.push_back(field);
    bool file_has_label = !header.empty() && header.back() == "label";
    if (has_labels && !file_has_label)
        throw std::runtime_error("load_csv: " + path + " has no 'label' column");
    const std::size_t dim = header.size() - (file_has_label ? 1 : 0);
    if (dim == 0) throw std::runtime_error("load_csv: no feature columns in " + path);

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t n = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::size_t col = 0;
        while (std::getline(ls, field, ',')) {
            try {
                if (col < dim) {
                    values.push_back(std::stod(field));
                } else if (file_has_label) {
                    labels.push_back(std::stoi(field));
                }
            } catch (const std::exception&) {
                throw std::runtime_error("load_csv: " + path + " line " +
                                         std::to_string(lineno) + ": bad value '" + field + "'");
            }
            ++col;
        }
        if (col != header.size())
            throw std::runtime_error("load_csv: " + path + " line " + std::to_string(lineno) +
                                     ": expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(col));
        ++n;
    }
    Dataset d;
    d.X = Matrix(n, dim, std::move(values));
    d.y = file_has_label ? std::move(labels) : std::vector<int>(n, -1);
    d.name = path;
    return d;
}

void save_csv(const Dataset& dataset, const std::string& path) {
    std::ostringstream out;
    for (std::size_t j = 0; j < dataset.dim(); ++j) out << (j ? ",x" : "x") << (j + 1);
    const bool labeled = !dataset.y.empty();
    if (labeled) out << ",label";
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t j = 0; j < dataset.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", dataset.X(i, j));
            if (j) out << ',';
            out << buf;
        }
        if (labeled) out << ',' << dataset.y[i];
        out << "\n";
    }
    write_file_atomic(path, out.str());
}

NormStats normalize_fit(const Dataset& dataset) {
    const std::size_t n = dataset.size(), dim = dataset.dim();
    if (n < 2) throw std::invalid_argument("normalize_fit: need at least 2 rows");
    NormStats s;
    s.mean.assign(dim, 0.0);
    s.stddev.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) s.mean[j] += dataset.X(i, j);
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            const double c = dataset.X(i, j) - s.mean[j];
            s.stddev[j] += c * c;
        }
    for (std::size_t j = 0; j < dim; ++j)
        s.stddev[j] = std::max(std::sqrt(s.stddev[j] / static_cast<double>(n)), 1e-8);
    return s;
}

Dataset normalize_apply(const Dataset& dataset, const NormStats& stats) {
    if (stats.mean.size() != dataset.dim())
        throw std::invalid_argument("normalize_apply: stats dimension mismatch");
    Dataset out = dataset;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < out.dim(); ++j)
            out.X(i, j) = (out.X(i, j) - stats.mean[j]) / stats.stddev[j];
    out.norm_stats = stats;
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                  std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("split: test_fraction must be in (0,1)");
    std::set<int> classes(dataset.y.begin(), dataset.y.end());
    std::vector<std::size_t> train_idx, test_idx;
    Rng rng(seed);
    for (int c : classes) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.size(); ++i)
            if (dataset.y[i] == c) members.push_back(i);
        if (members.size() < 2)
            throw std::invalid_argument("split: class " + std::to_string(c) +
                                        " has fewer than 2 samples");
        const auto perm = rng.permutation(members.size());
        const std::size_t n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_test ? test_idx : train_idx).push_back(members[perm[i]]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    auto take = [&](const std::vector<std::size_t>& idx, const char* suffix) {
        Dataset d;
        d.name = dataset.name + suffix;
        d.X = Matrix(idx.size(), dataset.dim());
        d.y.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < dataset.dim(); ++j) d.X(i, j) = dataset.X(idx[i], j);
            d.y[i] = dataset.y[idx[i]];
        }
        d.norm_stats = dataset.norm_stats;
        return d;
    };
    return {take(train_idx, "/train"), take(test_idx, "/test")};
}

}  // namespace ddar
