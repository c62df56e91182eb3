#include "ddar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ddar/io.hpp"
#include "ddar/rng.hpp"

namespace ddar {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: empty or mismatched input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double ece(const std::vector<double>& confidences, const std::vector<bool>& correct,
           std::size_t num_bins) {
    if (confidences.empty() || confidences.size() != correct.size())
        throw std::invalid_argument("ece: empty or mismatched input");
    std::vector<double> conf_sum(num_bins, 0.0), acc_sum(num_bins, 0.0);
    std::vector<std::size_t> count(num_bins, 0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double c = confidences[i];
        if (c < 0.0 || c > 1.0)
            throw std::invalid_argument("ece: confidence outside [0,1]");
        // right-inclusive bins (b/n, (b+1)/n]; 0 falls into the first bin
        std::size_t b = c <= 0.0 ? 0
                                 : static_cast<std::size_t>(
                                       std::ceil(c * static_cast<double>(num_bins))) - 1;
        b = std::min(b, num_bins - 1);
        conf_sum[b] += c;
        acc_sum[b] += correct[i] ? 1.0 : 0.0;
        ++count[b];
    }
    double err = 0.0;
    const double n = static_cast<double>(confidences.size());
    for (std::size_t b = 0; b < num_bins; ++b) {
        if (count[b] == 0) continue;
        const double nb = static_cast<double>(count[b]);
        err += (nb / n) * std::abs(acc_sum[b] / nb - conf_sum[b] / nb);
    }
    return err;
}

double auroc(const std::vector<double>& uncertainty_id,
             const std::vector<double>& uncertainty_ood) {
    if (uncertainty_id.empty() || uncertainty_ood.empty())
        throw std::invalid_argument("auroc: both score sets must be nonempty");
    // Rank-based Mann-Whitney U; identical to exhaustive pair counting with
    // ties worth one half.
    struct Scored {
        double score;
        bool ood;
    };
    std::vector<Scored> all;
    all.reserve(uncertainty_id.size() + uncertainty_ood.size());
    for (double s : uncertainty_id) all.push_back({s, false});
    for (double s : uncertainty_ood) all.push_back({s, true});
    std::sort(all.begin(), all.end(),
              [](const Scored& a, const Scored& b) { return a.score < b.score; });
    double rank_sum_ood = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double mid_rank = static_cast<double>(i + j + 1) / 2.0;  // 1-based average rank
        for (std::size_t k = i; k < j; ++k)
            if (all[k].ood) rank_sum_ood += mid_rank;
        i = j;
    }
    const double n_ood = static_cast<double>(uncertainty_ood.size());
    const double n_id = static_cast<double>(uncertainty_id.size());
    const double u = rank_sum_ood - n_ood * (n_ood + 1.0) / 2.0;
    return u / (n_id * n_ood);
}

GridResult uncertainty_grid(
    const std::function<std::pair<std::vector<double>, std::vector<double>>(const Matrix&)>&
        scorer,
    std::array<double, 4> bounds, std::size_t resolution) {
    if (resolution < 2) throw std::invalid_argument("uncertainty_grid: resolution < 2");
    GridResult g;
    g.xmin = bounds[0];
    g.xmax = bounds[1];
    g.ymin = bounds[2];
    g.ymax = bounds[3];
    g.resolution = resolution;
    const std::size_t n = resolution * resolution;
    Matrix pts(n, 2);
    g.xs.resize(n);
    g.ys.resize(n);
    const double dx = (g.xmax - g.xmin) / static_cast<double>(resolution - 1);
    const double dy = (g.ymax - g.ymin) / static_cast<double>(resolution - 1);
    for (std::size_t r = 0; r < resolution; ++r) {
        for (std::size_t c = 0; c < resolution; ++c) {
            const std::size_t i = r * resolution + c;
            g.xs[i] = g.xmin + dx * static_cast<double>(c);
            g.ys[i] = g.ymin + dy * static_cast<double>(r);
            pts(i, 0) = g.xs[i];
            pts(i, 1) = g.ys[i];
        }
    }
    auto [conf, unc] = scorer(pts);
    if (conf.size() != n || unc.size() != n)
        throw std::runtime_error("uncertainty_grid: scorer returned wrong count");
    g.confidence = std::move(conf);
    g.uncertainty = std::move(unc);
    return g;
}

LipschitzDiagnostic lipschitz_diagnostic(
    const Matrix& inputs, const Matrix& embeddings,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    if (inputs.rows() != embeddings.rows())
        throw std::invalid_argument("lipschitz_diagnostic: row count mismatch");
    if (pairs.empty()) throw std::invalid_argument("lipschitz_diagnostic: no pairs");
    std::vector<double> ratios;
    LipschitzDiagnostic out;
    for (const auto& [a, b] : pairs) {
        double din = 0.0, demb = 0.0;
        for (std::size_t j = 0; j < inputs.cols(); ++j) {
            const double d = inputs(a, j) - inputs(b, j);
            din += d * d;
        }
        if (din == 0.0) {
            ++out.skipped_pairs;
            continue;
        }
        for (std::size_t j = 0; j < embeddings.cols(); ++j) {
            const double d = embeddings(a, j) - embeddings(b, j);
            demb += d * d;
        }
        ratios.push_back(std::sqrt(demb) / std::sqrt(din));
    }
    if (ratios.empty())
        throw std::invalid_argument("lipschitz_diagnostic: all pairs coincident");
    out.min_ratio = *std::min_element(ratios.begin(), ratios.end());
    out.max_ratio = *std::max_element(ratios.begin(), ratios.end());
    const double span = out.max_ratio - out.min_ratio;
    for (double r : ratios) {
        std::size_t b = span == 0.0
                            ? 0
                            : static_cast<std::size_t>((r - out.min_ratio) / span * 20.0);
        out.histogram[std::min<std::size_t>(b, 19)] += 1;
    }
    return out;
}

namespace {

// One power-iteration eigenpair of a symmetric matrix.
std::pair<double, std::vector<double>> power_iterate(const Matrix& a) {
    const std::size_t k = a.rows();
    std::vector<double> v(k);
    // deterministic, not axis-aligned start
    for (std::size_t i = 0; i < k; ++i) v[i] = 1.0 + static_cast<double>(i);
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;

    double eig = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<double> w(k, 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) w[i] += a(i, j) * v[j];
        double wn = 0.0;
        for (double x : w) wn += x * x;
        wn = std::sqrt(wn);
        if (wn == 0.0) return {0.0, v};  // v in the null space; eigenvalue 0
        for (double& x : w) x /= wn;
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) dot += w[i] * v[i];
        v = std::move(w);
        double new_eig = 0.0;
        {
            std::vector<double> av(k, 0.0);
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j) av[i] += a(i, j) * v[j];
            for (std::size_t i = 0; i < k; ++i) new_eig += v[i] * av[i];
        }
        if (std::abs(new_eig - eig) < 1e-10 && std::abs(std::abs(dot) - 1.0) < 1e-10) {
            eig = new_eig;
            break;
        }
        eig = new_eig;
    }
    return {eig, v};
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

Pca2Result pca2(const Matrix& points) {
    const std::size_t n = points.rows(), k = points.cols();
    if (n < 3) throw std::invalid_argument("pca2: need at least 3 points");
    Matrix centered = points;
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += points(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) centered(i, j) -= mean;
    }
    Matrix cov = matmul_tn(centered, centered);
    for (std::size_t i = 0; i < cov.size(); ++i) cov[i] /= static_cast<double>(n - 1);

    auto [eig1, v1] = power_iterate(cov);
    if (eig1 <= 0.0) throw std::invalid_argument("pca2: rank-0 data");
    // deflate and repeat
    Matrix deflated = cov;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) deflated(i, j) -= eig1 * v1[i] * v1[j];
    auto [eig2, v2] = power_iterate(deflated);
    // re-orthonormalize against v1 so the projection basis is exactly
    // orthonormal (power iteration leaves ~1e-6 angle error otherwise), then
    // recompute the eigenvalue as a Rayleigh quotient of the original cov
    {
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) dot += v1[i] * v2[i];
        for (std::size_t i = 0; i < k; ++i) v2[i] -= dot * v1[i];
        double nrm = 0.0;
        for (double x : v2) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm > 0.0) {
            for (double& x : v2) x /= nrm;
            eig2 = 0.0;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j) eig2 += v2[i] * cov(i, j) * v2[j];
        } else {
            std::fill(v2.begin(), v2.end(), 0.0);
            eig2 = 0.0;
        }
    }

    Pca2Result out;
    out.eigenvalue1 = eig1;
    out.eigenvalue2 = std::max(eig2, 0.0);
    out.projection = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        double p1 = 0.0, p2 = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p1 += centered(i, j) * v1[j];
            p2 += centered(i, j) * v2[j];
        }
        out.projection(i, 0) = p1;
        out.projection(i, 1) = p2;
    }
    return out;
}

double collapse_score(const Matrix& embed_id, const Matrix& embed_ood, std::uint64_t seed) {
    const std::size_t n = embed_id.rows(), m = embed_ood.rows();
    if (n == 0 || m == 0) throw std::invalid_argument("collapse_score: empty embedding set");
    if (embed_id.cols() != embed_ood.cols())
        throw std::invalid_argument("collapse_score: dimension mismatch");
    const std::size_t k = embed_id.cols();

    auto dist = [&](const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double d = a(i, c) - b(j, c);
            d2 += d * d;
        }
        return std::sqrt(d2);
    };

    std::vector<double> ood_min(m);
    for (std::size_t i = 0; i < m; ++i) {
        double best = dist(embed_ood, i, embed_id, 0);
        for (std::size_t j = 1; j < n; ++j) best = std::min(best, dist(embed_ood, i, embed_id, j));
        ood_min[i] = best;
    }

    constexpr std::size_t kMaxPairs = 10000;
    const std::size_t total_pairs = n * (n - 1) / 2;
    std::vector<double> id_dists;
    if (total_pairs <= kMaxPairs) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                id_dists.push_back(dist(embed_id, i, embed_id, j));
    } else {
        Rng rng(seed);
        id_dists.reserve(kMaxPairs);
        while (id_dists.size() < kMaxPairs) {
            const std::size_t i = static_cast<std::size_t>(rng.next_u64() % n);
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % n);
            if (i == j) continue;
            id_dists.push_back(dist(embed_id, i, embed_id, j));
        }
    }
    const double denom = median(std::move(id_dists));
    if (denom == 0.0) return median(std::move(ood_min)) == 0.0 ? 0.0 : INFINITY;
    return median(std::move(ood_min)) / denom;
}

void save_grid_csv(const GridResult& grid, const std::string& path) {
    std::ostringstream out;
    out << "x,y,confidence,uncertainty\n";
    char buf[128];
    for (std::size_t i = 0; i < grid.xs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", grid.xs[i], grid.ys[i],
                      grid.confidence[i], grid.uncertainty[i]);
        out << buf;
    }
    write_file_atomic(path, out.str());
}

void save_report_json(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["ece"] = report.ece;
    if (report.auroc) j["auroc"] = *report.auroc;
    j["mean_uncertainty_id"] = report.mean_uncertainty_id;
    if (report.mean_uncertainty_ood) j["mean_uncertainty_ood"] = *report.mean_uncertainty_ood;
    j["n_id"] = report.n_id;
    j["n_ood"] = report.n_ood;
    write_file_atomic(path, j.dump(2) + "\n");
}

void save_per_point_csv(const EvalReport& report, const std::string& path) {
    std::ostringstream out;
    out << "confidence,uncertainty,label,prediction\n";
    char buf[96];
    for (const auto& p : report.per_point) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%d\n", p.confidence, p.uncertainty,
                      p.label, p.prediction);
        out << buf;
    }
    write_file_atomic(path, out.str());
}

}  // namespace ddar
