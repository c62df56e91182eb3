// ddar command-line tool: dataset generation, training, evaluation, grid
// export, method comparison, and ablation sweeps.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
// failure (NaN/Inf during training).

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddar/baselines.hpp"
#include "ddar/checkpoint.hpp"
#include "ddar/data.hpp"
#include "ddar/eval.hpp"
#include "ddar/io.hpp"
#include "ddar/model.hpp"
#include "ddar/training.hpp"

namespace fs = std::filesystem;
using namespace ddar;

namespace {

// ---------------------------------------------------------------------------
// Run configuration: flat key=value file, precedence defaults < file < flags.

struct RunConfig {
    std::string method = "ddar";
    std::string data;
    std::string out = ".";
    // extractor
    std::size_t width = 128;
    std::size_t depth = 12;
    std::size_t embed_dim = 128;
    double dropout = 0.01;
    // optimization
    double lr = 0.01;
    std::size_t batch = 64;
    std::size_t max_steps = 2000;
    double lambda = 0.1;
    double sigma = 0.3;
    std::size_t prototypes = 64;
    std::size_t centroid_dim = 128;
    double ema_gamma = 0.999;
    std::uint64_t seed = 0;
    bool loss_dissimilar = true;
    bool loss_entropy = true;
    // baselines
    std::size_t ensemble_size = 5;
    std::size_t passes = 10;
};

std::string default_out_dir() {
    const char* env = std::getenv("DDAR_OUT_DIR");
    return env && *env ? env : ".";
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::istringstream in(read_file(path));
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + " line " + std::to_string(lineno) +
                                        ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

template <typename T>
void set_from_string(T& field, const std::string& value, const std::string& key) {
    std::istringstream s(value);
    T v{};
    if constexpr (std::is_same_v<T, bool>) {
        if (value == "1" || value == "true")
            v = true;
        else if (value == "0" || value == "false")
            v = false;
        else
            throw std::invalid_argument("config key '" + key + "': bad boolean '" + value + "'");
    } else {
        s >> v;
        if (s.fail() || !(s >> std::ws).eof())
            throw std::invalid_argument("config key '" + key + "': bad value '" + value + "'");
    }
    field = v;
}

// Applies file values for every key the user did not pass as a flag.
// `flag_of` maps config keys to CLI option names; app.count tells us whether
// the flag was given (flags always win over the file).
void apply_config_file(RunConfig& cfg, const std::string& path, const CLI::App& cmd) {
    const auto kv = parse_kv_file(path);
    const std::map<std::string, std::string> flag_of = {
        {"method", "--method"},       {"data", "--data"},
        {"out", "--out"},             {"width", "--width"},
        {"depth", "--depth"},         {"embed_dim", "--embed-dim"},
        {"dropout", "--dropout"},     {"lr", "--lr"},
        {"batch", "--batch"},         {"max_steps", "--max-steps"},
        {"lambda", "--lambda"},       {"sigma", "--sigma"},
        {"prototypes", "--prototypes"}, {"centroid_dim", "--centroid-dim"},
        {"ema_gamma", "--ema-gamma"}, {"seed", "--seed"},
        {"loss_dissimilar", "--loss-dissimilar"}, {"loss_entropy", "--loss-entropy"},
        {"ensemble_size", "--ensemble-size"},     {"passes", "--passes"},
    };
    for (const auto& [key, value] : kv) {
        const auto it = flag_of.find(key);
        if (it == flag_of.end())
            throw std::invalid_argument("config " + path + ": unknown key '" + key + "'");
        if (cmd.count(it->second) > 0) continue;  // flag overrides file
        if (key == "method") set_from_string(cfg.method, value, key);
        else if (key == "data") set_from_string(cfg.data, value, key);
        else if (key == "out") set_from_string(cfg.out, value, key);
        else if (key == "width") set_from_string(cfg.width, value, key);
        else if (key == "depth") set_from_string(cfg.depth, value, key);
        else if (key == "embed_dim") set_from_string(cfg.embed_dim, value, key);
        else if (key == "dropout") set_from_string(cfg.dropout, value, key);
        else if (key == "lr") set_from_string(cfg.lr, value, key);
        else if (key == "batch") set_from_string(cfg.batch, value, key);
        else if (key == "max_steps") set_from_string(cfg.max_steps, value, key);
        else if (key == "lambda") set_from_string(cfg.lambda, value, key);
        else if (key == "sigma") set_from_string(cfg.sigma, value, key);
        else if (key == "prototypes") set_from_string(cfg.prototypes, value, key);
        else if (key == "centroid_dim") set_from_string(cfg.centroid_dim, value, key);
        else if (key == "ema_gamma") set_from_string(cfg.ema_gamma, value, key);
        else if (key == "seed") set_from_string(cfg.seed, value, key);
        else if (key == "loss_dissimilar") set_from_string(cfg.loss_dissimilar, value, key);
        else if (key == "loss_entropy") set_from_string(cfg.loss_entropy, value, key);
        else if (key == "ensemble_size") set_from_string(cfg.ensemble_size, value, key);
        else if (key == "passes") set_from_string(cfg.passes, value, key);
    }
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string manifest_text(const RunConfig& c) {
    std::ostringstream out;
    out << "method = " << c.method << "\n"
        << "data = " << c.data << "\n"
        << "out = " << c.out << "\n"
        << "width = " << c.width << "\n"
        << "depth = " << c.depth << "\n"
        << "embed_dim = " << c.embed_dim << "\n"
        << "dropout = " << fmt_g(c.dropout) << "\n"
        << "lr = " << fmt_g(c.lr) << "\n"
        << "batch = " << c.batch << "\n"
        << "max_steps = " << c.max_steps << "\n"
        << "lambda = " << fmt_g(c.lambda) << "\n"
        << "sigma = " << fmt_g(c.sigma) << "\n"
        << "prototypes = " << c.prototypes << "\n"
        << "centroid_dim = " << c.centroid_dim << "\n"
        << "ema_gamma = " << fmt_g(c.ema_gamma) << "\n"
        << "seed = " << c.seed << "\n"
        << "loss_dissimilar = " << (c.loss_dissimilar ? 1 : 0) << "\n"
        << "loss_entropy = " << (c.loss_entropy ? 1 : 0) << "\n"
        << "ensemble_size = " << c.ensemble_size << "\n"
        << "passes = " << c.passes << "\n";
    return out.str();
}

ExtractorConfig extractor_config(const RunConfig& c, std::size_t input_dim) {
    ExtractorConfig e;
    e.input_dim = input_dim;
    e.width = c.width;
    e.depth = c.depth;
    e.embed_dim = c.embed_dim;
    e.dropout_rate = c.dropout;
    return e;
}

TrainConfig train_config(const RunConfig& c) {
    TrainConfig t;
    t.learning_rate = c.lr;
    t.batch_size = c.batch;
    t.max_steps = c.max_steps;
    t.lambda = c.lambda;
    t.sigma = c.sigma;
    t.num_prototypes = c.prototypes;
    t.centroid_dim = c.centroid_dim;
    t.ema_gamma = c.ema_gamma;
    t.seed = c.seed;
    t.loss_terms.dissimilar = c.loss_dissimilar;
    t.loss_terms.entropy = c.loss_entropy;
    return t;
}

// Registers the hyperparameter flags shared by train/compare/ablate.
void add_run_flags(CLI::App& cmd, RunConfig& c, std::string& config_path) {
    cmd.add_option("--config", config_path, "key=value config file (flags override it)");
    cmd.add_option("--method", c.method, "ddar | softmax | dropout | ensemble");
    cmd.add_option("--data", c.data, "training CSV (x1,...,xd,label)");
    cmd.add_option("--out", c.out, "output directory");
    cmd.add_option("--width", c.width, "extractor hidden width");
    cmd.add_option("--depth", c.depth, "residual block count");
    cmd.add_option("--embed-dim", c.embed_dim, "embedding dimension");
    cmd.add_option("--dropout", c.dropout, "dropout rate");
    cmd.add_option("--lr", c.lr, "Adam learning rate");
    cmd.add_option("--batch", c.batch, "minibatch size");
    cmd.add_option("--max-steps", c.max_steps, "training steps");
    cmd.add_option("--lambda", c.lambda, "regularizer weight");
    cmd.add_option("--sigma", c.sigma, "RBF length scale");
    cmd.add_option("--prototypes", c.prototypes, "prototype count");
    cmd.add_option("--centroid-dim", c.centroid_dim, "RBF centroid dimension");
    cmd.add_option("--ema-gamma", c.ema_gamma, "centroid EMA factor");
    cmd.add_option("--seed", c.seed, "RNG seed");
    cmd.add_option("--loss-dissimilar", c.loss_dissimilar, "enable dissimilarity term");
    cmd.add_option("--loss-entropy", c.loss_entropy, "enable entropy term");
    cmd.add_option("--ensemble-size", c.ensemble_size, "members for method=ensemble");
    cmd.add_option("--passes", c.passes, "MC-dropout forward passes");
}

Dataset load_labeled(const std::string& path) {
    if (path.empty()) throw std::invalid_argument("missing --data");
    return load_csv(path, true);
}

// ---------------------------------------------------------------------------
// Scoring: a uniform (labels, confidence, uncertainty) view over all methods.

struct Scores {
    std::vector<int> labels;
    std::vector<double> confidence;
    std::vector<double> uncertainty;
};

struct LoadedModel {
    std::string method;
    std::optional<DdarModel> ddar;
    std::vector<SoftmaxModel> softmax;  // 1 entry, or K for ensembles
    std::size_t passes = 10;
    std::uint64_t mc_seed = 0;
};

LoadedModel load_models(const std::vector<std::string>& paths, std::size_t passes) {
    if (paths.empty()) throw std::invalid_argument("missing --checkpoint");
    LoadedModel m;
    m.passes = passes;
    m.method = checkpoint_method(paths[0]);
    if (paths.size() > 1) {
        for (const std::string& p : paths) {
            if (checkpoint_method(p) == "ddar")
                throw std::runtime_error("checkpoint " + p + ": ensembles are softmax-based");
            m.softmax.push_back(load_softmax_checkpoint(p));
        }
        m.method = "ensemble";
    } else if (m.method == "ddar") {
        m.ddar = load_ddar_checkpoint(paths[0]);
    } else {
        m.softmax.push_back(load_softmax_checkpoint(paths[0]));
    }
    return m;
}

Scores score(const LoadedModel& m, const Matrix& X) {
    Scores s;
    if (m.method == "ddar") {
        Prediction p = predict(*m.ddar, X);
        s.labels = std::move(p.labels);
        s.confidence = std::move(p.confidence);
        s.uncertainty = std::move(p.uncertainty);
        return s;
    }
    SoftmaxPrediction p;
    if (m.method == "softmax") {
        p = softmax_uncertainty(m.softmax[0], X);
    } else if (m.method == "dropout") {
        p = mc_dropout_predict(m.softmax[0], X, m.passes, m.mc_seed);
    } else {
        DeepEnsemble e;
        e.members = m.softmax;
        p = ensemble_predict(e, X);
    }
    s.labels = std::move(p.labels);
    s.confidence = std::move(p.confidence);
    s.uncertainty = std::move(p.uncertainty);
    return s;
}

std::size_t model_input_dim(const LoadedModel& m) {
    return m.method == "ddar" ? m.ddar->config.input_dim : m.softmax[0].config.input_dim;
}

EvalReport evaluate(const LoadedModel& m, const Dataset& id_set, const Dataset* ood_set) {
    if (id_set.dim() != model_input_dim(m))
        throw std::runtime_error("eval: checkpoint expects input dim " +
                                 std::to_string(model_input_dim(m)) + ", data has " +
                                 std::to_string(id_set.dim()));
    Scores id = score(m, id_set.X);
    EvalReport rep;
    rep.accuracy = accuracy(id.labels, id_set.y);
    std::vector<bool> correct(id.labels.size());
    for (std::size_t i = 0; i < id.labels.size(); ++i) correct[i] = id.labels[i] == id_set.y[i];
    rep.ece = ece(id.confidence, correct);
    rep.n_id = id_set.size();
    for (std::size_t i = 0; i < id.labels.size(); ++i)
        rep.per_point.push_back({id.confidence[i], id.uncertainty[i], id_set.y[i], id.labels[i]});
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    rep.mean_uncertainty_id = mean(id.uncertainty);
    if (ood_set) {
        if (ood_set->dim() != id_set.dim())
            throw std::runtime_error("eval: OOD dimension mismatch");
        Scores ood = score(m, ood_set->X);
        rep.auroc = auroc(id.uncertainty, ood.uncertainty);
        rep.mean_uncertainty_ood = mean(ood.uncertainty);
        rep.n_ood = ood_set->size();
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Aggregate tables (compare / ablate).

struct Agg {
    double mean = 0.0, stddev = 0.0;
};

Agg aggregate(const std::vector<double>& xs) {
    Agg a;
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return a;
}

struct TableRow {
    std::string name;
    Agg accuracy, ece, auroc;
};

void write_table(const std::vector<TableRow>& rows, const std::string& label,
                 const std::string& csv_path, const std::string& text_path) {
    std::ostringstream csv;
    csv << label
        << ",accuracy_mean,accuracy_std,ece_mean,ece_std,auroc_mean,auroc_std\n";
    for (const TableRow& r : rows)
        csv << r.name << ',' << fmt_g(r.accuracy.mean) << ',' << fmt_g(r.accuracy.stddev) << ','
            << fmt_g(r.ece.mean) << ',' << fmt_g(r.ece.stddev) << ',' << fmt_g(r.auroc.mean)
            << ',' << fmt_g(r.auroc.stddev) << '\n';
    write_file_atomic(csv_path, csv.str());

    std::ostringstream txt;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %-17s %-17s %-17s\n", label.c_str(),
                  "accuracy", "ece", "auroc");
    txt << buf;
    for (const TableRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-16s %.4f \xc2\xb1 %.4f   %.4f \xc2\xb1 %.4f   %.4f \xc2\xb1 %.4f\n",
                      r.name.c_str(), r.accuracy.mean, r.accuracy.stddev, r.ece.mean,
                      r.ece.stddev, r.auroc.mean, r.auroc.stddev);
        txt << buf;
    }
    write_file_atomic(text_path, txt.str());
    std::cout << txt.str();
}

// Trains one method in-process and returns its eval report.
EvalReport train_and_eval(const RunConfig& cfg, const Dataset& train_set,
                          const Dataset& test_set, const Dataset* ood_set) {
    ExtractorConfig ec = extractor_config(cfg, train_set.dim());
    TrainConfig tc = train_config(cfg);
    LoadedModel m;
    m.method = cfg.method;
    m.passes = cfg.passes;
    if (cfg.method == "ddar") {
        m.ddar = train(train_set, ec, tc).first;
    } else if (cfg.method == "softmax" || cfg.method == "dropout") {
        m.softmax.push_back(train_softmax(train_set, ec, tc));
    } else if (cfg.method == "ensemble") {
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = 0; i < cfg.ensemble_size; ++i) seeds.push_back(cfg.seed + i);
        m.softmax = deep_ensemble(train_set, ec, tc, seeds).members;
    } else {
        throw std::invalid_argument("unknown method '" + cfg.method + "'");
    }
    return evaluate(m, test_set, ood_set);
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_data_gen(const std::string& dataset, std::size_t n, double noise, double radius,
                 std::uint64_t seed, const std::string& out) {
    Dataset d;
    if (dataset == "two-moons") {
        d = gen_two_moons(n, noise, seed);
    } else if (dataset == "ring") {
        d = gen_ood_ring(n, radius, noise, seed);
        d.y.clear();  // unlabeled OOD file
    } else if (dataset == "blobs") {
        Matrix centers{{0.0, 0.0}, {3.0, 3.0}};
        d = gen_blobs(centers, n, noise, seed);
    } else {
        throw std::invalid_argument("unknown dataset '" + dataset + "'");
    }
    save_csv(d, out);
    std::cout << "wrote " << d.size() << " rows to " << out << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    Dataset train_set = load_labeled(cfg.data);
    fs::create_directories(cfg.out);
    write_file_atomic((fs::path(cfg.out) / "run_manifest.txt").string(), manifest_text(cfg));

    ExtractorConfig ec = extractor_config(cfg, train_set.dim());
    TrainConfig tc = train_config(cfg);
    if (cfg.method == "ddar") {
        auto [model, state] = train(train_set, ec, tc);
        save_checkpoint(model, (fs::path(cfg.out) / "model.ckpt").string());
        save_loss_history_csv(state.loss_history,
                              (fs::path(cfg.out) / "loss_history.csv").string());
    } else if (cfg.method == "softmax" || cfg.method == "dropout") {
        if (cfg.method == "dropout" && cfg.dropout <= 0.0)
            throw std::invalid_argument("method=dropout requires --dropout > 0");
        SoftmaxModel model = train_softmax(train_set, ec, tc);
        save_checkpoint(model, (fs::path(cfg.out) / "model.ckpt").string(), cfg.method);
    } else if (cfg.method == "ensemble") {
        if (cfg.ensemble_size < 2)
            throw std::invalid_argument("method=ensemble requires --ensemble-size >= 2");
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = 0; i < cfg.ensemble_size; ++i) seeds.push_back(cfg.seed + i);
        DeepEnsemble e = deep_ensemble(train_set, ec, tc, seeds);
        for (std::size_t i = 0; i < e.members.size(); ++i)
            save_checkpoint(e.members[i],
                            (fs::path(cfg.out) / ("model." + std::to_string(i) + ".ckpt")).string());
    } else {
        throw std::invalid_argument("unknown method '" + cfg.method + "'");
    }
    std::cout << "trained " << cfg.method << " for " << cfg.max_steps << " steps -> " << cfg.out
              << "\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const std::string& data_path,
             const std::string& ood_path, std::size_t passes, const std::string& out) {
    LoadedModel m = load_models(checkpoints, passes);
    Dataset id_set = load_labeled(data_path);
    std::optional<Dataset> ood_set;
    if (!ood_path.empty()) ood_set = load_csv(ood_path, false);
    EvalReport rep = evaluate(m, id_set, ood_set ? &*ood_set : nullptr);
    fs::create_directories(out);
    save_report_json(rep, (fs::path(out) / "report.json").string());
    save_per_point_csv(rep, (fs::path(out) / "per_point.csv").string());
    std::cout << "accuracy " << rep.accuracy << "  ece " << rep.ece;
    if (rep.auroc) std::cout << "  auroc " << *rep.auroc;
    std::cout << "  mean_unc_id " << rep.mean_uncertainty_id;
    if (rep.mean_uncertainty_ood) std::cout << "  mean_unc_ood " << *rep.mean_uncertainty_ood;
    std::cout << "\n";
    return 0;
}

int cmd_grid(const std::vector<std::string>& checkpoints, std::array<double, 4> bounds,
             std::size_t resolution, std::size_t passes, const std::string& out) {
    LoadedModel m = load_models(checkpoints, passes);
    if (model_input_dim(m) != 2)
        throw std::runtime_error("grid: checkpoint is not a 2-D model");
    auto scorer = [&m](const Matrix& pts) {
        Scores s = score(m, pts);
        return std::make_pair(s.confidence, s.uncertainty);
    };
    GridResult g = uncertainty_grid(scorer, bounds, resolution);
    save_grid_csv(g, out);
    std::cout << "wrote " << g.xs.size() << " grid points to " << out << "\n";
    return 0;
}

int cmd_compare(RunConfig cfg, const std::vector<std::string>& methods,
                const std::vector<std::uint64_t>& seeds, const std::string& test_path,
                const std::string& ood_path) {
    for (const std::string& meth : methods)
        if (meth != "ddar" && meth != "softmax" && meth != "dropout" && meth != "ensemble")
            throw std::invalid_argument("unknown method '" + meth + "'");
    Dataset train_set = load_labeled(cfg.data);
    Dataset test_set = load_labeled(test_path);
    std::optional<Dataset> ood_set;
    if (!ood_path.empty()) ood_set = load_csv(ood_path, false);

    std::vector<TableRow> rows;
    for (const std::string& meth : methods) {
        std::vector<double> acc, ec, au;
        for (std::uint64_t s : seeds) {
            RunConfig c = cfg;
            c.method = meth;
            c.seed = s;
            EvalReport rep = train_and_eval(c, train_set, test_set, ood_set ? &*ood_set : nullptr);
            acc.push_back(rep.accuracy);
            ec.push_back(rep.ece);
            au.push_back(rep.auroc.value_or(0.0));
        }
        rows.push_back({meth, aggregate(acc), aggregate(ec), aggregate(au)});
    }
    fs::create_directories(cfg.out);
    write_file_atomic((fs::path(cfg.out) / "compare_manifest.txt").string(), manifest_text(cfg));
    write_table(rows, "method", (fs::path(cfg.out) / "compare.csv").string(),
                (fs::path(cfg.out) / "compare.txt").string());
    return 0;
}

int cmd_ablate(RunConfig cfg, std::vector<double> lambdas,
               const std::vector<std::string>& subsets, const std::vector<std::uint64_t>& seeds,
               const std::string& test_path, const std::string& ood_path) {
    if (lambdas.empty() && subsets.empty())
        throw std::invalid_argument("ablate: empty sweep (no lambdas, no loss subsets)");
    Dataset train_set = load_labeled(cfg.data);
    Dataset test_set = load_labeled(test_path);
    std::optional<Dataset> ood_set;
    if (!ood_path.empty()) ood_set = load_csv(ood_path, false);

    struct Cell {
        std::string name;
        double lambda;
        bool d, e;
    };
    auto short_g = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    std::vector<Cell> cells;
    for (double l : lambdas) cells.push_back({"lambda=" + short_g(l), l, true, true});
    for (const std::string& sub : subsets) {
        if (sub == "d")
            cells.push_back({"terms=d", cfg.lambda, true, false});
        else if (sub == "e")
            cells.push_back({"terms=e", cfg.lambda, false, true});
        else if (sub == "de")
            cells.push_back({"terms=de", cfg.lambda, true, true});
        else
            throw std::invalid_argument("ablate: unknown loss subset '" + sub +
                                        "' (expected d, e, or de)");
    }

    cfg.method = "ddar";
    std::vector<TableRow> rows;
    for (const Cell& cell : cells) {
        std::vector<double> acc, ec, au;
        for (std::uint64_t s : seeds) {
            RunConfig c = cfg;
            c.seed = s;
            c.lambda = cell.lambda;
            c.loss_dissimilar = cell.d;
            c.loss_entropy = cell.e;
            EvalReport rep = train_and_eval(c, train_set, test_set, ood_set ? &*ood_set : nullptr);
            acc.push_back(rep.accuracy);
            ec.push_back(rep.ece);
            au.push_back(rep.auroc.value_or(0.0));
        }
        rows.push_back({cell.name, aggregate(acc), aggregate(ec), aggregate(au)});
    }
    fs::create_directories(cfg.out);
    write_file_atomic((fs::path(cfg.out) / "ablate_manifest.txt").string(), manifest_text(cfg));
    write_table(rows, "config", (fs::path(cfg.out) / "ablate.csv").string(),
                (fs::path(cfg.out) / "ablate.txt").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ddar: prototype-based single-pass uncertainty estimation"};
    app.require_subcommand(1);

    // data gen
    CLI::App* data = app.add_subcommand("data", "dataset utilities");
    data->require_subcommand(1);
    CLI::App* gen = data->add_subcommand("gen", "generate a synthetic dataset CSV");
    std::string gen_dataset = "two-moons", gen_out = "data.csv";
    std::size_t gen_n = 500;
    double gen_noise = 0.1, gen_radius = 3.0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--dataset", gen_dataset, "two-moons | ring | blobs");
    gen->add_option("--n", gen_n, "points per class (or total, for ring)");
    gen->add_option("--noise", gen_noise, "noise / jitter stddev");
    gen->add_option("--radius", gen_radius, "ring radius");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "output CSV path");

    // train
    RunConfig train_cfg;
    train_cfg.out = default_out_dir();
    std::string train_config_path;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model, write checkpoint + manifest");
    add_run_flags(*train_cmd, train_cfg, train_config_path);

    // eval
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on labeled data");
    std::vector<std::string> eval_ckpts;
    std::string eval_data, eval_ood, eval_out = default_out_dir();
    std::size_t eval_passes = 10;
    eval_cmd->add_option("--checkpoint", eval_ckpts, "checkpoint path(s); several = ensemble")
        ->required()
        ->delimiter(',');
    eval_cmd->add_option("--data", eval_data, "ID test CSV")->required();
    eval_cmd->add_option("--ood", eval_ood, "optional OOD CSV (unlabeled)");
    eval_cmd->add_option("--passes", eval_passes, "MC-dropout passes");
    eval_cmd->add_option("--out", eval_out, "output directory");

    // grid
    CLI::App* grid_cmd = app.add_subcommand("grid", "export an uncertainty surface CSV");
    std::vector<std::string> grid_ckpts;
    std::string grid_out = "grid.csv";
    std::size_t grid_res = 100, grid_passes = 10;
    double xmin = -2.5, xmax = 3.5, ymin = -2.0, ymax = 3.0;
    grid_cmd->add_option("--checkpoint", grid_ckpts, "checkpoint path(s)")
        ->required()
        ->delimiter(',');
    grid_cmd->add_option("--xmin", xmin);
    grid_cmd->add_option("--xmax", xmax);
    grid_cmd->add_option("--ymin", ymin);
    grid_cmd->add_option("--ymax", ymax);
    grid_cmd->add_option("--resolution", grid_res, "grid points per side");
    grid_cmd->add_option("--passes", grid_passes, "MC-dropout passes");
    grid_cmd->add_option("--out", grid_out, "output CSV path");

    // compare
    RunConfig cmp_cfg;
    cmp_cfg.out = default_out_dir();
    std::string cmp_config_path, cmp_test, cmp_ood;
    std::vector<std::string> cmp_methods = {"softmax", "ddar"};
    std::vector<std::uint64_t> cmp_seeds = {0};
    CLI::App* cmp_cmd = app.add_subcommand("compare", "train + evaluate several methods over seeds");
    add_run_flags(*cmp_cmd, cmp_cfg, cmp_config_path);
    cmp_cmd->add_option("--methods", cmp_methods, "comma list of methods")->delimiter(',');
    cmp_cmd->add_option("--seeds", cmp_seeds, "comma list of seeds")->delimiter(',');
    cmp_cmd->add_option("--test", cmp_test, "ID test CSV")->required();
    cmp_cmd->add_option("--ood", cmp_ood, "optional OOD CSV");

    // ablate
    RunConfig abl_cfg;
    abl_cfg.out = default_out_dir();
    std::string abl_config_path, abl_test, abl_ood;
    std::vector<double> abl_lambdas = {0.01, 0.05, 0.1, 0.5, 1.0};
    std::vector<std::string> abl_subsets;
    std::vector<std::uint64_t> abl_seeds = {0, 1, 2};
    CLI::App* abl_cmd = app.add_subcommand("ablate", "sweep lambda and/or loss-term subsets");
    add_run_flags(*abl_cmd, abl_cfg, abl_config_path);
    abl_cmd->add_option("--lambdas", abl_lambdas, "comma list of lambda values")->delimiter(',');
    abl_cmd->add_option("--loss-subsets", abl_subsets, "comma list from {d, e, de}")
        ->delimiter(',');
    abl_cmd->add_option("--seeds", abl_seeds, "comma list of seeds")->delimiter(',');
    abl_cmd->add_option("--test", abl_test, "ID test CSV")->required();
    abl_cmd->add_option("--ood", abl_ood, "optional OOD CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // help/version exit 0, any parse error is usage
    }

    try {
        if (gen->parsed()) return cmd_data_gen(gen_dataset, gen_n, gen_noise, gen_radius,
                                               gen_seed, gen_out);
        if (train_cmd->parsed()) {
            if (!train_config_path.empty())
                apply_config_file(train_cfg, train_config_path, *train_cmd);
            return cmd_train(train_cfg);
        }
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpts, eval_data, eval_ood, eval_passes, eval_out);
        if (grid_cmd->parsed())
            return cmd_grid(grid_ckpts, {xmin, xmax, ymin, ymax}, grid_res, grid_passes,
                            grid_out);
        if (cmp_cmd->parsed()) {
            if (!cmp_config_path.empty()) apply_config_file(cmp_cfg, cmp_config_path, *cmp_cmd);
            return cmd_compare(cmp_cfg, cmp_methods, cmp_seeds, cmp_test, cmp_ood);
        }
        if (abl_cmd->parsed()) {
            if (!abl_config_path.empty()) apply_config_file(abl_cfg, abl_config_path, *abl_cmd);
            return cmd_ablate(abl_cfg, abl_lambdas, abl_subsets, abl_seeds, abl_test, abl_ood);
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
