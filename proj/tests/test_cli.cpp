// End-to-end tests of the ddar binary; DDAR_CLI_PATH is injected by CMake.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string cli() { return DDAR_CLI_PATH; }

int run(const std::string& args) {
    const int status = std::system((cli() + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++n;
    return n;
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("ddar_cli_test_" + std::to_string(rand()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string s(const std::string& name) const { return (path / name).string(); }
};

// small-but-trainable settings shared by the slower cases
const std::string kSmall =
    " --width 16 --depth 2 --embed-dim 16 --prototypes 8 --centroid-dim 16"
    " --batch 32 --max-steps 150";

}  // namespace

TEST_CASE("data gen writes the expected rows and is deterministic") {
    TempDir t;
    CHECK(run("data gen --dataset two-moons --n 500 --noise 0.1 --seed 7 --out " +
              t.s("a.csv")) == 0);
    CHECK(count_lines(t.s("a.csv")) == 1001);  // header + 500 per class
    CHECK(run("data gen --dataset two-moons --n 500 --noise 0.1 --seed 7 --out " +
              t.s("b.csv")) == 0);
    CHECK(slurp(t.s("a.csv")) == slurp(t.s("b.csv")));

    CHECK(run("data gen --dataset ring --n 64 --radius 3 --noise 0.05 --seed 1 --out " +
              t.s("r.csv")) == 0);
    CHECK(count_lines(t.s("r.csv")) == 65);
}

TEST_CASE("data gen usage errors exit 1") {
    TempDir t;
    CHECK(run("data gen --dataset nosuch --out " + t.s("x.csv")) == 1);
    CHECK(run("data gen --dataset two-moons --noise -1 --out " + t.s("x.csv")) == 1);
    CHECK(run("bogus-subcommand") == 1);
}

TEST_CASE("train writes checkpoint + manifest; manifest rerun is bit-identical") {
    TempDir t;
    REQUIRE(run("data gen --dataset two-moons --n 100 --noise 0.1 --seed 3 --out " +
                t.s("train.csv")) == 0);
    REQUIRE(run("train --data " + t.s("train.csv") + " --out " + t.s("run1") + kSmall +
                " --seed 11") == 0);
    CHECK(fs::exists(t.s("run1") + "/model.ckpt"));
    CHECK(fs::exists(t.s("run1") + "/loss_history.csv"));
    CHECK(fs::exists(t.s("run1") + "/run_manifest.txt"));

    REQUIRE(run("train --config " + t.s("run1") + "/run_manifest.txt --out " + t.s("run2")) ==
            0);
    CHECK(slurp(t.s("run1") + "/model.ckpt") == slurp(t.s("run2") + "/model.ckpt"));
}

TEST_CASE("config precedence: flags beat file, unknown keys rejected") {
    TempDir t;
    REQUIRE(run("data gen --dataset two-moons --n 30 --noise 0.1 --seed 3 --out " +
                t.s("train.csv")) == 0);
    {
        std::ofstream cfg(t.s("cfg.txt"));
        cfg << "# comment\nmax_steps = 0\nseed = 5\nwidth = 8\ndepth = 1\n"
            << "embed_dim = 8\nprototypes = 4\ncentroid_dim = 8\n";
    }
    REQUIRE(run("train --data " + t.s("train.csv") + " --config " + t.s("cfg.txt") +
                " --seed 9 --out " + t.s("run")) == 0);
    const std::string manifest = slurp(t.s("run") + "/run_manifest.txt");
    CHECK(manifest.find("seed = 9") != std::string::npos);        // flag wins
    CHECK(manifest.find("max_steps = 0") != std::string::npos);   // file beats default
    CHECK(manifest.find("width = 8") != std::string::npos);

    {
        std::ofstream cfg(t.s("bad.txt"));
        cfg << "banana = 3\n";
    }
    CHECK(run("train --data " + t.s("train.csv") + " --config " + t.s("bad.txt") + " --out " +
              t.s("runb")) == 1);
}

TEST_CASE("exit codes: missing data 2, numeric failure 3") {
    TempDir t;
    CHECK(run("train --data " + t.s("nosuch.csv") + " --out " + t.s("r")) == 2);
    CHECK(run("train --out " + t.s("r")) == 1);  // no --data at all

    REQUIRE(run("data gen --dataset two-moons --n 30 --noise 0.1 --seed 3 --out " +
                t.s("train.csv")) == 0);
    CHECK(run("train --data " + t.s("train.csv") + " --method softmax --width 8 --depth 1"
              " --embed-dim 8 --batch 16 --max-steps 30 --lr 1e154 --out " +
              t.s("r")) == 3);
}

TEST_CASE("train / eval / grid round trip over all methods") {
    TempDir t;
    REQUIRE(run("data gen --dataset two-moons --n 150 --noise 0.1 --seed 3 --out " +
                t.s("train.csv")) == 0);
    REQUIRE(run("data gen --dataset two-moons --n 50 --noise 0.1 --seed 4 --out " +
                t.s("test.csv")) == 0);
    REQUIRE(run("data gen --dataset ring --n 60 --radius 3 --noise 0.05 --seed 5 --out " +
                t.s("ood.csv")) == 0);

    SUBCASE("ddar") {
        REQUIRE(run("train --data " + t.s("train.csv") + " --out " + t.s("run") + kSmall +
                    " --seed 1") == 0);
        REQUIRE(run("eval --checkpoint " + t.s("run") + "/model.ckpt --data " + t.s("test.csv") +
                    " --ood " + t.s("ood.csv") + " --out " + t.s("ev")) == 0);
        const std::string rep = slurp(t.s("ev") + "/report.json");
        CHECK(rep.find("\"auroc\"") != std::string::npos);
        CHECK(fs::exists(t.s("ev") + "/per_point.csv"));

        // without OOD the auroc field is absent
        REQUIRE(run("eval --checkpoint " + t.s("run") + "/model.ckpt --data " + t.s("test.csv") +
                    " --out " + t.s("ev2")) == 0);
        CHECK(slurp(t.s("ev2") + "/report.json").find("auroc") == std::string::npos);

        REQUIRE(run("grid --checkpoint " + t.s("run") + "/model.ckpt --resolution 20 --out " +
                    t.s("grid.csv")) == 0);
        CHECK(count_lines(t.s("grid.csv")) == 401);  // header + 20x20
    }
    SUBCASE("softmax and dropout") {
        REQUIRE(run("train --data " + t.s("train.csv") + " --method dropout --dropout 0.1"
                    " --width 16 --depth 2 --embed-dim 16 --batch 32 --max-steps 100 --out " +
                    t.s("run")) == 0);
        REQUIRE(run("eval --checkpoint " + t.s("run") + "/model.ckpt --data " + t.s("test.csv") +
                    " --passes 5 --out " + t.s("ev")) == 0);
        CHECK(slurp(t.s("ev") + "/report.json").find("\"accuracy\"") != std::string::npos);
    }
    SUBCASE("ensemble") {
        REQUIRE(run("train --data " + t.s("train.csv") + " --method ensemble --ensemble-size 2"
                    " --width 8 --depth 1 --embed-dim 8 --batch 32 --max-steps 60 --out " +
                    t.s("run")) == 0);
        CHECK(fs::exists(t.s("run") + "/model.0.ckpt"));
        CHECK(fs::exists(t.s("run") + "/model.1.ckpt"));
        REQUIRE(run("eval --checkpoint " + t.s("run") + "/model.0.ckpt," + t.s("run") +
                    "/model.1.ckpt --data " + t.s("test.csv") + " --out " + t.s("ev")) == 0);
        CHECK(slurp(t.s("ev") + "/report.json").find("\"ece\"") != std::string::npos);
    }
}

TEST_CASE("compare and ablate emit csv + aligned text tables") {
    TempDir t;
    REQUIRE(run("data gen --dataset two-moons --n 60 --noise 0.1 --seed 3 --out " +
                t.s("train.csv")) == 0);
    REQUIRE(run("data gen --dataset two-moons --n 30 --noise 0.1 --seed 4 --out " +
                t.s("test.csv")) == 0);
    const std::string tiny =
        " --width 8 --depth 1 --embed-dim 8 --prototypes 4 --centroid-dim 8"
        " --batch 32 --max-steps 40";

    REQUIRE(run("compare --data " + t.s("train.csv") + " --test " + t.s("test.csv") +
                " --methods softmax,ddar --seeds 1,2" + tiny + " --out " + t.s("cmp")) == 0);
    const std::string csv = slurp(t.s("cmp") + "/compare.csv");
    CHECK(csv.find("method,accuracy_mean,accuracy_std") != std::string::npos);
    CHECK(count_lines(t.s("cmp") + "/compare.csv") == 3);  // header + 2 methods
    CHECK(count_lines(t.s("cmp") + "/compare.txt") == 3);
    CHECK(run("compare --data " + t.s("train.csv") + " --test " + t.s("test.csv") +
              " --methods nosuch --seeds 1" + tiny + " --out " + t.s("cmp2")) == 1);

    REQUIRE(run("ablate --data " + t.s("train.csv") + " --test " + t.s("test.csv") +
                " --lambdas 0.01,0.1 --loss-subsets d --seeds 1" + tiny + " --out " +
                t.s("abl")) == 0);
    const std::string abl = slurp(t.s("abl") + "/ablate.csv");
    CHECK(abl.find("lambda=0.01") != std::string::npos);
    CHECK(abl.find("terms=d") != std::string::npos);
    CHECK(count_lines(t.s("abl") + "/ablate.csv") == 4);  // header + 2 lambdas + 1 subset
}
