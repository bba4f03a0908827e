// Drives the installed binary end to end through std::system.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "nkdcd/io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string cli = NKDCD_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nkdcd_cli_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
    const int status = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_tiny_config(const std::string& path, const std::string& extra = "") {
    std::ofstream out(path);
    out << R"({"lambda":0.01,"tau":0.0002,"max_lag":2,"lift_dim":2,"width":4,"batch":16,)"
        << R"("max_epochs":8,"activation":"leaky_relu","epsilon":0.01)" << extra << "}";
}

} // namespace

TEST_CASE("generate is deterministic and writes the advertised shapes") {
    TempDir tmp;
    const std::string args = "generate var3 --t 50 --seed 7 --out " + tmp.file("a.csv") +
                             " --truth-out " + tmp.file("ta.csv");
    REQUIRE(run(args) == 0);
    REQUIRE(run("generate var3 --t 50 --seed 7 --out " + tmp.file("b.csv") + " --truth-out " +
                tmp.file("tb.csv")) == 0);
    CHECK(slurp(tmp.file("a.csv")) == slurp(tmp.file("b.csv")));
    CHECK(slurp(tmp.file("ta.csv")) == slurp(tmp.file("tb.csv")));

    nkdcd::Matrix data = nkdcd::io::read_csv(tmp.file("a.csv"));
    CHECK(data.rows() == 50);
    CHECK(data.cols() == 10);
    nkdcd::Matrix truth = nkdcd::io::read_csv(tmp.file("ta.csv"));
    CHECK(truth.rows() == 10);
    CHECK(truth.cols() == 10);

    REQUIRE(run("generate lorenz96 --n 6 --t 20 --burn-in 10 --seed 3 --out " +
                tmp.file("l.csv") + " --truth-out " + tmp.file("tl.csv")) == 0);
    nkdcd::Matrix ldata = nkdcd::io::read_csv(tmp.file("l.csv"));
    CHECK(ldata.rows() == 20);
    CHECK(ldata.cols() == 6);
}

TEST_CASE("train, infer, eval, heatmap pipeline") {
    TempDir tmp;
    REQUIRE(run("generate var3 --n 4 --t 60 --seed 1 --out " + tmp.file("d.csv") +
                " --truth-out " + tmp.file("t.csv")) == 0);
    write_tiny_config(tmp.file("cfg.json"));

    REQUIRE(run("train --data " + tmp.file("d.csv") + " --config " + tmp.file("cfg.json") +
                " --out-checkpoint " + tmp.file("ck.json")) == 0);
    REQUIRE(fs::exists(tmp.file("ck.json")));

    SECTION("checkpoint load-save is byte identical through the library") {
        nkdcd::io::Checkpoint ck = nkdcd::io::load_checkpoint(tmp.file("ck.json"));
        nkdcd::io::save_checkpoint(tmp.file("ck2.json"), ck);
        CHECK(slurp(tmp.file("ck.json")) == slurp(tmp.file("ck2.json")));
    }

    SECTION("infer writes an adjacency of the right shape") {
        REQUIRE(run("infer --checkpoint " + tmp.file("ck.json") + " --epsilon 0.001 --out " +
                    tmp.file("adj.csv") + " --scores-out " + tmp.file("sc.csv")) == 0);
        nkdcd::Matrix adj = nkdcd::io::read_csv(tmp.file("adj.csv"));
        CHECK(adj.rows() == 4);
        CHECK(adj.cols() == 4);
        for (nkdcd::Index k = 0; k < adj.size(); ++k)
            CHECK((adj.data()[k] == 0.0 || adj.data()[k] == 1.0));
    }

    SECTION("a huge epsilon empties the adjacency") {
        REQUIRE(run("infer --checkpoint " + tmp.file("ck.json") + " --epsilon 1e300 --out " +
                    tmp.file("adj0.csv")) == 0);
        nkdcd::Matrix adj = nkdcd::io::read_csv(tmp.file("adj0.csv"));
        CHECK(adj.squared_norm() == 0.0);
    }

    SECTION("eval writes a results file with the metrics") {
        REQUIRE(run("eval --checkpoint " + tmp.file("ck.json") + " --truth " + tmp.file("t.csv") +
                    " --out " + tmp.file("res.json")) == 0);
        nlohmann::json res;
        std::ifstream in(tmp.file("res.json"));
        in >> res;
        CHECK(res.at("auroc").get<double>() >= 0.0);
        CHECK(res.at("auroc").get<double>() <= 1.0);
        CHECK(res.at("roc").size() >= 2);
    }

    SECTION("heatmap writes one SVG per lag") {
        REQUIRE(run("heatmap --checkpoint " + tmp.file("ck.json") + " --out " +
                    tmp.file("maps")) == 0);
        CHECK(fs::exists(tmp.file("maps/lag1.svg")));
        CHECK(fs::exists(tmp.file("maps/lag2.svg")));
    }
}

TEST_CASE("baseline command produces an evaluable checkpoint") {
    TempDir tmp;
    REQUIRE(run("generate var3 --n 4 --t 80 --seed 5 --out " + tmp.file("d.csv") +
                " --truth-out " + tmp.file("t.csv")) == 0);
    write_tiny_config(tmp.file("cfg.json"));
    REQUIRE(run("baseline --data " + tmp.file("d.csv") + " --config " + tmp.file("cfg.json") +
                " --out " + tmp.file("bl.json")) == 0);
    REQUIRE(run("eval --checkpoint " + tmp.file("bl.json") + " --truth " + tmp.file("t.csv") +
                " --out " + tmp.file("res.json")) == 0);
    nlohmann::json res;
    std::ifstream in(tmp.file("res.json"));
    in >> res;
    CHECK(res.at("auroc").get<double>() >= 0.0);
}

TEST_CASE("eval of a perfect score matrix reports auroc 1.0") {
    TempDir tmp;
    {
        std::ofstream s(tmp.file("scores.csv"));
        s << "0.9,0.8\n0.1,0.7\n";
        std::ofstream t(tmp.file("truth.csv"));
        t << "1,1\n0,1\n";
    }
    REQUIRE(run("eval --scores " + tmp.file("scores.csv") + " --truth " + tmp.file("truth.csv") +
                " --epsilon 0.5 --out " + tmp.file("res.json")) == 0);
    nlohmann::json res;
    std::ifstream in(tmp.file("res.json"));
    in >> res;
    CHECK(res.at("auroc").get<double>() == 1.0);
    CHECK(res.at("aupr").get<double>() == 1.0);
}

TEST_CASE("failure modes use the documented exit codes") {
    TempDir tmp;
    write_tiny_config(tmp.file("cfg.json"));

    SECTION("missing data file exits 2") {
        CHECK(run("train --data " + tmp.file("nope.csv") + " --config " + tmp.file("cfg.json") +
                  " --out-checkpoint " + tmp.file("ck.json")) == 2);
    }
    SECTION("a config with tau > 1 is rejected with exit 2") {
        {
            std::ofstream out(tmp.file("bad.json"));
            out << R"({"tau":1.5,"lift_dim":2,"width":4,"max_lag":2,"batch":8})";
        }
        std::ofstream d(tmp.file("d.csv"));
        d << "1,2\n2,3\n3,4\n4,5\n5,6\n6,7\n";
        d.close();
        CHECK(run("train --data " + tmp.file("d.csv") + " --config " + tmp.file("bad.json") +
                  " --out-checkpoint " + tmp.file("ck.json")) == 2);
    }
    SECTION("degenerate truth is a numeric failure with exit 1") {
        {
            std::ofstream s(tmp.file("scores.csv"));
            s << "0.9,0.8\n0.1,0.7\n";
            std::ofstream t(tmp.file("truth.csv"));
            t << "1,1\n1,1\n";
        }
        CHECK(run("eval --scores " + tmp.file("scores.csv") + " --truth " + tmp.file("truth.csv") +
                  " --epsilon 0.5 --out " + tmp.file("res.json")) == 1);
    }
    SECTION("unknown subcommand exits 2") { CHECK(run("frobnicate") == 2); }
}
