#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "nkdcd/heatmap.hpp"
#include "nkdcd/io.hpp"
#include "oracles.hpp"

using namespace nkdcd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nkdcd_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("CSV round trip preserves 64-bit values") {
    TempDir tmp;
    std::mt19937_64 rng(5);
    Matrix m = oracles::random_matrix(17, 4, rng, -1e6, 1e6);
    m(0, 0) = 1.0 / 3.0;
    m(1, 1) = -0.1;
    io::write_csv(tmp.file("m.csv"), m);
    Matrix back = io::read_csv(tmp.file("m.csv"));
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    for (Index k = 0; k < m.size(); ++k) REQUIRE(back.data()[k] == m.data()[k]);
}

TEST_CASE("CSV reader accepts an optional header row") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("h.csv"));
        out << "s1,s2,s3\n1.5,2.5,3.5\n-1,0.25,1e3\n";
    }
    Matrix m = io::read_csv(tmp.file("h.csv"));
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 3);
    CHECK(m(0, 0) == 1.5);
    CHECK(m(1, 2) == 1000.0);
}

TEST_CASE("CSV reader rejects ragged and non-numeric bodies") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("bad.csv"));
        out << "1,2\n3,4,5\n";
    }
    CHECK_THROWS_AS(io::read_csv(tmp.file("bad.csv")), IoError);
    {
        std::ofstream out(tmp.file("nan.csv"));
        out << "1,2\nnan,4\n";
    }
    CHECK_THROWS_AS(io::read_csv(tmp.file("nan.csv")), IoError);
    CHECK_THROWS_AS(io::read_csv(tmp.file("missing.csv")), IoError);
}

TEST_CASE("config JSON honors defaults, strictness, and the range checks") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("cfg.json"));
        out << R"({"lambda":0.05,"tau":0.0005,"max_lag":5,"lift_dim":15,"width":16,"batch":500})";
    }
    TrainConfig cfg = io::load_config(tmp.file("cfg.json"));
    CHECK(cfg.lambda == 0.05);
    CHECK(cfg.tau == 0.0005);
    CHECK(cfg.max_lag == 5);
    CHECK(cfg.lift_dim == 15);
    CHECK(cfg.width == 16);
    CHECK(cfg.batch == 500);
    CHECK(cfg.penalty == PenaltyKind::kIlg);
    CHECK(cfg.standardize == true); // leaky_relu default
    CHECK_NOTHROW(cfg.validate());

    {
        std::ofstream out(tmp.file("linear.json"));
        out << R"({"activation":"linear","tau":0.05})";
    }
    CHECK(io::load_config(tmp.file("linear.json")).standardize == false);

    {
        std::ofstream out(tmp.file("tau.json"));
        out << R"({"tau":1.5})";
    }
    CHECK_THROWS_AS(io::load_config(tmp.file("tau.json")).validate(), ValidationError);

    {
        std::ofstream out(tmp.file("typo.json"));
        out << R"({"lamda":0.1})";
    }
    CHECK_THROWS_AS(io::load_config(tmp.file("typo.json")), ValidationError);
}

TEST_CASE("checkpoint save-load-save is byte identical") {
    TempDir tmp;
    TrainConfig cfg;
    cfg.lift_dim = 3;
    cfg.width = 4;
    cfg.max_lag = 2;
    cfg.batch = 7;
    cfg.lambda = 1.0 / 3.0;
    cfg.tau = 0.123456789012345678;

    io::Checkpoint ck;
    ck.kind = "nkdcd";
    ck.config = cfg;
    ck.series = 3;
    ck.length = 50;
    ck.model = NkdcdModel::init(3, 3, 2, 4, Activation::kLeakyRelu, true, 99);
    ck.report.epochs = 12;
    ck.report.reason = StopReason::kConverged;
    ck.report.final_loss.recon_autoencoder = 0.25;
    ck.report.final_loss.lifted_var = 1.0 / 7.0;
    ck.report.final_loss.nar_base = 1e-13;
    ck.report.final_loss.nar_autoencoded = 3.0;
    ck.report.final_loss.penalty = 0.75;

    io::save_checkpoint(tmp.file("a.json"), ck);
    io::Checkpoint loaded = io::load_checkpoint(tmp.file("a.json"));
    io::save_checkpoint(tmp.file("b.json"), loaded);
    REQUIRE(slurp(tmp.file("a.json")) == slurp(tmp.file("b.json")));

    SECTION("loaded weights match bit for bit") {
        for (int i = 0; i < 3; ++i)
            for (Index k = 0; k < ck.model.encoder.layer(i).weights.size(); ++k)
                REQUIRE(loaded.model.encoder.layer(i).weights.data()[k] ==
                        ck.model.encoder.layer(i).weights.data()[k]);
        for (Index l = 0; l < 2; ++l)
            for (Index k = 0; k < ck.model.lags.matrix(l).size(); ++k)
                REQUIRE(loaded.model.lags.matrix(l).data()[k] == ck.model.lags.matrix(l).data()[k]);
    }
}

TEST_CASE("linear VAR checkpoints round trip") {
    TempDir tmp;
    TrainConfig cfg;
    cfg.max_lag = 2;
    cfg.lift_dim = 1;
    cfg.width = 4;
    io::Checkpoint ck;
    ck.kind = "linear_var";
    ck.config = cfg;
    ck.series = 4;
    ck.length = 80;
    ck.linear.lags = LagStack(4, 1, 2);
    std::mt19937_64 rng(8);
    for (Index l = 0; l < 2; ++l) ck.linear.lags.matrix(l) = oracles::random_matrix(4, 4, rng);
    ck.linear.mean = {0.1, 0.2, 0.3, 0.4};
    ck.linear.scale = {1.0, 2.0, 3.0, 4.0};
    ck.linear.epochs = 42;
    ck.linear.objective = 17.5;

    io::save_checkpoint(tmp.file("lv.json"), ck);
    io::Checkpoint loaded = io::load_checkpoint(tmp.file("lv.json"));
    io::save_checkpoint(tmp.file("lv2.json"), loaded);
    REQUIRE(slurp(tmp.file("lv.json")) == slurp(tmp.file("lv2.json")));
    CHECK(loaded.linear.epochs == 42);
    for (Index l = 0; l < 2; ++l)
        for (Index k = 0; k < 16; ++k)
            REQUIRE(loaded.linear.lags.matrix(l).data()[k] == ck.linear.lags.matrix(l).data()[k]);
}

TEST_CASE("results file carries the metrics and stays in range") {
    TempDir tmp;
    std::mt19937_64 rng(12);
    LagStack lags(3, 2, 2);
    for (Index l = 0; l < 2; ++l) lags.matrix(l) = oracles::random_matrix(6, 6, rng, 0.0, 1.0);
    Matrix truth(3, 3);
    truth(0, 1) = 1.0;
    truth(2, 2) = 1.0;
    MetricsReport rep = evaluate(score_gc(lags), truth, 0.5);
    io::Json j = io::results_to_json(rep, TrainConfig{}, io::Json{{"path", "x.csv"}}, 1.25);
    io::save_json(tmp.file("res.json"), j);

    io::Json back;
    std::ifstream in(tmp.file("res.json"));
    in >> back;
    CHECK(back.at("auroc").get<double>() >= 0.0);
    CHECK(back.at("auroc").get<double>() <= 1.0);
    CHECK(back.at("aupr").get<double>() >= 0.0);
    CHECK(back.at("aupr").get<double>() <= 1.0);
    CHECK(back.at("adjacency").size() == 3);
    CHECK(back.at("wall_clock_seconds").get<double>() == 1.25);
}

TEST_CASE("heat maps render one SVG per lag with n^2 cells") {
    TempDir tmp;
    LagStack lags(3, 2, 2);
    SECTION("all-zero stack renders a uniform background") {
        write_heatmaps(tmp.path.string(), score_gc(lags));
        const std::string svg = slurp(tmp.file("lag1.svg"));
        CHECK(svg.find("<svg") != std::string::npos);
        // every cell is the zero color
        std::size_t count = 0, at = 0;
        while ((at = svg.find("fill=\"rgb(255,255,255)\"", at)) != std::string::npos) {
            ++count;
            at += 10;
        }
        CHECK(count == 9);
    }
    SECTION("nonzero stacks shade cells and write every lag") {
        Matrix block(2, 2);
        block(0, 0) = 2.0;
        lags.set_block(0, 1, 2, block);
        lags.set_block(1, 0, 0, block);
        write_heatmaps(tmp.path.string(), score_gc(lags));
        CHECK(fs::exists(tmp.file("lag1.svg")));
        CHECK(fs::exists(tmp.file("lag2.svg")));
        const std::string svg = slurp(tmp.file("lag1.svg"));
        CHECK(svg.find("rgb(0,0,0)") != std::string::npos); // the max cell is black
    }
}
