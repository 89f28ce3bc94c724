#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "ddvc/config.hpp"

using namespace ddvc;
namespace fs = std::filesystem;

static int run(const std::string& cmd) {
    int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

static std::string slurp(const std::string& path) {
    std::ifstream f(path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

TEST_CASE("config: defaults, file values, and CLI precedence") {
    auto defaults = cfg::parse_config_text("", {});
    CHECK(defaults.codec == "deep");
    CHECK(defaults.gop == 8);
    CHECK(defaults.lambda_id == 4);

    auto from_file = cfg::parse_config_text("gop = 4\ncodec = classic\n# comment\n\n", {});
    CHECK(from_file.gop == 4);
    CHECK(from_file.codec == "classic");

    auto merged = cfg::parse_config_text("gop = 4\n", {{"gop", "8"}, {"seed", "99"}});
    CHECK(merged.gop == 8);
    CHECK(merged.seed == 99);

    // the effective config round-trips through its own serialization
    auto again = cfg::parse_config_text(cfg::to_text(merged), {});
    CHECK(cfg::to_text(again) == cfg::to_text(merged));
}

TEST_CASE("config: unknown keys name the nearest valid key, types are checked") {
    try {
        cfg::parse_config_text("gpo = 4\n", {});
        FAIL("expected ConfigError");
    } catch (const cfg::ConfigError& e) {
        CHECK(std::string(e.what()).find("gop") != std::string::npos);
        CHECK(std::string(e.what()).find("gpo") != std::string::npos);
    }
    CHECK_THROWS_AS(cfg::parse_config_text("gop = fast\n", {}), cfg::ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text("codec = h264\n", {}), cfg::ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text("gop 4\n", {}), cfg::ConfigError);
    CHECK_THROWS_AS(cfg::load_config("/nonexistent/file.cfg", {}), cfg::ConfigError);
}

TEST_CASE("config: DDVC_THREADS caps the worker count") {
    cfg::RunConfig rc;
    rc.threads = 4;
    setenv("DDVC_THREADS", "2", 1);
    CHECK(cfg::effective_threads(rc) == 2);
    setenv("DDVC_THREADS", "8", 1);
    CHECK(cfg::effective_threads(rc) == 4);
    unsetenv("DDVC_THREADS");
    CHECK(cfg::effective_threads(rc) == 4);
}

TEST_CASE("cli: classic round trip through the binary, exit codes") {
    const std::string d = "/tmp/ddvc_cli_test";
    fs::remove_all(d);
    REQUIRE(run("./ddvc make-data --out " + d + "/seq --frames 5 --size 48 --seed 3") == 0);
    REQUIRE(run("./ddvc encode --codec classic --in " + d + "/seq --gop 4 --qi 3 --out " + d +
                "/a.ddvc") == 0);
    REQUIRE(run("./ddvc decode --in " + d + "/a.ddvc --out " + d + "/rec") == 0);
    REQUIRE(std::system(("./ddvc eval --ref " + d + "/seq --rec " + d + "/rec --bits " + d +
                         "/a.ddvc --out " + d + "/report > " + d + "/eval.json 2>/dev/null")
                            .c_str()) == 0);
    auto j = nlohmann::json::parse(slurp(d + "/eval.json"));
    CHECK(double(j["avg_psnr"]) > 25.0);
    CHECK(double(j["bpp"]) > 0.0);
    CHECK(fs::exists(d + "/report/report.json"));
    CHECK(fs::exists(d + "/report/report.csv"));
    CHECK(fs::exists(d + "/seq/run_config.txt"));

    // config file + flag override: flag wins
    std::ofstream(d + "/enc.cfg") << "quality = 1\ngop = 2\n";
    REQUIRE(run("./ddvc encode --codec classic --config " + d + "/enc.cfg --qi 3 --in " + d +
                "/seq --out " + d + "/b.ddvc") == 0);
    REQUIRE(std::system(("./ddvc inspect --in " + d + "/b.ddvc > " + d + "/ins.json 2>/dev/null")
                            .c_str()) == 0);
    auto ins = nlohmann::json::parse(slurp(d + "/ins.json"));
    CHECK(int(ins["gop"]) == 2);         // from file
    CHECK(int(ins["lambda_id"]) == 3);   // quality index, overridden by --qi

    CHECK(run("./ddvc no-such-command") == 1);
    CHECK(run("./ddvc encode --codec deep --in " + d + "/seq --out " + d + "/x.ddvc") == 1);
    CHECK(run("./ddvc decode --in " + d + "/seq/run_config.txt --out " + d + "/y") == 2);
    CHECK(run("./ddvc encode --codec classic --in /nonexistent --out " + d + "/z.ddvc") == 2);
    fs::remove_all(d);
}

TEST_CASE("cli: deep train/encode/decode round trip and determinism") {
    const std::string d = "/tmp/ddvc_cli_deep";
    fs::remove_all(d);
    REQUIRE(run("./ddvc make-data --out " + d + "/seq --frames 5 --size 48 --seed 4") == 0);
    REQUIRE(run("./ddvc train --out " + d + "/run --epochs 1 --triplets 4 --batch 2 --seed 5") ==
            0);
    CHECK(fs::exists(d + "/run/model.ckpt"));
    CHECK(fs::exists(d + "/run/loss.csv"));
    CHECK(fs::exists(d + "/run/run_config.txt"));
    CHECK(fs::exists(d + "/run/environment.txt"));

    const std::string enc = "./ddvc encode --codec deep --ckpt " + d + "/run/model.ckpt --in " +
                            d + "/seq --gop 4 --out ";
    REQUIRE(run(enc + d + "/a.ddvc") == 0);
    REQUIRE(run(enc + d + "/b.ddvc") == 0);
    CHECK(slurp(d + "/a.ddvc") == slurp(d + "/b.ddvc"));  // byte-identical containers

    REQUIRE(run("./ddvc decode --in " + d + "/a.ddvc --ckpt " + d + "/run/model.ckpt --out " +
                d + "/rec") == 0);
    CHECK(fs::exists(d + "/rec/000001.png"));
    REQUIRE(run("./ddvc si-dump --in " + d + "/seq --ckpt " + d + "/run/model.ckpt --gop 4 "
                "--out " + d + "/si") == 0);
    REQUIRE(run("./ddvc visualize --in " + d + "/seq --ckpt " + d + "/run/model.ckpt --out " +
                d + "/lat") == 0);
    CHECK(fs::exists(d + "/lat/channel_000.png"));
    REQUIRE(std::system(("./ddvc bench --codec classic --in " + d + "/seq --qi 2 > " + d +
                         "/bench.json 2>/dev/null")
                            .c_str()) == 0);
    auto b = nlohmann::json::parse(slurp(d + "/bench.json"));
    CHECK(b["feedback"]["wz_syndrome_bits"].get<double>() > 0);
    CHECK(b["encoder"]["median_ms"].get<double>() > 0);
    fs::remove_all(d);
}
