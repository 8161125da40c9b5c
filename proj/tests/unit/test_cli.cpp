#include "tailedts/cli.hpp"
#include "tailedts/io.hpp"

#include "../support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <sstream>
#include <thread>

using namespace tailedts;
namespace fs = std::filesystem;

namespace {

const fs::path kDump = fs::path(TAILEDTS_SOURCE_DIR) / "tests/fixtures/ingest_dump";

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

nlohmann::json run_config(const fs::path& output) {
    return nlohmann::json::parse(io::read_file(output.string() + ".run.json"))["config"];
}

void make_month(const testsupport::TempDir& dir) {
    REQUIRE(run({"synth", "--weights", "1:0.3,24:0.5", "--noise", "gaussian:3", "--level", "30", "--length", "744",
                 "--count", "12", "--count-mode", "--month", "2024-01", "--out", (dir / "m.csv.gz").string()})
                .code == 0);
}

}  // namespace

TEST_CASE("help and usage errors") {
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("quantify") != std::string::npos);
    CHECK(run({"bench", "predict", "--help"}).out.find("--grid-huber") != std::string::npos);
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"fit", "--no-such-flag", "1"}).code == 1);
}

TEST_CASE("flags override config values, which override defaults") {
    testsupport::TempDir dir("precedence");
    make_month(dir);
    const auto input = (dir / "m.csv.gz").string();
    io::write_file(dir / "c.json", R"({"order": 3, "loss": "huber:2", "max-series": 4})");
    const auto out = dir / "model.json";
    REQUIRE(run({"fit", "--config", (dir / "c.json").string(), "--input", input, "--order", "2", "--out", out.string()})
                .code == 0);
    const auto cfg = run_config(out);
    CHECK(cfg["order"] == 2);
    CHECK(cfg["loss"] == "huber:2");
    CHECK(cfg["max-series"] == 4);
    CHECK(cfg["seed"] == 1);
    CHECK(nlohmann::json::parse(io::read_file(out))["weights"].size() == 2);
}

TEST_CASE("config problems name the offending key") {
    testsupport::TempDir dir("badconfig");
    io::write_file(dir / "unknown.json", R"({"ordr": 3})");
    auto r = run({"fit", "--config", (dir / "unknown.json").string(), "--input", "x", "--loss", "l2", "--out", "y"});
    CHECK(r.code == 1);
    CHECK(r.err.find("ordr") != std::string::npos);

    io::write_file(dir / "type.json", R"({"order": "three"})");
    r = run({"fit", "--config", (dir / "type.json").string(), "--input", "x", "--loss", "l2", "--out", "y"});
    CHECK(r.code == 1);
    CHECK(r.err.find("order") != std::string::npos);

    io::write_file(dir / "broken.json", "{");
    CHECK(run({"fit", "--config", (dir / "broken.json").string()}).code == 1);
}

TEST_CASE("values are validated before any work starts") {
    CHECK(run({"fit", "--input", "x", "--out", "y"}).code == 1);  // missing --loss
    CHECK(run({"fit", "--input", "x", "--loss", "l2", "--out", "y", "--order", "two"}).code == 1);
    CHECK(run({"quantify", "--input", "x", "--report", "y", "--order", "4", "--sparsity", "5"}).code == 1);
    CHECK(run({"quantify", "--input", "x", "--report", "y", "--categories", "O7"}).code == 1);
    CHECK(run({"ingest", "--source", "x", "--year", "2024", "--month", "13", "--out", "y"}).code == 1);
    CHECK(run({"bench", "predict", "--input", "x", "--report", "y", "--split", "1-17,19-24,25-31"}).code == 1);
    CHECK(run({"bench", "predict", "--input", "x", "--report", "y", "--grid-quantile", "0.5,1.5"}).code == 1);
    CHECK(run({"synth", "--weights", "1:0.7,2:0.6", "--out", "y"}).code == 1);
    CHECK(run({"synth", "--weights", "1:0.5", "--month", "2024-01", "--out", "y"}).code == 1);
}

TEST_CASE("runtime failures exit with 2") {
    testsupport::TempDir dir("runtime");
    const auto r = run({"fit", "--input", (dir / "absent.csv.gz").string(), "--loss", "l2", "--out",
                        (dir / "m.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("\"level\":\"error\"") != std::string::npos);
}

TEST_CASE("the data directory variable supplies the ingest source") {
    testsupport::TempDir dir("envsource");
    ::setenv("TAILEDTS_DATA_DIR", kDump.c_str(), 1);
    const auto r = run({"ingest", "--year", "2024", "--month", "2", "--days", "2", "--out", (dir / "t.csv.gz").string()});
    ::unsetenv("TAILEDTS_DATA_DIR");
    CHECK(r.code == 0);
    CHECK(r.out.find("129 pages") != std::string::npos);
    CHECK(run({"ingest", "--year", "2024", "--month", "2", "--out", (dir / "u.csv.gz").string()}).code == 1);
}

TEST_CASE("verbs leave their inputs untouched and replay reproduces outputs") {
    testsupport::TempDir dir("replay");
    make_month(dir);
    const auto input = dir / "m.csv.gz";
    const std::string before = io::read_file(input) + io::read_file(input.string() + ".manifest.json");
    REQUIRE(run({"quantify", "--input", input.string(), "--order", "24", "--sparsity", "2", "--report",
                 (dir / "q.json").string()})
                .code == 0);
    REQUIRE(run({"fit", "--input", input.string(), "--order", "24", "--loss", "l1", "--out", (dir / "f.json").string()})
                .code == 0);
    REQUIRE(run({"predict", "--input", input.string(), "--model", (dir / "f.json").string(), "--out",
                 (dir / "p.csv").string()})
                .code == 0);
    CHECK(io::read_file(input) + io::read_file(input.string() + ".manifest.json") == before);

    for (const char* name : {"q.json", "f.json", "p.csv"}) {
        const std::string first = io::read_file(dir / name);
        fs::remove(dir / name);
        CHECK(run({"replay", "--manifest", (dir / name).string() + ".run.json"}).code == 0);
        CHECK(io::read_file(dir / name) == first);
    }
    io::write_file(dir / "bad.run.json", R"({"verb": "replay", "config": {}})");
    CHECK(run({"replay", "--manifest", (dir / "bad.run.json").string()}).code == 1);
}

TEST_CASE("histogram verb writes the log-log table") {
    testsupport::TempDir dir("hist");
    const auto r = run({"histogram", "--samples", "20000", "--alpha", "2", "--out", (dir / "h.csv").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("20000 values") != std::string::npos);
    CHECK(io::read_file(dir / "h.csv").rfind("# zeros=0 positives=20000", 0) == 0);
}

TEST_CASE("nested and top-level spellings of a verb resolve the same flags") {
    for (const auto& prefix : {std::vector<std::string>{"bench", "synth"}, std::vector<std::string>{"synth"}}) {
        auto args = prefix;
        for (const std::string a : {"--weights", "2:0.4", "--length", "30", "--out", "s.csv"}) args.push_back(a);
        const auto parsed = cli::load_config(args);
        REQUIRE(parsed.config);
        CHECK(parsed.config->verb == "bench synth");
        CHECK(parsed.config->options["weights"] == "2:0.4");
        CHECK(parsed.config->options["length"] == 30);
    }
}

TEST_CASE("download fetches every hour from the configured server") {
    httplib::Server server;
    server.set_mount_point("/2024/2024-02", kDump.string());
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    testsupport::TempDir dir("download");
    const auto args = std::vector<std::string>{"download", "--year", "2024", "--month", "2", "--days", "2",
                                               "--base-url", "http://127.0.0.1:" + std::to_string(port),
                                               "--out", dir.path().string()};
    const auto first = run(args);
    const auto second = run(args);
    server.stop();
    thread.join();
    CHECK(first.code == 0);
    CHECK(second.code == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(kDump)) {
        ++files;
        CHECK(io::read_file(dir / "2024/2024-02" / e.path().filename()) == io::read_file(e.path()));
    }
    CHECK(files == 48);
}
