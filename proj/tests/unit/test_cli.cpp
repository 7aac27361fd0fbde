#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "lida/registry.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result lida_run(std::vector<std::string> args) {
    args.insert(args.begin(), "lida");
    std::ostringstream out, err;
    const int code = lida::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lida_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("help and usage errors") {
    const auto help = lida_run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("pretrain") != std::string::npos);
    CHECK(lida_run({}).code == lida::cli::kUsage);
    TempDir dir("usage");
    const auto r = lida_run({"synth", "--out", dir / "corpus", "--bogus"});
    CHECK(r.code == lida::cli::kUsage);
    CHECK_FALSE(fs::exists(dir / "corpus"));  // no side effects
    CHECK(lida_run({"pretrain", "--out", dir / "x.bin"}).code == lida::cli::kUsage);
    CHECK(lida_run({"adapt", "--variant", "weird"}).code == lida::cli::kUsage);
}

TEST_CASE("error classes map to exit codes") {
    TempDir dir("errors");
    {
        std::ofstream f(dir / "junk.bin");
        f << "definitely not a checkpoint";
    }
    {
        std::ofstream f(dir / "img.ppm", std::ios::binary);
        f << "P6\n32 32\n255\n" << std::string(32 * 32 * 3, '\x11');
    }
    const auto corrupt = lida_run({"detect", "--encoder", dir / "junk.bin", dir / "img.ppm"});
    CHECK(corrupt.code == lida::cli::kCorrupt);
    CHECK(corrupt.err.find("bad magic") != std::string::npos);
    {
        std::ofstream f(dir / "m.csv");
        f << "path,label,class\nmissing.png,real,0\nmissing2.png,real,1\n";
    }
    CHECK(lida_run({"pretrain", "--corpus", dir / "m.csv", "--out", dir / "e.bin"}).code == lida::cli::kIo);
    {
        std::ofstream f(dir / "bad.csv");
        f << "path,label,class\nx.png,real\n";
    }
    CHECK(lida_run({"pretrain", "--corpus", dir / "bad.csv", "--out", dir / "e.bin"}).code == lida::cli::kUsage);
    CHECK_FALSE(fs::exists(dir / "e.bin"));
}

TEST_CASE("full pipeline is scriptable and reproducible") {
    TempDir dir("pipeline");
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    unsetenv(lida::cli::kDbEnv);
    const auto plan = dir / "plan.json";
    {
        std::ofstream f(plan);
        f << R"({"image_side": 48, "real_per_class": 4, "fake_per_class": 2, "seed": 3})";
    }
    REQUIRE(lida_run({"synth", "--out", dir / "corpus", "--spec", plan}).code == 0);
    REQUIRE(lida_run({"synth", "--out", dir / "queries", "--spec", plan, "--seed", "4", "--real-per-class", "0"}).code == 0);
    const auto manifest = slurp(dir / "corpus/manifest.csv");
    CHECK(manifest.rfind("path,label,class\nreal/real_c0_00000.png,real,0\n", 0) == 0);

    const auto run_all = [&](const std::string& tag) {
        const auto enc = dir / ("enc" + tag + ".bin");
        const auto enc2 = dir / ("enc2" + tag + ".bin");
        const auto db = dir / ("db" + tag + ".bin");
        REQUIRE(lida_run({"--threads", tag == "a" ? "1" : "2", "pretrain", "--corpus", dir / "corpus/manifest.csv",
                          "--out", enc, "--epochs", "2", "--lr", "1e-3", "--log", dir / ("pre" + tag + ".tsv")})
                    .code == 0);
        for (const std::string g : {"blocks15", "rows16", "cols17", "lattice5"}) {
            std::vector<std::string> args{"register", "--db", db, "--encoder", enc, "--label", g};
            for (int c = 0; c < 3; ++c) args.push_back(dir / ("corpus/" + g + "/" + g + "_c" + std::to_string(c) + "_0000" + std::to_string(2 * c) + ".png"));
            const auto r = lida_run(args);
            REQUIRE(r.code == 0);
        }
        const auto ad = lida_run({"adapt", "--db", db, "--encoder", enc, "--corpus", dir / "corpus/manifest.csv",
                                  "--out", enc2, "--epochs", "2", "--lr", "1e-3", "--seed", "7"});
        REQUIRE(ad.code == 0);
        const auto ev = lida_run({"eval", "--db", db, "--encoder", enc2, "--queries", dir / "queries/manifest.csv",
                                  "--format", "tsv"});
        REQUIRE(ev.code == 0);
        return ev.out + slurp(enc2) + slurp(db);
    };
    const auto a = run_all("a");
    const auto b = run_all("b");
    CHECK(a == b);
    CHECK(a.rfind("label\tqueries\trank1\tmap\n", 0) == 0);
    CHECK(a.find("Avg\t24\t") != std::string::npos);

    const auto q = lida_run({"query", "--db", dir / "dba.bin", "--encoder", dir / "enc2a.bin", "-k", "2",
                             dir / "queries/rows16/rows16_c0_00000.png"});
    REQUIRE(q.code == 0);
    std::istringstream lines(q.out);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        ++n;
        CHECK(line.find("\t" + std::to_string(n) + "\t") != std::string::npos);
        CHECK(line.size() - line.rfind('.') == 7);  // six decimals
    }
    CHECK(n == 2);

    const auto reg = lida::load_registry(dir / "dba.bin");
    CHECK(reg.size() == 12);
    CHECK(reg.records()[0].added_at == 1700000000);
    CHECK(reg.prototype().has_value());

    // the env var supplies the default registry
    setenv(lida::cli::kDbEnv, (dir / "dba.bin").c_str(), 1);
    const auto via_env = lida_run({"query", "--encoder", dir / "enc2a.bin", "-k", "2", dir / "queries/rows16/rows16_c0_00000.png"});
    CHECK(via_env.out == q.out);
    unsetenv(lida::cli::kDbEnv);

    const auto det = lida_run({"detect", "--encoder", dir / "enca.bin", "--threshold", "0.5", dir / "corpus/real/real_c0_00000.png"});
    CHECK(det.code == 0);
    CHECK(det.out.find("\treal\t") != std::string::npos);

    REQUIRE(lida_run({"degrade", "--sigma", "0", dir / "corpus/real/real_c0_00000.png", "--out", dir / "copy.png"}).code == 0);
    CHECK(slurp(dir / "copy.png").size() > 0);
    REQUIRE(lida_run({"fingerprint", dir / "copy.png", "--out", dir / "fp.ppm"}).code == 0);
    CHECK(slurp(dir / "fp.ppm").rfind("P6\n48 48\n255\n", 0) == 0);
}
