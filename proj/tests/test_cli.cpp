#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(MSM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("msm_cli_test_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

}  // namespace

TEST_CASE("cli: usage errors exit with 2") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("simulate --n 64") == 2);
    CHECK(run("simulate --theta 0.3,1,0.5,1 --n 1") == 2);
    CHECK(run("simulate --theta 0.3,1,0.5,1 --n 64 --method fft") == 2);
    CHECK(run("estimate") == 2);
    CHECK(run("estimate --in x.csv --regime wavy") == 2);
    CHECK(run("kernels --lags 4") == 2);
    CHECK(run("rates") == 2);
    CHECK(run("simulate --theta 0.3,1,0.5 --n 64") == 2);
    CHECK(run("simulate --theta 0.3,a,0.5,1 --n 64") == 2);
}

TEST_CASE("cli: simulate, estimate and kernels") {
    TempDir dir;
    CHECK(run("simulate --theta 0.3,1,0.5,1 --n 4096 --seed 3 --out " + (dir / "s.csv")) == 0);
    CHECK(run("simulate --theta 0.3,1,0.5,1 --n 4096 --seed 3 --out " + (dir / "s.bin")) == 0);
    CHECK(fs::file_size(dir / "s.bin") < fs::file_size(dir / "s.csv"));
    const int rc = run("estimate --in " + (dir / "s.csv") + " --regime rough --out " + (dir / "r.json"));
    // a single path at this size may legitimately fail the positivity check
    CHECK((rc == 0 || rc == 1));
    if (rc == 0) {
        std::ifstream f(dir / "r.json");
        const auto j = nlohmann::json::parse(f);
        CHECK(j["regime"] == "rough");
        CHECK(j["n"] == 4096);
    }
    CHECK(run("estimate --in " + (dir / "s.bin") + " --format table --regime rough") == rc);
    CHECK(run("kernels --h 0.3 --lags 8 --out " + (dir / "k.json")) == 0);
    std::ifstream k(dir / "k.json");
    CHECK_FALSE(nlohmann::json::parse(k).empty());
}

TEST_CASE("cli: domain errors exit with 1") {
    TempDir dir;
    // Lambda^2 > sigma^2 Pi
    CHECK(run("simulate --theta 0.3,1,2,1 --n 64") == 1);
    CHECK(run("simulate --theta 1.3,1,0.5,1 --n 64") == 1);
    CHECK(run("estimate --in " + (dir / "missing.csv")) == 1);
    write_file(dir / "bad.csv", "not,a,series\n1,2\n");
    CHECK(run("estimate --in " + (dir / "bad.csv")) == 1);
    CHECK(run("kernels --h 1.5 --lags 4") == 1);
    CHECK(run("rates --config " + (dir / "missing.json")) == 1);
    write_file(dir / "broken.json", "{ not json");
    CHECK(run("rates --config " + (dir / "broken.json")) == 1);
    write_file(dir / "kl.json", R"({"experiment": "kl", "theta": {"h": 0.3, "sigma_sq": 1, "lambda": 0.5, "pi": 1},
        "n_grid": [16, 32], "r0": 0.05})");
    CHECK(run("rates --config " + (dir / "kl.json")) == 1);
}

TEST_CASE("cli: experiments report assertion failures with 3") {
    TempDir dir;
    write_file(dir / "ok.json", R"({"experiment": "kl", "theta": {"h": 0.3, "sigma_sq": 1, "lambda": 0.5, "pi": 1},
        "n_grid": [16, 32, 64], "r0": 0.05, "output": ")" + (dir / "ok") + R"("})");
    CHECK(run("kl --config " + (dir / "ok.json")) == 0);
    CHECK(fs::exists(dir / "ok.csv"));
    CHECK(fs::exists(dir / "ok.json"));
    // a perturbation this large breaks the 1/9 bound
    write_file(dir / "big.json", R"({"experiment": "kl", "theta": {"h": 0.3, "sigma_sq": 1, "lambda": 0.5, "pi": 1},
        "n_grid": [16, 32, 64], "r0": 0.5, "output": ")" + (dir / "big") + R"("})");
    CHECK(run("kl --config " + (dir / "big.json")) == 3);
}
