#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
    std::string cmd = std::string(XFEROPS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("classify: the cosine-filter verdicts land as published") {
    fs::path dir = fresh_dir("xferops_cli_classify");
    REQUIRE(run("classify --op ex2m2 --measure lebesgue --seed 1 --out " + dir.string()) == 0);
    json j = json::parse(slurp(dir / "classify_s1.json"));
    CHECK(j["L"].get<bool>());
    CHECK_FALSE(j["L1"].get<bool>());
    CHECK(j["Fix"].get<bool>());
    CHECK_FALSE(j["K1"].get<bool>());
}

TEST_CASE("ergodic: weight-one fixture keeps a flat norm column") {
    fs::path dir = fresh_dir("xferops_cli_ergodic");
    REQUIRE(run("ergodic --op ex2m1 --measure lebesgue --N 100 --seed 1 --out " + dir.string()) ==
            0);
    std::istringstream csv(slurp(dir / "ergodic_s1.csv"));
    std::string line;
    std::getline(csv, line); // header
    int rows = 0;
    while (std::getline(csv, line)) {
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 + 1);
        double norm = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
        ++rows;
    }
    CHECK(rows == 100);
}

TEST_CASE("run all twice with one seed: byte-identical reports") {
    fs::path a = fresh_dir("xferops_cli_all_a");
    fs::path b = fresh_dir("xferops_cli_all_b");
    REQUIRE(run("all --seed 42 --grid-level 10 --n-paths 2000 --out " + a.string()) == 0);
    REQUIRE(run("all --seed 42 --grid-level 10 --n-paths 2000 --out " + b.string()) == 0);
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        fs::path other = b / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
        ++compared;
    }
    CHECK(compared >= 8);
}

TEST_CASE("usage and failure exit codes") {
    fs::path dir = fresh_dir("xferops_cli_err");
    CHECK(run("classify --op no_such_op --out " + dir.string()) == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("--help") == 0);
}

TEST_CASE("operator descriptors: the cli consumes a json file") {
    fs::path dir = fresh_dir("xferops_cli_desc");
    fs::path desc = dir / "op.json";
    {
        std::ofstream out(desc);
        out << R"({"kind":"haar_doubling"})";
    }
    REQUIRE(run("classify --op " + desc.string() + " --measure lebesgue --seed 3 --out " +
                dir.string()) == 0);
    json j = json::parse(slurp(dir / "classify_s3.json"));
    CHECK(j["op"]["kind"] == "haar_doubling");
    CHECK(j["L1"].get<bool>());
}

TEST_CASE("config file feeds defaults, flags win, env wins over flags") {
    fs::path dir = fresh_dir("xferops_cli_cfg");
    fs::path cfgfile = dir / "run.cfg";
    {
        std::ofstream out(cfgfile);
        out << "seed=5\n";
        out << "grid-level=8\n";
    }
    REQUIRE(run("classify --op ex2m1 --config " + cfgfile.string() + " --out " + dir.string()) ==
            0);
    CHECK(fs::exists(dir / "classify_s5.json"));

    // a flag beats the config file
    REQUIRE(run("classify --op ex2m1 --config " + cfgfile.string() + " --seed 6 --out " +
                dir.string()) == 0);
    CHECK(fs::exists(dir / "classify_s6.json"));

    // the environment beats the flag
    std::string cmd = std::string("XFEROPS_SEED=7 ") + XFEROPS_CLI_PATH +
                      " classify --op ex2m1 --seed 6 --out " + dir.string() + " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(fs::exists(dir / "classify_s7.json"));
}
