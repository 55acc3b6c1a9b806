#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("sindex_cli_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Result {
    int code;
    std::string out, err;
};

/// Runs the CLI with the given arguments, capturing both streams.
Result cli(const TempDir& tmp, const std::string& args, const std::string& stdin_file = "")
{
    const fs::path out = tmp.path / "stdout.txt", err = tmp.path / "stderr.txt";
    std::string cmd = std::string(SINDEX_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    if (!stdin_file.empty()) cmd += " <" + stdin_file;
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::string> sorted_names(const fs::path& dir)
{
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

const std::string small_sim = "simulate --model 1 --p 20 --s0 3 --m 4 --n-batch 80 --seed 11";

} // namespace

TEST_CASE("simulate writes batches and a manifest deterministically")
{
    TempDir tmp;
    const fs::path a = tmp.path / "a", b = tmp.path / "b";
    REQUIRE(cli(tmp, small_sim + " --out " + a.string()).code == 0);
    REQUIRE(cli(tmp, small_sim + " --out " + b.string()).code == 0);
    const auto names = sorted_names(a);
    REQUIRE(names.size() == 5);
    CHECK(names.back() == "manifest.json");
    for (const auto& n : names) CHECK(slurp(a / n) == slurp(b / n));

    std::ifstream first(a / names.front());
    std::string header, row;
    std::getline(first, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 20);
    int rows = 0;
    while (std::getline(first, row)) rows += !row.empty();
    CHECK(rows == 80);

    const Result again = cli(tmp, small_sim + " --out " + a.string());
    CHECK(again.code != 0);
    CHECK(again.err.find("not empty") != std::string::npos);
    CHECK(cli(tmp, small_sim + " --force --out " + a.string()).code == 0);

    const fs::path one = tmp.path / "one";
    REQUIRE(cli(tmp, "simulate --m 1 --p 20 --s0 3 --n-batch 50 --out " + one.string()).code == 0);
    CHECK(sorted_names(one).size() == 2);
}

TEST_CASE("fit reports only at the requested steps and resumes identically")
{
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(cli(tmp, small_sim + " --out " + data.string()).code == 0);

    const fs::path full = tmp.path / "full";
    Result r = cli(tmp, "fit --input " + data.string() + " --infer-at 2,4 --out " + full.string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto names = sorted_names(full);
    CHECK(names == std::vector<std::string>{"manifest.json", "report_step_00002.json", "report_step_00004.json",
                                            "run.jsonl"});

    // interrupted run over the first two batches, then continue over the whole directory
    const fs::path half = tmp.path / "half";
    fs::create_directories(half);
    const auto data_names = sorted_names(data);
    for (int i = 0; i < 2; ++i) fs::copy_file(data / data_names[i], half / data_names[i]);
    fs::copy_file(data / "manifest.json", half / "manifest.json");
    const fs::path part = tmp.path / "part", state = tmp.path / "state.bin";
    r = cli(tmp, "fit --input " + half.string() + " --infer-at 2,4 --save-state " + state.string() + " --out " +
                     part.string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = cli(tmp, "fit --input " + data.string() + " --infer-at 2,4 --resume " + state.string() + " --out " +
                     part.string() + " --force");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(part / "report_step_00004.json") == slurp(full / "report_step_00004.json"));
    CHECK(slurp(part / "run.jsonl") == slurp(full / "run.jsonl"));

    // logistic loss on continuous responses fails in the loss domain check
    r = cli(tmp, "fit --input " + data.string() + " --loss logistic --out " + (tmp.path / "bad").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("domain") != std::string::npos);
}

TEST_CASE("fit reads blank-line separated batches from standard input")
{
    TempDir tmp;
    const fs::path data = tmp.path / "data";
    REQUIRE(cli(tmp, small_sim + " --out " + data.string()).code == 0);
    const fs::path piped = tmp.path / "piped.txt";
    {
        std::ofstream out(piped);
        for (const auto& n : sorted_names(data)) {
            if (n == "manifest.json") continue;
            out << slurp(data / n) << "\n";
        }
    }
    const fs::path a = tmp.path / "a", b = tmp.path / "b";
    REQUIRE(cli(tmp, "fit --input " + data.string() + " --infer-at 4 --out " + a.string()).code == 0);
    const Result r = cli(tmp, "fit --input - --infer-at 4 --out " + b.string(), piped.string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(a / "report_step_00004.json") == slurp(b / "report_step_00004.json"));
}

TEST_CASE("metrics needs the truth and consistent dimensions")
{
    TempDir tmp;
    const fs::path data = tmp.path / "data", run = tmp.path / "run";
    REQUIRE(cli(tmp, small_sim + " --out " + data.string()).code == 0);
    REQUIRE(cli(tmp, "fit --input " + data.string() + " --infer-at 2,4 --out " + run.string()).code == 0);

    Result r = cli(tmp, "metrics --runs " + run.string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::istringstream table(r.out);
    std::string header, row;
    std::getline(table, header);
    CHECK(header == "step,replications,collapsed,sine_distance_ave,sine_distance_debiased,fpr,tpr1,tpr2,tpr3");
    std::vector<std::string> rows;
    while (std::getline(table, row)) rows.push_back(row);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].rfind("2,1,", 0) == 0);
    CHECK(rows[1].rfind("4,1,", 0) == 0);
    // one replication: every rate is 0 or 1
    for (const auto& line : rows) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        for (std::size_t c = 6; c < cells.size(); ++c) CHECK((cells[c] == "0" || cells[c] == "1"));
    }

    fs::remove(run / "manifest.json");
    r = cli(tmp, "metrics --runs " + run.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("manifest") != std::string::npos);

    const fs::path other = tmp.path / "other";
    REQUIRE(cli(tmp, "simulate --p 25 --s0 3 --m 1 --n-batch 10 --out " + other.string()).code == 0);
    fs::copy_file(other / "manifest.json", run / "manifest.json");
    r = cli(tmp, "metrics --runs " + run.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("p=") != std::string::npos);
}

TEST_CASE("metrics drives replications itself")
{
    TempDir tmp;
    const Result r = cli(tmp, "metrics --replications 2 --work-dir " + (tmp.path / "w").string() +
                                  " --model 1 --p 20 --s0 3 --m 3 --n-batch 80 --infer-at 3 --csv " +
                                  (tmp.path / "t.csv").string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const std::string table = slurp(tmp.path / "t.csv");
    CHECK(table.find("\n3,2,") != std::string::npos);
}

TEST_CASE("usage errors exit nonzero")
{
    TempDir tmp;
    CHECK(cli(tmp, "").code != 0);
    CHECK(cli(tmp, "simulate").code != 0);
    CHECK(cli(tmp, "fit --input " + (tmp.path / "missing").string() + " --out " + (tmp.path / "o").string()).code ==
          1);
    CHECK(cli(tmp, "fit --input - --set nonsense --out " + (tmp.path / "o2").string()).code == 1);
}
