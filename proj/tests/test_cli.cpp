#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "lcgibbs/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "lcgibbs");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = lcgibbs::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("lcgibbs_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_target(const fs::path& dir) {
    const fs::path p = dir / "g2.json";
    std::ofstream(p) << R"({"type":"gaussian","mean":[0,1],"precision":[[1,0.5],[0.5,1]]})";
    return p;
}

}  // namespace

TEST_CASE("verify t31 writes 100 passing rows") {
    const auto r = run({"verify", "t31", "--dim", "6", "--trials", "100", "--seed", "1", "--out", "-"});
    CHECK(r.code == 0);
    CHECK(count_lines(r.out) == 101);
    CHECK(r.out.rfind("name,lhs,rhs,slack,se,trials,seed,passed\n", 0) == 0);
    CHECK(r.out.find(",false\n") == std::string::npos);
    CHECK(r.err.find("100/100 checks passed") != std::string::npos);
}

TEST_CASE("verify lemma54 and gap") {
    const auto l = run({"verify", "lemma54", "--dim", "4", "--trials", "50"});
    CHECK(l.code == 0);
    CHECK(l.out.find("entropy_triangular_identity") != std::string::npos);

    const auto g = run({"verify", "gap", "--dim", "2", "--rho", "0.5"});
    CHECK(g.code == 0);
    CHECK(g.out.find("gap_accuracy") != std::string::npos);
    CHECK(g.out.find("gap_lower_bound") != std::string::npos);
}

TEST_CASE("verify writes CSV to a file and the summary to stdout") {
    const auto dir = scratch_dir("verify");
    const auto path = dir / "report.csv";
    const auto r = run({"verify", "feasible-start", "--trials", "5", "--out", path.string()});
    CHECK(r.code == 0);
    CHECK(count_lines(slurp(path)) == 11);
    CHECK(r.out.find("checks passed") != std::string::npos);
}

TEST_CASE("verify is deterministic") {
    const auto a = run({"verify", "hr-proj", "--frames", "500", "--seed", "4"});
    const auto b = run({"verify", "hr-proj", "--frames", "500", "--seed", "4"});
    const auto c = run({"verify", "hr-proj", "--frames", "500", "--seed", "5"});
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);
}

TEST_CASE("exit codes") {
    CHECK(run({"verify", "nonsense"}).code == 2);
    CHECK(run({"verify"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"verify", "t31", "--dim", "abc"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"sample", "--target", "/nonexistent.json"}).code == 2);
    const auto bad = run({"verify", "nonsense"});
    CHECK(count_lines(bad.err) == 1);
    CHECK(bad.out.empty());
}

TEST_CASE("sample is deterministic and routes kernels") {
    const auto dir = scratch_dir("sample");
    const auto target = write_target(dir).string();
    const auto a = run({"sample", "--target", target, "--kernel", "gs", "--steps", "1000", "--seed", "7"});
    const auto b = run({"sample", "--target", target, "--kernel", "gs", "--steps", "1000", "--seed", "7"});
    CHECK(a.code == 0);
    CHECK(count_lines(a.out) == 1001);
    CHECK(a.out == b.out);
    CHECK(a.err.empty());

    const auto hr = run({"sample", "--target", target, "--kernel", "hr", "--ell", "1", "--steps", "50"});
    CHECK(hr.code == 0);
    CHECK(count_lines(hr.out) == 51);
    const auto ell2 = run({"sample", "--target", target, "--kernel", "gs-ell", "--ell", "2", "--steps", "5"});
    CHECK(ell2.out.find("\n1,1;2,") != std::string::npos);
    const auto mwg = run({"sample", "--target", target, "--kernel", "mwg-rwm", "--steps", "5"});
    CHECK(mwg.code == 0);

    CHECK(run({"sample", "--target", target, "--kernel", "gs", "--ell", "2"}).code == 2);
    CHECK(run({"sample", "--target", target, "--kernel", "mala"}).code == 2);
    CHECK(run({"sample", "--target", target, "--steps", "0"}).code == 2);
    CHECK(run({"sample", "--target", target, "--replicas", "2"}).code == 2);
}

TEST_CASE("replicas use distinct, reproducible substreams") {
    const auto dir = scratch_dir("replicas");
    const auto target = write_target(dir).string();
    const auto first = dir / "a" / "chain.csv";
    const auto second = dir / "b" / "chain.csv";
    fs::create_directories(first.parent_path());
    fs::create_directories(second.parent_path());
    for (const auto& p : {first, second}) {
        const auto r = run({"sample", "--target", target, "--steps", "200", "--seed", "3", "--replicas", "8", "--out",
                            p.string()});
        CHECK(r.code == 0);
        CHECK(count_lines(r.out) == 8);
    }
    std::vector<std::string> contents;
    for (int k = 0; k < 8; ++k) {
        const std::string name = "chain_r" + std::to_string(k) + ".csv";
        const auto a = slurp(dir / "a" / name);
        CHECK(a == slurp(dir / "b" / name));
        CHECK(count_lines(a) == 201);
        contents.push_back(a);
    }
    std::sort(contents.begin(), contents.end());
    CHECK(std::unique(contents.begin(), contents.end()) == contents.end());
}

TEST_CASE("composite targets through the CLI") {
    const auto dir = scratch_dir("composite");
    const auto path = dir / "lc.json";
    std::ofstream(path) << R"({"type":"logcosh","dim":2})";
    const auto r = run({"sample", "--target", path.string(), "--kernel", "mwg-imh", "--steps", "100"});
    CHECK(r.code == 0);
    CHECK(run({"sample", "--target", path.string(), "--kernel", "hr", "--ell", "2"}).code == 2);
}
