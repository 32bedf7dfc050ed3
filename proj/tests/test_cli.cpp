#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tnice/optimizer.hpp"
#include "tnice/stats.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace tnice;

namespace {

const std::string kCli = TNICE_CLI_PATH;
const std::string kDir = "/tmp/tnice_cli_test";

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >" + kDir + "/stdout.txt 2>" + kDir +
                            "/stderr.txt";
    int st = std::system(cmd.c_str());
    REQUIRE(st != -1);
    return WIFEXITED(st) ? WEXITSTATUS(st) : -2;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

struct Setup {
    Setup() {
        std::system(("rm -rf " + kDir + " && mkdir -p " + kDir).c_str());
        write_file(kDir + "/ghz3.ham", "1 XXX\n-1 YYY\n");
    }
};
const Setup setup_once;

} // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run("sample --shots 10") == 2);                       // missing --out
    CHECK(run("optimize --obs x.ham") == 2);                    // missing --out
    CHECK(run("nonsense") == 2);
    CHECK(run("sample --state ghz --shots 10 --out " + kDir + "/x.jsonl") == 2); // no --n
    CHECK(run("optimize --obs " + kDir + "/ghz3.ham --state ghz --train t.jsonl --out " + kDir +
              "/x.json") == 2); // exact and empirical at once
}

TEST_CASE("missing input files exit 3") {
    CHECK(run("optimize --obs " + kDir + "/absent.ham --state ghz --out " + kDir + "/x.json") ==
          3);
    CHECK(run("estimate --est " + kDir + "/absent.json --data " + kDir +
              "/absent.jsonl --out " + kDir + "/r.json") == 3);
}

TEST_CASE("sample is deterministic per seed") {
    const std::string base = "sample --state ghz --n 3 --shots 50 --seed 7 --out " + kDir;
    CHECK(run(base + "/a.jsonl") == 0);
    CHECK(run(base + "/b.jsonl") == 0);
    CHECK(slurp(kDir + "/a.jsonl") == slurp(kDir + "/b.jsonl"));
    CHECK(run("sample --state ghz --n 3 --shots 50 --seed 8 --out " + kDir + "/c.jsonl") == 0);
    CHECK(slurp(kDir + "/a.jsonl") != slurp(kDir + "/c.jsonl"));

    OutcomeDataset ds = load_dataset(kDir + "/a.jsonl");
    CHECK(ds.n == 3);
    CHECK(ds.size() == 50);
    CHECK(ds.seed == 7);
}

TEST_CASE("optimize with zero sweeps reproduces the canonical estimator") {
    const std::string cmd = "optimize --obs " + kDir + "/ghz3.ham --state ghz --n 3 "
                            "--init canonical --sweeps 0 --chi 8 --out " + kDir + "/can.json";
    CHECK(run(cmd) == 0);
    auto [est, meta] = load_estimator(kDir + "/can.json");
    ObservableMps obs = to_mps(load_hamiltonian(kDir + "/ghz3.ham"));
    EstimatorMps want = canonical_estimator(obs, ProductPovm(3, pauli6()));
    for (long k = 0; k < 216; ++k) {
        std::vector<std::uint16_t> o{std::uint16_t(k / 36), std::uint16_t((k / 6) % 6),
                                     std::uint16_t(k % 6)};
        CHECK(est.value(o) == doctest::Approx(want.value(o)).epsilon(1e-10));
    }
    CHECK(meta["sweeps_done"] == 0);
    CHECK(meta["observable"].get<std::string>().find("ghz3.ham") != std::string::npos);

    // byte-identical re-run
    CHECK(run("optimize --obs " + kDir + "/ghz3.ham --state ghz --n 3 --init canonical "
              "--sweeps 0 --chi 8 --out " + kDir + "/can2.json") == 0);
    CHECK(slurp(kDir + "/can.json") == slurp(kDir + "/can2.json"));
}

TEST_CASE("exact-mode training run writes estimator, meta and trace") {
    const std::string cmd = "optimize --obs " + kDir + "/ghz3.ham --state ghz --n 3 "
                            "--lambda 0.999 --chi 4 --sweeps 6 --seed 1 --out " + kDir +
                            "/tr.json --trace " + kDir + "/tr.csv";
    CHECK(run(cmd) == 0);
    auto [est, meta] = load_estimator(kDir + "/tr.json");
    CHECK(est.n() == 3);
    CHECK(meta["lambda"] == 0.999);
    CHECK(meta["stop_reason"].is_string());
    CHECK(meta["second_moment"].get<double>() < 60.0); // canonical is 2*27 = 54
    CHECK(meta["penalty"].get<double>() < 0.1);

    std::istringstream trace(slurp(kDir + "/tr.csv"));
    std::string header;
    std::getline(trace, header);
    CHECK(header == "sweep,site,second_moment,penalty,cost");
    long rows = 0;
    for (std::string line; std::getline(trace, line);) ++rows;
    CHECK(rows >= 6); // at least one record per site per pass
}

TEST_CASE("empirical training against sampled data") {
    REQUIRE(run("sample --state ghz --n 3 --shots 400 --seed 3 --out " + kDir + "/train.jsonl") ==
            0);
    REQUIRE(run("sample --state ghz --n 3 --shots 400 --seed 4 --out " + kDir + "/test.jsonl") ==
            0);
    const std::string cmd = "optimize --obs " + kDir + "/ghz3.ham --train " + kDir +
                            "/train.jsonl --test " + kDir + "/test.jsonl --patience 2 "
                            "--lambda 0.999 --chi 4 --sweeps 8 --init canonical --out " + kDir +
                            "/emp.json";
    CHECK(run(cmd) == 0);
    auto [est, meta] = load_estimator(kDir + "/emp.json");
    CHECK(meta.contains("test_second_moment"));
    // trained test moment can not exceed the canonical baseline, which the
    // early stopper uses as its starting best
    ObservableMps obs = to_mps(load_hamiltonian(kDir + "/ghz3.ham"));
    EstimatorMps can = canonical_estimator(obs, ProductPovm(3, pauli6()));
    ProbabilityModel tm = ProbabilityModel::empirical(load_dataset(kDir + "/test.jsonl"));
    CHECK(meta["test_second_moment"].get<double>() <=
          second_moment(can, tm) * (1 + 1e-9) + 1e-9);
}

TEST_CASE("estimate produces a rep-v1 report consistent with the library") {
    REQUIRE(run("estimate --est " + kDir + "/emp.json --data " + kDir + "/test.jsonl --out " +
                kDir + "/rep.json") == 0);
    nlohmann::json rep = nlohmann::json::parse(slurp(kDir + "/rep.json"));
    CHECK(rep["version"] == "rep-v1");
    CHECK(rep["kind"] == "sample_mean");
    CHECK(rep["S"] == 400);

    auto [est, meta] = load_estimator(kDir + "/emp.json");
    std::vector<double> vals = evaluate(est, load_dataset(kDir + "/test.jsonl"));
    EstimateReport want = sample_mean_report(vals, meta["penalty"].get<double>());
    CHECK(rep["mean"].get<double>() == doctest::Approx(want.mean).epsilon(1e-12));
    CHECK(rep["variance"].get<double>() == doctest::Approx(want.variance).epsilon(1e-12));
    CHECK(rep["stderr"].get<double>() == doctest::Approx(want.std_error).epsilon(1e-12));
    CHECK(rep["penalty"].get<double>() == doctest::Approx(want.penalty).epsilon(1e-12));

    // --mom 1 collapses to the sample mean
    REQUIRE(run("estimate --est " + kDir + "/emp.json --data " + kDir + "/test.jsonl --mom 1 "
                "--out " + kDir + "/rep_mom1.json") == 0);
    nlohmann::json rm = nlohmann::json::parse(slurp(kDir + "/rep_mom1.json"));
    CHECK(rm["kind"] == "median_of_means");
    CHECK(rm["clusters"] == 1);
    CHECK(rm["mean"].get<double>() == doctest::Approx(want.mean).epsilon(1e-12));

    // --delta attaches a bound
    REQUIRE(run("estimate --est " + kDir + "/emp.json --data " + kDir + "/test.jsonl "
                "--delta 0.5 --out " + kDir + "/rep_b.json") == 0);
    nlohmann::json rb = nlohmann::json::parse(slurp(kDir + "/rep_b.json"));
    REQUIRE(!rb["bound"].is_null());
    CHECK(rb["bound"]["delta"] == 0.5);
    GuaranteeBound gb = chebyshev_bound(want.variance, want.shots, want.penalty, 0.5);
    CHECK(rb["bound"]["value"].get<double>() == doctest::Approx(gb.value).epsilon(1e-12));
}

TEST_CASE("estimate recomputes the penalty from the observable when asked") {
    REQUIRE(run("estimate --est " + kDir + "/emp.json --data " + kDir + "/test.jsonl --obs " +
                kDir + "/ghz3.ham --out " + kDir + "/rep_obs.json") == 0);
    nlohmann::json rep = nlohmann::json::parse(slurp(kDir + "/rep_obs.json"));
    auto [est, meta] = load_estimator(kDir + "/emp.json");
    CHECK(rep["penalty"].get<double>() ==
          doctest::Approx(meta["penalty"].get<double>()).epsilon(1e-9));
}

TEST_CASE("bond scan writes per-chi estimators and a summary") {
    const std::string cmd = "optimize --obs " + kDir + "/ghz3.ham --state ghz --n 3 "
                            "--chi 2,4 --scan --sweeps 5 --seed 2 --out " + kDir + "/scan.json";
    CHECK(run(cmd) == 0);
    std::istringstream csv(slurp(kDir + "/scan.scan.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "chi,second_moment,penalty,cost");
    std::vector<double> pen;
    for (std::string line; std::getline(csv, line);) {
        std::istringstream ls(line);
        std::string chi, sm, p, c;
        std::getline(ls, chi, ',');
        std::getline(ls, sm, ',');
        std::getline(ls, p, ',');
        std::getline(ls, c, ',');
        pen.push_back(std::stod(p));
    }
    REQUIRE(pen.size() == 2);
    CHECK(pen[1] <= pen[0] + 1e-6); // larger bond can only reconstruct better here

    auto [e2, m2] = load_estimator(kDir + "/scan.chi2.json");
    auto [e4, m4] = load_estimator(kDir + "/scan.chi4.json");
    CHECK(e2.mps().max_bond() <= 2);
    CHECK(e4.mps().max_bond() <= 4);
}

TEST_CASE("compare table lists observable, canonical and trained rows") {
    REQUIRE(run("compare --obs " + kDir + "/ghz3.ham --state ghz --n 3 --est " + kDir +
                "/tr.json --out " + kDir + "/cmp.csv") == 0);
    std::istringstream csv(slurp(kDir + "/cmp.csv"));
    std::string header, row_obs, row_can, row_tr;
    std::getline(csv, header);
    CHECK(header == "estimator,variance,penalty,mean,stderr");
    REQUIRE(std::getline(csv, row_obs));
    REQUIRE(std::getline(csv, row_can));
    REQUIRE(std::getline(csv, row_tr));
    CHECK(row_obs.substr(0, 11) == "observable,");
    CHECK(row_can.substr(0, 10) == "canonical,");
    CHECK(row_tr.substr(0, 8) == "trained,");

    // canonical E[w^2] on ghz(3) is 2*27 = 54, <O> = 1, so variance 53
    std::istringstream ls(row_can);
    std::string name, var, p, mean;
    std::getline(ls, name, ',');
    std::getline(ls, var, ',');
    std::getline(ls, p, ',');
    std::getline(ls, mean, ',');
    CHECK(std::stod(var) == doctest::Approx(53.0).epsilon(1e-9));
    CHECK(std::stod(mean) == doctest::Approx(1.0).epsilon(1e-9));
}
