#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tnice/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <string>

using namespace tnice;

namespace {

std::string tmp_path(const char* name) {
    return std::string("/tmp/tnice_test_") + name;
}

// full outcome distribution by densifying, for small n
std::vector<double> enumerate_probs(const StateMps& state, const ProductPovm& povm) {
    Eigen::VectorXcd psi = mps_to_dense(state);
    const long n = state.mps.n();
    const long s = povm.site(0).s();
    long total = 1;
    for (long i = 0; i < n; ++i) total *= s;
    std::vector<double> p(total);
    for (long k = 0; k < total; ++k) {
        auto d = oracle::digits(k, s, n);
        oracle::Mat e = oracle::Mat::Ones(1, 1);
        for (long i = 0; i < n; ++i) e = oracle::kron(e, oracle::Mat(povm.site(i).effect(d[i])));
        p[k] = (psi.adjoint() * (e * psi)).real()(0, 0);
    }
    return p;
}

} // namespace

TEST_CASE("single qubit pauli-6 probabilities for |0>") {
    StateMps z = zeros(1);
    ProductPovm povm = ProductPovm(1, pauli6());
    // order Z+, Z-, X+, X-, Y+, Y-: (1/3, 0, 1/6, 1/6, 1/6, 1/6)
    const double want[6] = {1.0 / 3, 0.0, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
    for (std::uint16_t k = 0; k < 6; ++k)
        CHECK(outcome_probability(z, povm, {k}) == doctest::Approx(want[k]).epsilon(1e-14));
}

TEST_CASE("probability mpo diagonal enumerates the distribution") {
    StateMps s = random_state(3, 3, 7);
    ProductPovm povm = ProductPovm(3, pauli6());
    Mpo pm = probability_mpo(s, povm);
    CHECK(pm.n() == 3);
    CHECK(pm.phys_out(0) == 6);
    auto want = enumerate_probs(s, povm);
    // read the diagonal by contracting with basis vectors
    double sum = 0;
    for (long k = 0; k < 216; ++k) {
        auto d = oracle::digits(k, 6, 3);
        std::vector<std::uint16_t> o(d.begin(), d.end());
        const double got = outcome_probability(s, povm, o);
        CHECK(got == doctest::Approx(want[k]).epsilon(1e-10));
        CHECK(got > -1e-12);
        sum += got;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    // diagonal entries of the mpo match too
    oracle::Mat dense = oracle::mpo_dense(pm);
    for (long k = 0; k < 216; ++k) CHECK(std::abs(dense(k, k) - want[k]) < 1e-11);
}

TEST_CASE("sampling is reproducible and respects shot substreams") {
    StateMps s = ghz(4);
    ProductPovm povm = ProductPovm(4, pauli6());
    OutcomeDataset a = sample(s, povm, 200, 5);
    OutcomeDataset b = sample(s, povm, 200, 5);
    OutcomeDataset c = sample(s, povm, 50, 5);
    OutcomeDataset d = sample(s, povm, 200, 6);
    REQUIRE(a.size() == 200);
    CHECK(a.shots == b.shots);
    // a prefix of the shot range is identical: shot i depends only on (seed, i)
    for (long i = 0; i < 50; ++i) CHECK(a.shots[i] == c.shots[i]);
    CHECK(a.shots != d.shots);
    a.validate();
}

TEST_CASE("sampled frequencies match exact probabilities") {
    StateMps s = random_state(3, 2, 13);
    ProductPovm povm = ProductPovm(3, pauli6());
    auto p = enumerate_probs(s, povm);
    const long shots = 40000;
    OutcomeDataset ds = sample(s, povm, shots, 99);
    std::vector<long> counts(216, 0);
    for (const auto& shot : ds.shots) {
        long k = 0;
        for (long i = 0; i < 3; ++i) k = k * 6 + shot[i];
        ++counts[k];
    }
    // 5 sigma binomial band per outcome
    for (long k = 0; k < 216; ++k) {
        const double sd = std::sqrt(std::max(p[k] * (1 - p[k]) / shots, 1e-12));
        CHECK(std::abs(counts[k] / double(shots) - p[k]) < 5 * sd + 1e-9);
    }
}

TEST_CASE("dataset file round trip is exact") {
    StateMps s = ghz(3);
    ProductPovm povm = ProductPovm(3, pauli6());
    OutcomeDataset ds = sample(s, povm, 64, 17);
    const std::string path = tmp_path("ds.jsonl");
    save_dataset(ds, path);
    OutcomeDataset back = load_dataset(path);
    CHECK(back.n == ds.n);
    CHECK(back.s == ds.s);
    CHECK(back.seed == ds.seed);
    CHECK(back.shots == ds.shots);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_dataset(tmp_path("missing.jsonl")), DataMismatchError);
}

TEST_CASE("dedup preserves the empirical distribution") {
    StateMps s = ghz(2);
    ProductPovm povm = ProductPovm(2, pauli6());
    OutcomeDataset ds = sample(s, povm, 500, 3);
    DedupShots dd = dedup(ds);
    CHECK(dd.total == 500);
    std::map<std::vector<std::uint16_t>, long> counts;
    for (const auto& shot : ds.shots) counts[shot]++;
    REQUIRE(dd.outcomes.size() == counts.size());
    double wsum = 0;
    for (std::size_t u = 0; u < dd.outcomes.size(); ++u) {
        CHECK(dd.weights[u] == doctest::Approx(counts[dd.outcomes[u]] / 500.0).epsilon(1e-15));
        wsum += dd.weights[u];
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("probability model accessors are mode gated") {
    StateMps s = ghz(2);
    ProductPovm povm = ProductPovm(2, pauli6());
    ProbabilityModel ex = ProbabilityModel::exact(s, povm);
    CHECK(ex.mode() == ProbabilityModel::Mode::Exact);
    CHECK(ex.n() == 2);
    CHECK(ex.outcome_extents() == std::vector<long>{6, 6});
    CHECK_NOTHROW(ex.prob_mpo());
    CHECK_THROWS_AS(ex.dataset(), std::logic_error);
    CHECK_THROWS_AS(ex.dedup_shots(), std::logic_error);

    ProbabilityModel em = ProbabilityModel::empirical(sample(s, povm, 10, 1));
    CHECK(em.mode() == ProbabilityModel::Mode::Empirical);
    CHECK(em.dataset().size() == 10);
    CHECK(em.dedup_shots().total == 10);
    CHECK_THROWS_AS(em.state(), std::logic_error);
    CHECK_THROWS_AS(em.prob_mpo(), std::logic_error);
}

TEST_CASE("dataset validation") {
    OutcomeDataset ds;
    ds.n = 2;
    ds.s = {6, 6};
    ds.shots = {{0, 1}, {5, 5}};
    CHECK_NOTHROW(ds.validate());
    ds.shots.push_back({6, 0}); // out of range
    CHECK_THROWS_AS(ds.validate(), DataMismatchError);
    ds.shots.pop_back();
    ds.shots.push_back({1}); // wrong arity
    CHECK_THROWS_AS(ds.validate(), DataMismatchError);
}
