#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tnice/shadows.hpp"

#include <cmath>

using namespace tnice;

namespace {

// omega_k = Tr[O (x)_i D_{k_i}] from scratch: canonical duals built as
// (I +- 3 P)/2 for the pauli-6 effects.
oracle::Mat dual_matrix(int k) {
    const int axes[3] = {3, 1, 2}; // Z, X, Y order
    const oracle::Mat id = oracle::pauli(0);
    const oracle::Mat p = oracle::pauli(axes[k / 2]);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return (id + sign * 3.0 * p) / 2.0;
}

double enum_omega(const PauliSum& obs, const std::vector<std::uint16_t>& outcome) {
    oracle::Mat d = oracle::Mat::Ones(1, 1);
    for (std::uint16_t k : outcome) d = oracle::kron(d, dual_matrix(k));
    return (oracle::pauli_sum_dense(obs).adjoint() * d).trace().real();
}

} // namespace

TEST_CASE("canonical estimator of a single Z") {
    PauliSum h = parse_hamiltonian("1 Z\n");
    ObservableMps obs = to_mps(h);
    ProductPovm povm(1, pauli6());
    EstimatorMps est = canonical_estimator(obs, povm);
    CHECK(est.is_real());
    // Tr[Z D_k]: Z+, Z- give +-3, the X/Y outcomes give 0
    const double want[6] = {3, -3, 0, 0, 0, 0};
    for (std::uint16_t k = 0; k < 6; ++k)
        CHECK(est.value({k}) == doctest::Approx(want[k]).epsilon(1e-12));
}

TEST_CASE("canonical estimator matches dual traces site by site") {
    PauliSum h = parse_hamiltonian("0.5 XYZ\n-1 ZIZ\n0.25 IIY\n");
    ObservableMps obs = to_mps(h);
    ProductPovm povm(3, pauli6());
    EstimatorMps est = canonical_estimator(obs, povm);
    for (long k = 0; k < 216; ++k) {
        auto d = oracle::digits(k, 6, 3);
        std::vector<std::uint16_t> o(d.begin(), d.end());
        CHECK(est.value(o) == doctest::Approx(enum_omega(h, o)).epsilon(1e-11));
    }
}

TEST_CASE("canonical estimator is unbiased") {
    for (int which = 0; which < 2; ++which) {
        StateMps s = which == 0 ? ghz(3) : random_state(3, 3, 31);
        PauliSum h = parse_hamiltonian("1 ZZI\n0.5 XXX\n-0.75 IYZ\n");
        ObservableMps obs = to_mps(h);
        ProductPovm povm(3, pauli6());
        EstimatorMps est = canonical_estimator(obs, povm);
        ProbabilityModel pm = ProbabilityModel::exact(s, povm);
        const double want = expectation_dense(h, mps_to_dense(s));
        CHECK(mean_value(est, pm) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("second moment of the ghz witness grows as 2 * 3^n") {
    // O = Z on |0>: Z+ has p = 1/3 and omega = 3, Z- has p = 0, the X/Y
    // outcomes have omega = 0, so E[omega^2] = (1/3) * 9 = 3.
    {
        PauliSum h = parse_hamiltonian("1 Z\n");
        EstimatorMps est = canonical_estimator(to_mps(h), ProductPovm(1, pauli6()));
        ProbabilityModel pm = ProbabilityModel::exact(zeros(1), ProductPovm(1, pauli6()));
        CHECK(second_moment(est, pm) == doctest::Approx(3.0).epsilon(1e-12));
    }
    for (long n : {2L, 3L, 4L, 5L, 6L}) {
        std::string text = "1 " + std::string(n, 'X') + "\n-1 " + std::string(n, 'Y') + "\n";
        PauliSum h = parse_hamiltonian(text);
        ProductPovm povm(n, pauli6());
        EstimatorMps est = canonical_estimator(to_mps(h), povm);
        ProbabilityModel pm = ProbabilityModel::exact(ghz(n), povm);
        CHECK(second_moment(est, pm) == doctest::Approx(2.0 * std::pow(3.0, n)).epsilon(1e-10));
    }
}

TEST_CASE("empirical moments converge to exact ones") {
    StateMps s = ghz(3);
    ProductPovm povm(3, pauli6());
    PauliSum h = parse_hamiltonian("1 XXX\n-1 YYY\n"); // n=3: expectation 0
    EstimatorMps est = canonical_estimator(to_mps(h), povm);
    ProbabilityModel ex = ProbabilityModel::exact(s, povm);
    const double m2 = second_moment(est, ex);
    const double m1 = mean_value(est, ex);

    // oracle for the exact numbers: full enumeration over outcomes
    Eigen::VectorXcd psi = mps_to_dense(s);
    double em2 = 0, em1 = 0;
    for (long k = 0; k < 216; ++k) {
        auto d = oracle::digits(k, 6, 3);
        std::vector<std::uint16_t> o(d.begin(), d.end());
        const double p = outcome_probability(s, povm, o);
        const double w = est.value(o);
        em2 += p * w * w;
        em1 += p * w;
    }
    CHECK(m2 == doctest::Approx(em2).epsilon(1e-10));
    CHECK(m1 == doctest::Approx(em1).epsilon(1e-10));

    const long shots = 60000;
    ProbabilityModel em = ProbabilityModel::empirical(sample(s, povm, shots, 123));
    // variance of omega^2 is bounded by max|omega|^4; loose 5 sigma band
    double wmax = 0;
    for (long k = 0; k < 216; ++k) {
        auto d = oracle::digits(k, 6, 3);
        std::vector<std::uint16_t> o(d.begin(), d.end());
        wmax = std::max(wmax, std::abs(est.value(o)));
    }
    const double band2 = 5 * wmax * wmax / std::sqrt(double(shots));
    CHECK(std::abs(second_moment(est, em) - m2) < band2);
    CHECK(std::abs(mean_value(est, em) - m1) < 5 * wmax / std::sqrt(double(shots)));
}

TEST_CASE("estimator realness guard") {
    Mps m = random_mps(2, 6, 2, 4); // real entries: fine
    CHECK_NOTHROW(EstimatorMps{m});
    Mps bad = m;
    bad.site(0).data()[0] += cplx(0, 0.5);
    CHECK_THROWS_AS(EstimatorMps{bad}, DataMismatchError);
}

TEST_CASE("estimator value indexes outcomes correctly") {
    // build a rank-1 estimator with hand-set site vectors and check a few
    // values against the product formula
    std::vector<DenseTensor> sites;
    const double s0[6] = {1, 2, 3, 4, 5, 6};
    const double s1[6] = {0.5, -1, 0, 2, -0.25, 1.5};
    for (const double* v : {s0, s1}) {
        DenseTensor t({1, 6, 1});
        for (long k = 0; k < 6; ++k) t.at({0, k, 0}) = v[k];
        sites.push_back(std::move(t));
    }
    EstimatorMps est{Mps(std::move(sites))};
    for (std::uint16_t a = 0; a < 6; ++a)
        for (std::uint16_t b = 0; b < 6; ++b)
            CHECK(est.value({a, b}) == doctest::Approx(s0[a] * s1[b]).epsilon(1e-14));
    CHECK_THROWS_AS(est.value({0}), DataMismatchError);
    CHECK_THROWS_AS(est.value({0, 6}), DataMismatchError);
}
