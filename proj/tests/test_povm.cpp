#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tnice/povm.hpp"

#include <cstdio>
#include <string>

using namespace tnice;

TEST_CASE("pauli6 effects match the projector construction") {
    LocalPovm p = pauli6();
    REQUIRE(p.s() == 6);
    auto ref = oracle::pauli6_effects();
    for (long k = 0; k < 6; ++k) CHECK((p.effect(k) - ref[k]).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(p.label(0) == "Z+");
    CHECK(p.label(1) == "Z-");
    CHECK(p.label(2) == "X+");
    CHECK(p.label(3) == "X-");
    CHECK(p.label(4) == "Y+");
    CHECK(p.label(5) == "Y-");
    // completeness
    Eigen::Matrix2cd sum = Eigen::Matrix2cd::Zero();
    for (long k = 0; k < 6; ++k) sum += p.effect(k);
    CHECK((sum - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("local povm construction validates") {
    // not summing to identity
    std::vector<Eigen::Matrix2cd> eff{Eigen::Matrix2cd::Identity() * 0.5,
                                      Eigen::Matrix2cd::Identity() * 0.25};
    CHECK_THROWS_AS(LocalPovm(eff, {"a", "b"}), std::invalid_argument);
    // non-Hermitian
    Eigen::Matrix2cd bad;
    bad << 0, 1, 0, 0;
    CHECK_THROWS_AS(LocalPovm({bad, Eigen::Matrix2cd::Identity() - bad}, {"a", "b"}),
                    std::invalid_argument);
    // negative effect
    Eigen::Matrix2cd neg = -0.1 * Eigen::Matrix2cd::Identity();
    CHECK_THROWS_AS(LocalPovm({neg, Eigen::Matrix2cd::Identity() - neg}, {"a", "b"}),
                    std::invalid_argument);
}

TEST_CASE("vectorized pauli6 effects") {
    LocalPovm p = pauli6();
    const double a = 1.0 / (3.0 * std::sqrt(2.0));
    // columns (I, X, Y, Z) coefficients
    Eigen::Vector4d zp = vectorize_effect(p.effect(0));
    CHECK(zp(0) == doctest::Approx(a).epsilon(1e-14));
    CHECK(zp(3) == doctest::Approx(a).epsilon(1e-14));
    CHECK(std::abs(zp(1)) < 1e-15);
    CHECK(std::abs(zp(2)) < 1e-15);
    Eigen::Vector4d xm = vectorize_effect(p.effect(3));
    CHECK(xm(0) == doctest::Approx(a).epsilon(1e-14));
    CHECK(xm(1) == doctest::Approx(-a).epsilon(1e-14));
    // round trip
    for (long k = 0; k < 6; ++k) {
        Eigen::Matrix2cd back = unvectorize_effect(vectorize_effect(p.effect(k)));
        CHECK((back - p.effect(k)).cwiseAbs().maxCoeff() < 1e-14);
    }
    Eigen::Matrix2cd nh;
    nh << 0, 1, 0, 0;
    CHECK_THROWS_AS(vectorize_effect(nh), std::invalid_argument);
}

TEST_CASE("frame operator of pauli6 is diag(1/3, 1/9, 1/9, 1/9)") {
    Eigen::Matrix4d f = frame_operator(pauli6());
    Eigen::Matrix4d want = Eigen::Matrix4d::Zero();
    want(0, 0) = 1.0 / 3.0;
    want(1, 1) = want(2, 2) = want(3, 3) = 1.0 / 9.0;
    CHECK((f - want).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(is_informationally_complete(pauli6()));
}

TEST_CASE("canonical duals are (I +- 3P)/2") {
    auto duals = canonical_duals(pauli6());
    REQUIRE(duals.size() == 6);
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    const oracle::Mat zz = oracle::pauli(3), xx = oracle::pauli(1), yy = oracle::pauli(2);
    CHECK((duals[0] - (id + 3 * zz) / 2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((duals[1] - (id - 3 * zz) / 2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((duals[2] - (id + 3 * xx) / 2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((duals[3] - (id - 3 * xx) / 2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((duals[4] - (id + 3 * yy) / 2).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((duals[5] - (id - 3 * yy) / 2).cwiseAbs().maxCoeff() < 1e-14);
    // duals reproduce the identity decomposition: sum_k Tr[D_k] pi_k = I
    Eigen::Matrix2cd rec = Eigen::Matrix2cd::Zero();
    LocalPovm p = pauli6();
    for (long k = 0; k < 6; ++k) rec += duals[k].trace() * p.effect(k);
    CHECK((rec - id).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("non-ic povm is rejected unless allowed") {
    // Z-basis projective measurement: spans only diag operators
    Eigen::Matrix2cd z0 = Eigen::Matrix2cd::Zero(), z1 = Eigen::Matrix2cd::Zero();
    z0(0, 0) = 1;
    z1(1, 1) = 1;
    LocalPovm zb({z0, z1}, {"0", "1"});
    CHECK_FALSE(is_informationally_complete(zb));
    CHECK_THROWS_AS(canonical_duals(zb), std::invalid_argument);
    auto duals = canonical_duals(zb, true);
    CHECK(duals.size() == 2);
}

TEST_CASE("effect mpo columns are the vectorized effects") {
    ProductPovm p(2, pauli6());
    Mpo eff = effect_mpo(p);
    CHECK(eff.n() == 2);
    CHECK(eff.max_bond() == 1);
    CHECK(eff.phys_out(0) == 4);
    CHECK(eff.phys_in(0) == 6);
    auto dense = oracle::mpo_dense(eff); // 16 x 36
    auto site_eff = std::vector<std::vector<oracle::Mat>>{oracle::pauli6_effects(),
                                                          oracle::pauli6_effects()};
    // column (k1, k2) equals kron of single-site PTM vectors
    for (long k1 = 0; k1 < 6; ++k1)
        for (long k2 = 0; k2 < 6; ++k2) {
            Eigen::Vector4d v1 = vectorize_effect(site_eff[0][k1]);
            Eigen::Vector4d v2 = vectorize_effect(site_eff[1][k2]);
            for (long a = 0; a < 4; ++a)
                for (long b = 0; b < 4; ++b) {
                    const cplx got = dense(a * 4 + b, k1 * 6 + k2);
                    CHECK(std::abs(got - v1(a) * v2(b)) < 1e-14);
                }
        }
}

TEST_CASE("povm file round trip") {
    ProductPovm p(3, pauli6());
    const std::string path = "test_povm_roundtrip.json";
    save_povm(p, path);
    ProductPovm q = load_povm(path);
    REQUIRE(q.n() == 3);
    for (long i = 0; i < 3; ++i) {
        REQUIRE(q.s(i) == 6);
        for (long k = 0; k < 6; ++k) {
            CHECK(q.site(i).label(k) == p.site(i).label(k));
            CHECK((q.site(i).effect(k) - p.site(i).effect(k)).cwiseAbs().maxCoeff() < 1e-15);
        }
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_povm("no_such_file.json"), DataMismatchError);
}
