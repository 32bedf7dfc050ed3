#include "tnice/povm.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>

namespace tnice {

namespace {

const double kSqrt2 = std::sqrt(2.0);

Eigen::Matrix2cd pauli(int a) {
    Eigen::Matrix2cd m;
    const cplx i(0, 1);
    switch (a) {
        case 0: m << 1, 0, 0, 1; break;
        case 1: m << 0, 1, 1, 0; break;
        case 2: m << 0, -i, i, 0; break;
        default: m << 1, 0, 0, -1; break;
    }
    return m;
}

void validate_local(const std::vector<Eigen::Matrix2cd>& effects) {
    if (effects.empty()) throw std::invalid_argument("POVM needs at least one effect");
    Eigen::Matrix2cd sum = Eigen::Matrix2cd::Zero();
    for (std::size_t k = 0; k < effects.size(); ++k) {
        const auto& e = effects[k];
        if ((e - e.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("POVM effect " + std::to_string(k) + " is not Hermitian");
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(e);
        if (es.eigenvalues().minCoeff() < -1e-12)
            throw std::invalid_argument("POVM effect " + std::to_string(k) +
                                        " is not positive semidefinite");
        sum += e;
    }
    if ((sum - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("POVM effects do not sum to the identity");
}

} // namespace

LocalPovm::LocalPovm(std::vector<Eigen::Matrix2cd> effects, std::vector<std::string> labels)
    : effects_(std::move(effects)), labels_(std::move(labels)) {
    validate_local(effects_);
    if (labels_.size() != effects_.size())
        throw std::invalid_argument("POVM label count does not match effect count");
}

ProductPovm::ProductPovm(std::vector<LocalPovm> sites) : sites_(std::move(sites)) {
    if (sites_.empty()) throw std::invalid_argument("product POVM needs at least one site");
}

ProductPovm::ProductPovm(long n, const LocalPovm& site) {
    if (n < 1) throw std::invalid_argument("product POVM needs at least one site");
    sites_.assign(n, site);
}

std::vector<long> ProductPovm::outcome_extents() const {
    std::vector<long> out(n());
    for (long i = 0; i < n(); ++i) out[i] = s(i);
    return out;
}

bool ProductPovm::uniform_s() const {
    for (long i = 1; i < n(); ++i)
        if (s(i) != s(0)) return false;
    return true;
}

LocalPovm pauli6() {
    auto proj = [](const Eigen::Vector2cd& v) -> Eigen::Matrix2cd {
        return (v * v.adjoint()) / 3.0;
    };
    const cplx i(0, 1);
    const double r = 1.0 / kSqrt2;
    std::vector<Eigen::Matrix2cd> effects = {
        proj({1, 0}),          proj({0, 1}),           // Z+, Z-
        proj({r, r}),          proj({r, -r}),          // X+, X-
        proj({r, i * r}),      proj({r, -i * r}),      // Y+, Y-
    };
    return LocalPovm(std::move(effects), {"Z+", "Z-", "X+", "X-", "Y+", "Y-"});
}

Eigen::Vector4d vectorize_effect(const Eigen::Matrix2cd& e, double herm_tol) {
    if ((e - e.adjoint()).cwiseAbs().maxCoeff() > herm_tol)
        throw std::invalid_argument("vectorize_effect: operator is not Hermitian");
    Eigen::Vector4d v;
    for (int a = 0; a < 4; ++a) v(a) = ((e * pauli(a)).trace() / kSqrt2).real();
    return v;
}

Eigen::Matrix2cd unvectorize_effect(const Eigen::Vector4d& v) {
    Eigen::Matrix2cd e = Eigen::Matrix2cd::Zero();
    for (int a = 0; a < 4; ++a) e += v(a) * pauli(a) / kSqrt2;
    return e;
}

Mpo effect_mpo(const ProductPovm& p) {
    std::vector<DenseTensor> sites;
    sites.reserve(p.n());
    for (long i = 0; i < p.n(); ++i) {
        const auto& loc = p.site(i);
        DenseTensor t({1, 4, loc.s(), 1});
        for (long k = 0; k < loc.s(); ++k) {
            Eigen::Vector4d v = vectorize_effect(loc.effect(k));
            for (long a = 0; a < 4; ++a) t.at({0, a, k, 0}) = v(a);
        }
        sites.push_back(std::move(t));
    }
    return Mpo(std::move(sites));
}

Eigen::Matrix4d frame_operator(const LocalPovm& p) {
    Eigen::Matrix4d f = Eigen::Matrix4d::Zero();
    for (long k = 0; k < p.s(); ++k) {
        Eigen::Vector4d v = vectorize_effect(p.effect(k));
        f += v * v.transpose();
    }
    return f;
}

bool is_informationally_complete(const LocalPovm& p, double tol) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(frame_operator(p));
    return es.eigenvalues().minCoeff() > tol;
}

std::vector<Eigen::Matrix2cd> canonical_duals(const LocalPovm& p, bool allow_non_ic) {
    Eigen::Matrix4d f = frame_operator(p);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(f);
    const auto& ev = es.eigenvalues();
    const double tol = 1e-10 * ev.maxCoeff();
    if (ev.minCoeff() <= tol && !allow_non_ic)
        throw std::invalid_argument(
            "POVM is not informationally complete (singular frame operator); "
            "pass allow_non_ic to use the pseudo-inverse");
    Eigen::Vector4d inv_ev;
    for (int a = 0; a < 4; ++a) inv_ev(a) = ev(a) > tol ? 1.0 / ev(a) : 0.0;
    Eigen::Matrix4d finv = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
    std::vector<Eigen::Matrix2cd> duals;
    duals.reserve(p.s());
    for (long k = 0; k < p.s(); ++k)
        duals.push_back(unvectorize_effect(finv * vectorize_effect(p.effect(k))));
    return duals;
}

void save_povm(const ProductPovm& p, const std::string& path) {
    nlohmann::json sites = nlohmann::json::array();
    for (long i = 0; i < p.n(); ++i) {
        const auto& loc = p.site(i);
        nlohmann::json labels = nlohmann::json::array();
        nlohmann::json effects = nlohmann::json::array();
        for (long k = 0; k < loc.s(); ++k) {
            labels.push_back(loc.label(k));
            Eigen::Vector4d v = vectorize_effect(loc.effect(k));
            effects.push_back({v(0), v(1), v(2), v(3)});
        }
        sites.push_back({{"labels", labels}, {"effects_ptm", effects}});
    }
    nlohmann::json j = {{"version", "povm-v1"}, {"sites", sites}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataMismatchError("cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

ProductPovm load_povm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataMismatchError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataMismatchError(path + ": invalid JSON: " + e.what());
    }
    if (j.value("version", "") != "povm-v1")
        throw DataMismatchError(path + ": expected version povm-v1");
    std::vector<LocalPovm> sites;
    for (const auto& js : j.at("sites")) {
        std::vector<Eigen::Matrix2cd> effects;
        std::vector<std::string> labels = js.at("labels").get<std::vector<std::string>>();
        for (const auto& je : js.at("effects_ptm")) {
            auto coeffs = je.get<std::vector<double>>();
            if (coeffs.size() != 4)
                throw DataMismatchError(path + ": effect PTM vector must have length 4");
            effects.push_back(unvectorize_effect(Eigen::Vector4d(coeffs.data())));
        }
        sites.emplace_back(std::move(effects), std::move(labels));
    }
    return ProductPovm(std::move(sites));
}

} // namespace tnice
