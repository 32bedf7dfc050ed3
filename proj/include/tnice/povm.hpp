#pragma once

#include "tnice/mps.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tnice {

// Single-site POVM on a qubit: Hermitian PSD effects that sum to the
// identity. Effects are stored as dense 2x2 matrices alongside their labels.
class LocalPovm {
public:
    LocalPovm(std::vector<Eigen::Matrix2cd> effects, std::vector<std::string> labels);

    long s() const { return static_cast<long>(effects_.size()); }
    const Eigen::Matrix2cd& effect(long k) const { return effects_.at(k); }
    const std::string& label(long k) const { return labels_.at(k); }

private:
    std::vector<Eigen::Matrix2cd> effects_;
    std::vector<std::string> labels_;
};

// Site-wise product POVM; sites may carry different local POVMs.
class ProductPovm {
public:
    explicit ProductPovm(std::vector<LocalPovm> sites);
    // Homogeneous product of n copies of one local POVM.
    ProductPovm(long n, const LocalPovm& site);

    long n() const { return static_cast<long>(sites_.size()); }
    const LocalPovm& site(long i) const { return sites_.at(i); }
    long s(long i) const { return sites_.at(i).s(); }
    std::vector<long> outcome_extents() const;
    bool uniform_s() const;

private:
    std::vector<LocalPovm> sites_;
};

// The six-outcome single-qubit POVM built from scaled eigenprojectors of
// Z, X, Y in the order Z+, Z-, X+, X-, Y+, Y-.
LocalPovm pauli6();

// Coefficients of a Hermitian 2x2 operator over the normalized Pauli basis
// (I, X, Y, Z)/sqrt(2), i.e. Tr[e P]/sqrt(2). Throws on a non-Hermitian
// input.
Eigen::Vector4d vectorize_effect(const Eigen::Matrix2cd& e, double herm_tol = 1e-12);

// Restores the operator from its normalized-Pauli coefficients.
Eigen::Matrix2cd unvectorize_effect(const Eigen::Vector4d& v);

// MPO whose physical-out index runs over the operator basis (extent 4) and
// physical-in index over outcomes (extent s per site). Column k of the
// densified map is the vectorized product effect. Product POVMs give bond
// extent 1.
Mpo effect_mpo(const ProductPovm& p);

// F = sum_k |pi_k>><<pi_k| for one site.
Eigen::Matrix4d frame_operator(const LocalPovm& p);

bool is_informationally_complete(const LocalPovm& p, double tol = 1e-10);

// Duals D_k = F^+ (pi_k). When F is singular the POVM is not
// informationally complete; that requires allow_non_ic, otherwise an error
// is raised.
std::vector<Eigen::Matrix2cd> canonical_duals(const LocalPovm& p, bool allow_non_ic = false);

void save_povm(const ProductPovm& p, const std::string& path);
ProductPovm load_povm(const std::string& path);

} // namespace tnice
