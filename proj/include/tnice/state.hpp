#pragma once

#include "tnice/observable.hpp"

#include <Eigen/Dense>

namespace tnice {

// Normalized pure state as an MPS with physical extent 2 per site.
struct StateMps {
    Mps mps;
    void validate() const;
};

// (|0...0> + |1...1>)/sqrt(2); bond extent 2, n >= 2.
StateMps ghz(long n);

// |0...0>.
StateMps zeros(long n);

// Exact MPS for a dense state vector (site 0 = most significant bit).
// Schmidt values below cutoff * largest are dropped.
StateMps dense_to_mps(const Eigen::VectorXcd& psi, long n, double cutoff = 1e-12);

Eigen::VectorXcd mps_to_dense(const StateMps& s);

// Ground state of a Pauli-sum Hamiltonian by dense diagonalization, guarded
// to n <= 12. Degeneracies resolve deterministically to the first
// eigenvector column of the factorization.
StateMps ground_state_dense(const PauliSum& h, double* energy = nullptr);

// Vectorizes rho = |psi><psi| over the normalized Pauli basis: an MPS with
// physical extent 4 and bond extents squared relative to the state.
// <<rho|A>> over such vectors is Tr[rho A].
Mps state_to_ptm_mps(const StateMps& s);

// Random normalized MPS state with the given bond cap, for property tests
// and bias checks.
StateMps random_state(long n, long chi, std::uint64_t seed);

} // namespace tnice
