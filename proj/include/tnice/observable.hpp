#pragma once

#include "tnice/mps.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tnice {

// One Pauli word with a real coefficient; op codes 0..3 = I, X, Y, Z.
struct PauliString {
    double coeff = 0.0;
    std::vector<int> ops;
};

// Sum of Pauli strings on n sites. Duplicate words are merged on
// construction; exactly-cancelling terms are dropped.
class PauliSum {
public:
    PauliSum(long n, std::vector<PauliString> terms);

    long n() const { return n_; }
    const std::vector<PauliString>& terms() const { return terms_; }

    static std::string word(const PauliString& t);

private:
    long n_;
    std::vector<PauliString> terms_;
};

// Parses the Hamiltonian text format: one `<coeff> <pauli word>` pair per
// line, `#` starts a comment, blank lines ignored. All words must have equal
// length. Errors carry the offending line number.
PauliSum parse_hamiltonian(const std::string& text);
PauliSum load_hamiltonian(const std::string& path);
std::string format_hamiltonian(const PauliSum& o);

// Observable vectorized over the normalized Pauli basis, physical extent 4
// per site. norm2 caches the Hilbert-Schmidt norm of the represented
// operator; truncation_error reports the weight discarded by compression.
struct ObservableMps {
    Mps mps;
    double norm2 = 0.0;
    double truncation_error = 0.0;
};

// Builds the vectorized MPS by iterative add-and-compress over the terms.
ObservableMps to_mps(const PauliSum& o, long chi_max = 256, double cutoff = 1e-14);

// <psi| O |psi> for a dense state vector; guarded to n <= 12.
double expectation_dense(const PauliSum& o, const Eigen::VectorXcd& psi);

// Applies O to a dense state vector (same guard).
Eigen::VectorXcd apply_dense(const PauliSum& o, const Eigen::VectorXcd& psi);

} // namespace tnice
