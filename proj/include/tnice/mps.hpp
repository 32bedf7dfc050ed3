#pragma once

#include "tnice/tensor.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace tnice {

// Matrix product state. Site tensors are rank-3 with axes
// (left bond, physical, right bond); boundary bonds have extent 1.
class Mps {
public:
    Mps() = default;
    explicit Mps(std::vector<DenseTensor> sites);

    long n() const { return static_cast<long>(sites_.size()); }
    long phys(long i) const { return sites_[i].extent(1); }
    // bond(i) sits between sites i-1 and i; bond(0) == bond(n) == 1.
    long bond(long i) const;
    long max_bond() const;

    const DenseTensor& site(long i) const { return sites_[i]; }
    DenseTensor& site(long i) { return sites_[i]; }

    std::optional<long> canonical_center() const { return center_; }
    void set_canonical_center(std::optional<long> c) { center_ = c; }

    void validate() const;

private:
    std::vector<DenseTensor> sites_;
    std::optional<long> center_;
};

// Matrix product operator. Site tensors are rank-4 with axes
// (left bond, physical out, physical in, right bond); boundary bonds 1.
class Mpo {
public:
    Mpo() = default;
    explicit Mpo(std::vector<DenseTensor> sites);

    long n() const { return static_cast<long>(sites_.size()); }
    long phys_out(long i) const { return sites_[i].extent(1); }
    long phys_in(long i) const { return sites_[i].extent(2); }
    long bond(long i) const;
    long max_bond() const;

    const DenseTensor& site(long i) const { return sites_[i]; }
    DenseTensor& site(long i) { return sites_[i]; }

    void validate() const;

private:
    std::vector<DenseTensor> sites_;
};

// Brings m into mixed canonical form about `center` via QR sweeps. The
// represented vector is unchanged; bond extents may shrink to the local
// isometry rank.
Mps canonize(Mps m, long center);

// <a|b> with the convention that a is conjugated.
cplx inner(const Mps& a, const Mps& b);

// Exact MPO application; output bond extents are products of the inputs'.
Mps apply_mpo(const Mpo& op, const Mps& v);

// <bra| op |ket>.
cplx expect(const Mps& bra, const Mpo& op, const Mps& ket);

// SVD compression to bond <= chi_max, discarding singular values below
// cutoff * (largest singular value on that bond). Returns the compressed MPS
// and the 2-norm estimate of the discarded weight, sqrt(sum of dropped s^2).
std::pair<Mps, double> compress(Mps m, long chi_max, double cutoff);

Mps add(const Mps& a, const Mps& b);
Mps scaled(Mps m, cplx factor);

// All entries i.i.d. standard normal (real). Bond extents are
// min(chi, s^i, s^(n-i)). Reproducible for a given seed.
Mps random_mps(long n, long s, long chi, std::uint64_t seed);

// Compresses an MPO by fusing its physical pair into one index and running
// MPS compression.
std::pair<Mpo, double> compress_mpo(const Mpo& op, long chi_max, double cutoff);

} // namespace tnice
