#pragma once

#include "tnice/mps.hpp"

namespace tnice {

// Reconstruction coefficients omega as an MPS over outcome indices. Site
// tensors are exactly real; construction checks that any imaginary parts are
// numerical noise and then clears them.
class EstimatorMps {
public:
    EstimatorMps() = default;
    explicit EstimatorMps(Mps m, double imag_tol = 1e-10);

    const Mps& mps() const { return mps_; }
    Mps& mps() { return mps_; }
    long n() const { return mps_.n(); }

    // omega at one outcome string.
    double value(const std::vector<std::uint16_t>& outcome) const;

    bool is_real() const;

private:
    Mps mps_;
};

} // namespace tnice
