#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace tnice {

using cplx = std::complex<double>;

// Raised when file contents or object shapes disagree with what an operation
// requires (mapped to exit code 3 by the CLI).
struct DataMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a numerical routine breaks down (mapped to exit code 4).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major complex tensor. The shape is fixed at construction; the
// element count always equals the product of the extents.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(std::vector<long> shape);
    DenseTensor(std::vector<long> shape, std::vector<cplx> data);

    long rank() const { return static_cast<long>(shape_.size()); }
    const std::vector<long>& shape() const { return shape_; }
    long extent(long axis) const;
    long size() const { return static_cast<long>(data_.size()); }

    cplx* data() { return data_.data(); }
    const cplx* data() const { return data_.data(); }

    cplx& at(std::initializer_list<long> idx);
    const cplx& at(std::initializer_list<long> idx) const;

    // Row-major linear offset of a multi-index.
    long offset(const std::vector<long>& idx) const;

    DenseTensor permuted(const std::vector<long>& perm) const;
    DenseTensor reshaped(std::vector<long> shape) const;
    DenseTensor conjugated() const;
    double norm() const;

private:
    std::vector<long> shape_;
    std::vector<cplx> data_;
};

// Contracts the paired axes of a and b. The result carries the unpaired axes
// of a (in order) followed by the unpaired axes of b (in order). Paired axes
// must have matching extents.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<long>& axes_a, const std::vector<long>& axes_b);

std::string shape_string(const std::vector<long>& shape);

} // namespace tnice
