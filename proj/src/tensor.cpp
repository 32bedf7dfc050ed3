#include "tnice/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tnice {

namespace {

long checked_product(const std::vector<long>& shape) {
    long total = 1;
    for (long e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + std::to_string(e));
        if (total > (1L << 46) / e) throw std::invalid_argument("tensor too large: " + shape_string(shape));
        total *= e;
    }
    return total;
}

std::vector<long> row_major_strides(const std::vector<long>& shape) {
    std::vector<long> strides(shape.size());
    long acc = 1;
    for (long i = static_cast<long>(shape.size()) - 1; i >= 0; --i) {
        strides[i] = acc;
        acc *= shape[i];
    }
    return strides;
}

} // namespace

std::string shape_string(const std::vector<long>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
}

DenseTensor::DenseTensor(std::vector<long> shape)
    : shape_(std::move(shape)), data_(checked_product(shape_)) {}

DenseTensor::DenseTensor(std::vector<long> shape, std::vector<cplx> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_product(shape_) != static_cast<long>(data_.size()))
        throw std::invalid_argument("tensor data length does not match shape " + shape_string(shape_));
}

long DenseTensor::extent(long axis) const {
    if (axis < 0 || axis >= rank())
        throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for rank " +
                                    std::to_string(rank()));
    return shape_[axis];
}

long DenseTensor::offset(const std::vector<long>& idx) const {
    if (static_cast<long>(idx.size()) != rank())
        throw std::invalid_argument("index rank mismatch");
    long off = 0;
    for (long i = 0; i < rank(); ++i) {
        if (idx[i] < 0 || idx[i] >= shape_[i])
            throw std::invalid_argument("index out of range on axis " + std::to_string(i));
        off = off * shape_[i] + idx[i];
    }
    return off;
}

cplx& DenseTensor::at(std::initializer_list<long> idx) {
    return data_[offset(std::vector<long>(idx))];
}

const cplx& DenseTensor::at(std::initializer_list<long> idx) const {
    return data_[offset(std::vector<long>(idx))];
}

DenseTensor DenseTensor::permuted(const std::vector<long>& perm) const {
    if (static_cast<long>(perm.size()) != rank())
        throw std::invalid_argument("permutation rank mismatch");
    std::vector<bool> seen(perm.size(), false);
    std::vector<long> new_shape(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] < 0 || perm[i] >= rank() || seen[perm[i]])
            throw std::invalid_argument("invalid permutation");
        seen[perm[i]] = true;
        new_shape[i] = shape_[perm[i]];
    }
    DenseTensor out(new_shape);
    if (size() == 0) return out;

    std::vector<long> in_strides = row_major_strides(shape_);
    // Stride of output axis i in the input buffer.
    std::vector<long> gather(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) gather[i] = in_strides[perm[i]];

    std::vector<long> counter(perm.size(), 0);
    long in_off = 0;
    const long total = size();
    const long r = rank();
    for (long o = 0; o < total; ++o) {
        out.data_[o] = data_[in_off];
        for (long ax = r - 1; ax >= 0; --ax) {
            in_off += gather[ax];
            if (++counter[ax] < new_shape[ax]) break;
            counter[ax] = 0;
            in_off -= gather[ax] * new_shape[ax];
        }
    }
    return out;
}

DenseTensor DenseTensor::reshaped(std::vector<long> shape) const {
    if (checked_product(shape) != size())
        throw std::invalid_argument("reshape from " + shape_string(shape_) + " to " +
                                    shape_string(shape) + " changes element count");
    DenseTensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
}

DenseTensor DenseTensor::conjugated() const {
    DenseTensor out = *this;
    for (auto& v : out.data_) v = std::conj(v);
    return out;
}

double DenseTensor::norm() const {
    double acc = 0;
    for (const auto& v : data_) acc += std::norm(v);
    return std::sqrt(acc);
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<long>& axes_a, const std::vector<long>& axes_b) {
    if (axes_a.size() != axes_b.size())
        throw std::invalid_argument("contract: paired axis lists differ in length");

    std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
    for (std::size_t i = 0; i < axes_a.size(); ++i) {
        long ax = axes_a[i], bx = axes_b[i];
        if (ax < 0 || ax >= a.rank() || bx < 0 || bx >= b.rank())
            throw std::invalid_argument("contract: axis out of range");
        if (used_a[ax] || used_b[bx])
            throw std::invalid_argument("contract: duplicate axis");
        used_a[ax] = used_b[bx] = true;
        if (a.extent(ax) != b.extent(bx))
            throw std::invalid_argument("contract: extent mismatch on pair (" + std::to_string(ax) +
                                        "," + std::to_string(bx) + "): " + std::to_string(a.extent(ax)) +
                                        " vs " + std::to_string(b.extent(bx)));
    }

    std::vector<long> free_a, free_b;
    for (long i = 0; i < a.rank(); ++i)
        if (!used_a[i]) free_a.push_back(i);
    for (long i = 0; i < b.rank(); ++i)
        if (!used_b[i]) free_b.push_back(i);

    std::vector<long> perm_a = free_a;
    perm_a.insert(perm_a.end(), axes_a.begin(), axes_a.end());
    std::vector<long> perm_b(axes_b);
    perm_b.insert(perm_b.end(), free_b.begin(), free_b.end());

    DenseTensor pa = a.permuted(perm_a);
    DenseTensor pb = b.permuted(perm_b);

    long m = 1, k = 1, n = 1;
    for (long ax : free_a) m *= a.extent(ax);
    for (long ax : axes_a) k *= a.extent(ax);
    for (long ax : free_b) n *= b.extent(ax);

    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> ma(pa.data(), m, k);
    Eigen::Map<const RowMat> mb(pb.data(), k, n);

    std::vector<long> out_shape;
    for (long ax : free_a) out_shape.push_back(a.extent(ax));
    for (long ax : free_b) out_shape.push_back(b.extent(ax));
    if (out_shape.empty()) out_shape.push_back(1);
    DenseTensor out(out_shape);
    Eigen::Map<RowMat> mo(out.data(), m, n);
    mo.noalias() = ma * mb;
    return out;
}

} // namespace tnice
