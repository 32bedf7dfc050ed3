#include "tnice/state.hpp"

#include "tnice/rng.hpp"

#include <complex>
#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/SVD>

#include <cmath>

namespace tnice {

namespace {

const double kSqrt2 = std::sqrt(2.0);

Eigen::Matrix2cd pauli_matrix(int a) {
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

} // namespace

void StateMps::validate() const {
    mps.validate();
    for (long i = 0; i < mps.n(); ++i)
        if (mps.phys(i) != 2)
            throw DataMismatchError("state MPS must have physical extent 2 at every site");
    double nrm2 = inner(mps, mps).real();
    if (std::abs(nrm2 - 1.0) > 1e-10)
        throw DataMismatchError("state MPS is not normalized: <psi|psi> = " +
                                std::to_string(nrm2));
}

StateMps ghz(long n) {
    if (n < 2) throw std::invalid_argument("ghz: need n >= 2");
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    {
        DenseTensor t({1, 2, 2});
        t.at({0, 0, 0}) = 1.0 / kSqrt2;
        t.at({0, 1, 1}) = 1.0 / kSqrt2;
        sites.push_back(std::move(t));
    }
    for (long i = 1; i + 1 < n; ++i) {
        DenseTensor t({2, 2, 2});
        t.at({0, 0, 0}) = 1.0;
        t.at({1, 1, 1}) = 1.0;
        sites.push_back(std::move(t));
    }
    {
        DenseTensor t({2, 2, 1});
        t.at({0, 0, 0}) = 1.0;
        t.at({1, 1, 0}) = 1.0;
        sites.push_back(std::move(t));
    }
    return StateMps{Mps(std::move(sites))};
}

StateMps zeros(long n) {
    if (n < 1) throw std::invalid_argument("zeros: need n >= 1");
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    for (long i = 0; i < n; ++i) {
        DenseTensor t({1, 2, 1});
        t.at({0, 0, 0}) = 1.0;
        sites.push_back(std::move(t));
    }
    return StateMps{Mps(std::move(sites))};
}

StateMps dense_to_mps(const Eigen::VectorXcd& psi, long n, double cutoff) {
    if (n < 1 || psi.size() != (1L << n))
        throw DataMismatchError("dense_to_mps: state length does not match qubit count");
    using Mat = Eigen::MatrixXcd;
    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    std::vector<DenseTensor> sites;
    sites.reserve(n);
    long left = 1;
    // Remaining amplitudes, viewed row-major as (left * 2, rest).
    RowMat rest = Eigen::Map<const RowMat>(psi.data(), 1, psi.size());
    for (long i = 0; i + 1 < n; ++i) {
        const long rows = left * 2;
        const long cols = rest.size() / rows;
        RowMat a = Eigen::Map<const RowMat>(rest.data(), rows, cols);
        Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        long keep = 0;
        for (long j = 0; j < sv.size(); ++j)
            if (sv(j) > cutoff * sv(0)) ++keep;
        keep = std::max(1L, keep);
        Mat u = svd.matrixU().leftCols(keep);
        RowMat carry = sv.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).adjoint();
        DenseTensor t({left, 2, keep});
        Eigen::Map<RowMat>(t.data(), rows, keep) = u;
        sites.push_back(std::move(t));
        left = keep;
        rest = carry;
    }
    DenseTensor last({left, 2, 1});
    Eigen::Map<RowMat>(last.data(), left, 2) = Eigen::Map<const RowMat>(rest.data(), left, 2);
    sites.push_back(std::move(last));
    Mps m(std::move(sites));
    double nrm = std::sqrt(std::abs(inner(m, m).real()));
    if (nrm == 0) throw NumericalError("dense_to_mps: zero state");
    m = scaled(std::move(m), 1.0 / nrm);
    return StateMps{std::move(m)};
}

Eigen::VectorXcd mps_to_dense(const StateMps& s) {
    const long n = s.mps.n();
    if (n > 20) throw std::invalid_argument("mps_to_dense: too many sites");
    // Accumulate left-to-right: amp (prefix, bond).
    Eigen::MatrixXcd amp(1, 1);
    amp(0, 0) = 1.0;
    for (long i = 0; i < n; ++i) {
        const auto& t = s.mps.site(i);
        const long bl = t.extent(0), br = t.extent(2);
        Eigen::MatrixXcd next(amp.rows() * 2, br);
        using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const RowMat> m(t.data(), bl, 2 * br);
        for (long p = 0; p < 2; ++p)
            for (long r = 0; r < br; ++r)
                next.col(r).segment(p * amp.rows(), amp.rows()) =
                    amp * m.col(p * br + r);
        // Reorder so site bits are most-significant-first.
        Eigen::MatrixXcd fixed(next.rows(), br);
        const long half = amp.rows();
        for (long b = 0; b < half; ++b)
            for (long p = 0; p < 2; ++p) fixed.row(b * 2 + p) = next.row(p * half + b);
        amp = std::move(fixed);
    }
    return Eigen::VectorXcd(Eigen::Map<Eigen::VectorXcd>(amp.data(), amp.rows()));
}

StateMps ground_state_dense(const PauliSum& h, double* energy) {
    const long n = h.n();
    if (n > 12) throw std::invalid_argument("ground_state_dense: guarded to n <= 12");
    const long dim = 1L << n;
    // Dense Hermitian matrix, column-major for LAPACK.
    std::vector<cplx> mat(static_cast<std::size_t>(dim) * dim, cplx(0));
    Eigen::VectorXcd basis = Eigen::VectorXcd::Zero(dim);
    for (long col = 0; col < dim; ++col) {
        basis.setZero();
        basis(col) = 1.0;
        Eigen::VectorXcd hcol = apply_dense(h, basis);
        for (long row = 0; row < dim; ++row) mat[col * dim + row] = hcol(row);
    }
    std::vector<double> evals(dim);
    int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(dim),
                              reinterpret_cast<lapack_complex_double*>(mat.data()),
                              static_cast<lapack_int>(dim), evals.data());
    if (info != 0)
        throw NumericalError("ground_state_dense: zheevd failed with info " +
                             std::to_string(info));
    if (energy) *energy = evals[0];
    Eigen::VectorXcd gs(dim);
    for (long row = 0; row < dim; ++row) gs(row) = mat[row]; // first eigenvector column
    return dense_to_mps(gs, n);
}

Mps state_to_ptm_mps(const StateMps& s) {
    const long n = s.mps.n();
    std::vector<DenseTensor> out;
    out.reserve(n);
    for (long i = 0; i < n; ++i) {
        const auto& a = s.mps.site(i);
        const long bl = a.extent(0), br = a.extent(2);
        DenseTensor t({bl * bl, 4, br * br});
        for (int c = 0; c < 4; ++c) {
            Eigen::Matrix2cd p = pauli_matrix(c);
            for (long l = 0; l < bl; ++l)
                for (long lp = 0; lp < bl; ++lp)
                    for (long r = 0; r < br; ++r)
                        for (long rp = 0; rp < br; ++rp) {
                            cplx acc = 0;
                            for (int q = 0; q < 2; ++q)
                                for (int qp = 0; qp < 2; ++qp)
                                    acc += a.at({l, q, r}) * std::conj(a.at({lp, qp, rp})) *
                                           p(qp, q) / kSqrt2;
                            t.at({l * bl + lp, c, r * br + rp}) = acc;
                        }
        }
        out.push_back(std::move(t));
    }
    return Mps(std::move(out));
}

StateMps random_state(long n, long chi, std::uint64_t seed) {
    Mps m = random_mps(n, 2, chi, seed);
    // Give the tensors complex parts so generic code paths are exercised.
    Rng rng(seed, 1, Rng::kInit);
    for (long i = 0; i < m.n(); ++i) {
        auto& t = m.site(i);
        for (long j = 0; j < t.size(); ++j) t.data()[j] += cplx(0, rng.normal());
    }
    double nrm = std::sqrt(std::abs(inner(m, m).real()));
    if (nrm == 0) throw NumericalError("random_state: zero norm");
    m = scaled(std::move(m), 1.0 / nrm);
    return StateMps{std::move(m)};
}

} // namespace tnice
