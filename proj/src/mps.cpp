#include "tnice/mps.hpp"

#include "tnice/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace tnice {

namespace {

using Mat = Eigen::MatrixXcd;
using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat as_matrix(const DenseTensor& t, long rows, long cols) {
    return Eigen::Map<const RowMat>(t.data(), rows, cols);
}

DenseTensor from_matrix(const Mat& m, std::vector<long> shape) {
    DenseTensor t(std::move(shape));
    Eigen::Map<RowMat>(t.data(), m.rows(), m.cols()) = m;
    return t;
}

// Thin QR: a (r x c) = q (r x k) * rfac (k x c) with k = min(r, c).
void thin_qr(const Mat& a, Mat& q, Mat& rfac) {
    const long k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Mat> qr(a);
    q = qr.householderQ() * Mat::Identity(a.rows(), k);
    rfac = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

} // namespace

Mps::Mps(std::vector<DenseTensor> sites) : sites_(std::move(sites)) { validate(); }

long Mps::bond(long i) const {
    if (i == 0 || i == n()) return 1;
    return sites_[i].extent(0);
}

long Mps::max_bond() const {
    long b = 1;
    for (long i = 0; i <= n(); ++i) b = std::max(b, bond(i));
    return b;
}

void Mps::validate() const {
    if (sites_.empty()) throw std::invalid_argument("MPS must have at least one site");
    for (long i = 0; i < n(); ++i) {
        if (sites_[i].rank() != 3)
            throw DataMismatchError("MPS site " + std::to_string(i) + " has rank " +
                                    std::to_string(sites_[i].rank()) + ", expected 3");
        if (i > 0 && sites_[i - 1].extent(2) != sites_[i].extent(0))
            throw DataMismatchError("MPS bond mismatch between sites " + std::to_string(i - 1) +
                                    " and " + std::to_string(i));
    }
    if (sites_.front().extent(0) != 1 || sites_.back().extent(2) != 1)
        throw DataMismatchError("MPS boundary bonds must have extent 1");
}

Mpo::Mpo(std::vector<DenseTensor> sites) : sites_(std::move(sites)) { validate(); }

long Mpo::bond(long i) const {
    if (i == 0 || i == n()) return 1;
    return sites_[i].extent(0);
}

long Mpo::max_bond() const {
    long b = 1;
    for (long i = 0; i <= n(); ++i) b = std::max(b, bond(i));
    return b;
}

void Mpo::validate() const {
    if (sites_.empty()) throw std::invalid_argument("MPO must have at least one site");
    for (long i = 0; i < n(); ++i) {
        if (sites_[i].rank() != 4)
            throw DataMismatchError("MPO site " + std::to_string(i) + " has rank " +
                                    std::to_string(sites_[i].rank()) + ", expected 4");
        if (i > 0 && sites_[i - 1].extent(3) != sites_[i].extent(0))
            throw DataMismatchError("MPO bond mismatch between sites " + std::to_string(i - 1) +
                                    " and " + std::to_string(i));
    }
    if (sites_.front().extent(0) != 1 || sites_.back().extent(3) != 1)
        throw DataMismatchError("MPO boundary bonds must have extent 1");
}

Mps canonize(Mps m, long center) {
    const long n = m.n();
    if (center < 0 || center >= n)
        throw std::invalid_argument("canonical center " + std::to_string(center) +
                                    " out of range for " + std::to_string(n) + " sites");
    // Left-to-right QR up to the center.
    for (long i = 0; i < center; ++i) {
        const auto& t = m.site(i);
        const long bl = t.extent(0), d = t.extent(1), br = t.extent(2);
        Mat a = as_matrix(t, bl * d, br);
        Mat q, r;
        thin_qr(a, q, r);
        const long k = q.cols();
        m.site(i) = from_matrix(q, {bl, d, k});
        const auto& nxt = m.site(i + 1);
        Mat nm = as_matrix(nxt, br, nxt.extent(1) * nxt.extent(2));
        m.site(i + 1) = from_matrix(r * nm, {k, nxt.extent(1), nxt.extent(2)});
    }
    // Right-to-left: QR on the transpose gives the right isometry.
    for (long i = n - 1; i > center; --i) {
        const auto& t = m.site(i);
        const long bl = t.extent(0), d = t.extent(1), br = t.extent(2);
        Mat a = as_matrix(t, bl, d * br);
        Mat q, r;
        thin_qr(a.transpose(), q, r);
        const long k = q.cols();
        m.site(i) = from_matrix(q.transpose(), {k, d, br});
        const auto& prv = m.site(i - 1);
        Mat pm = as_matrix(prv, prv.extent(0) * prv.extent(1), bl);
        m.site(i - 1) = from_matrix(pm * r.transpose(), {prv.extent(0), prv.extent(1), k});
    }
    m.set_canonical_center(center);
    return m;
}

cplx inner(const Mps& a, const Mps& b) {
    if (a.n() != b.n()) throw DataMismatchError("inner: site count mismatch");
    DenseTensor env({1, 1});
    env.at({0, 0}) = 1.0;
    for (long i = 0; i < a.n(); ++i) {
        if (a.phys(i) != b.phys(i))
            throw DataMismatchError("inner: physical extent mismatch at site " + std::to_string(i));
        // env (la, lb); a-site conj (la, p, ra); b-site (lb, p, rb)
        DenseTensor t = contract(env, a.site(i).conjugated(), {0}, {0}); // (lb, p, ra)
        env = contract(t, b.site(i), {0, 1}, {0, 1});                    // (ra, rb)
    }
    return env.at({0, 0});
}

Mps apply_mpo(const Mpo& op, const Mps& v) {
    if (op.n() != v.n()) throw DataMismatchError("apply_mpo: site count mismatch");
    std::vector<DenseTensor> out;
    out.reserve(v.n());
    for (long i = 0; i < v.n(); ++i) {
        if (op.phys_in(i) != v.phys(i))
            throw DataMismatchError("apply_mpo: physical extent mismatch at site " +
                                    std::to_string(i));
        // W (lw, po, pi, rw) with V (lv, pi, rv) -> (lw, po, rw, lv, rv)
        DenseTensor t = contract(op.site(i), v.site(i), {2}, {1});
        t = t.permuted({0, 3, 1, 2, 4}); // (lw, lv, po, rw, rv)
        const long lw = t.extent(0), lv = t.extent(1), po = t.extent(2), rw = t.extent(3),
                   rv = t.extent(4);
        out.push_back(t.reshaped({lw * lv, po, rw * rv}));
    }
    return Mps(std::move(out));
}

cplx expect(const Mps& bra, const Mpo& op, const Mps& ket) {
    if (bra.n() != op.n() || ket.n() != op.n())
        throw DataMismatchError("expect: site count mismatch");
    DenseTensor env({1, 1, 1});
    env.at({0, 0, 0}) = 1.0;
    for (long i = 0; i < op.n(); ++i) {
        // env (lb, lw, lk)
        DenseTensor t = contract(env, bra.site(i).conjugated(), {0}, {0}); // (lw, lk, po, rb)
        t = contract(t, op.site(i), {0, 2}, {0, 1});                       // (lk, rb, pi, rw)
        env = contract(t, ket.site(i), {0, 2}, {0, 1});                    // (rb, rw, rk)
    }
    return env.at({0, 0, 0});
}

std::pair<Mps, double> compress(Mps m, long chi_max, double cutoff) {
    if (chi_max < 1) throw std::invalid_argument("compress: chi_max must be >= 1");
    if (cutoff < 0) throw std::invalid_argument("compress: cutoff must be >= 0");
    const long n = m.n();
    m = canonize(std::move(m), 0);
    double discarded2 = 0;
    for (long i = 0; i + 1 < n; ++i) {
        const auto& t = m.site(i);
        const long bl = t.extent(0), d = t.extent(1), br = t.extent(2);
        Mat a = as_matrix(t, bl * d, br);
        Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        long keep = 0;
        const double thresh = sv.size() ? cutoff * sv(0) : 0.0;
        for (long j = 0; j < sv.size(); ++j)
            if (sv(j) > thresh && sv(j) > 0) ++keep;
        keep = std::max(1L, std::min(keep, chi_max));
        for (long j = keep; j < sv.size(); ++j) discarded2 += sv(j) * sv(j);
        Mat u = svd.matrixU().leftCols(keep);
        Mat carry = sv.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).adjoint();
        m.site(i) = from_matrix(u, {bl, d, keep});
        const auto& nxt = m.site(i + 1);
        Mat nm = as_matrix(nxt, br, nxt.extent(1) * nxt.extent(2));
        m.site(i + 1) = from_matrix(carry * nm, {keep, nxt.extent(1), nxt.extent(2)});
    }
    m.set_canonical_center(n - 1);
    return {std::move(m), std::sqrt(discarded2)};
}

Mps add(const Mps& a, const Mps& b) {
    if (a.n() != b.n()) throw DataMismatchError("add: site count mismatch");
    const long n = a.n();
    std::vector<DenseTensor> out;
    out.reserve(n);
    for (long i = 0; i < n; ++i) {
        if (a.phys(i) != b.phys(i))
            throw DataMismatchError("add: physical extent mismatch at site " + std::to_string(i));
        const auto& ta = a.site(i);
        const auto& tb = b.site(i);
        const long d = ta.extent(1);
        const long la = (i == 0) ? 0 : ta.extent(0), lb = (i == 0) ? 0 : tb.extent(0);
        const long ra = (i == n - 1) ? 0 : ta.extent(2), rb = (i == n - 1) ? 0 : tb.extent(2);
        const long bl = (i == 0) ? 1 : la + lb;
        const long br = (i == n - 1) ? 1 : ra + rb;
        DenseTensor t({bl, d, br});
        auto put = [&](const DenseTensor& src, long lo, long ro) {
            for (long l = 0; l < src.extent(0); ++l)
                for (long p = 0; p < d; ++p)
                    for (long r = 0; r < src.extent(2); ++r)
                        t.at({(i == 0) ? 0 : lo + l, p, (i == n - 1) ? 0 : ro + r}) +=
                            src.at({l, p, r});
        };
        put(ta, 0, 0);
        put(tb, la, ra);
        out.push_back(std::move(t));
    }
    return Mps(std::move(out));
}

Mps scaled(Mps m, cplx factor) {
    auto& t = m.site(0);
    for (long i = 0; i < t.size(); ++i) t.data()[i] *= factor;
    m.set_canonical_center(std::nullopt);
    return m;
}

Mps random_mps(long n, long s, long chi, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("random_mps: need n >= 1");
    if (s < 1 || chi < 1) throw std::invalid_argument("random_mps: extents must be >= 1");
    std::vector<long> bonds(n + 1, 1);
    long acc = 1;
    for (long i = 1; i < n; ++i) {
        acc = std::min(acc * s, chi);
        bonds[i] = acc;
    }
    acc = 1;
    for (long i = n - 1; i > 0; --i) {
        acc = std::min(acc * s, chi);
        bonds[i] = std::min(bonds[i], acc);
    }
    Rng rng(seed, 0, Rng::kInit);
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    for (long i = 0; i < n; ++i) {
        DenseTensor t({bonds[i], s, bonds[i + 1]});
        for (long j = 0; j < t.size(); ++j) t.data()[j] = rng.normal();
        sites.push_back(std::move(t));
    }
    return Mps(std::move(sites));
}

std::pair<Mpo, double> compress_mpo(const Mpo& op, long chi_max, double cutoff) {
    std::vector<DenseTensor> fused;
    fused.reserve(op.n());
    for (long i = 0; i < op.n(); ++i) {
        const auto& t = op.site(i);
        fused.push_back(t.reshaped({t.extent(0), t.extent(1) * t.extent(2), t.extent(3)}));
    }
    auto [m, err] = compress(Mps(std::move(fused)), chi_max, cutoff);
    std::vector<DenseTensor> out;
    out.reserve(op.n());
    for (long i = 0; i < op.n(); ++i) {
        const auto& t = m.site(i);
        out.push_back(t.reshaped({t.extent(0), op.phys_out(i), op.phys_in(i), t.extent(2)}));
    }
    return {Mpo(std::move(out)), err};
}

} // namespace tnice
