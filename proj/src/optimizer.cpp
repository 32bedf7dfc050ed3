#include "tnice/optimizer.hpp"

#include "tnice/rng.hpp"

#include <complex>
#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace tnice {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;

DenseTensor trivial_env() {
    DenseTensor t({1, 1, 1});
    t.at({0, 0, 0}) = 1.0;
    return t;
}

// --- three-layer environment pushes -------------------------------------
// Environments carry axes (bond_bra, bond_op, bond_ket). The bra and ket
// layers are both the (real) estimator for the a/b networks.

DenseTensor push_left_op(const DenseTensor& env, const DenseTensor& op_site,
                         const DenseTensor& w_site) {
    DenseTensor t = contract(env, w_site.conjugated(), {0}, {0}); // (m, l', p, r)
    t = contract(t, op_site, {0, 2}, {0, 1});                     // (l', r, pi, m')
    return contract(t, w_site, {0, 2}, {0, 1});                   // (r, m', r')
}

DenseTensor push_right_op(const DenseTensor& env, const DenseTensor& op_site,
                          const DenseTensor& w_site) {
    DenseTensor t = contract(w_site.conjugated(), env, {2}, {0}); // (l, p, m, r')
    t = contract(t, op_site, {1, 2}, {1, 3});                     // (l, r', ml, pi)
    return contract(t, w_site, {1, 3}, {2, 1});                   // (l, ml, l')
}

// v network: bra observable (phys 4), effect MPO (4 -> s), ket estimator.
DenseTensor push_left_v(const DenseTensor& env, const DenseTensor& obs_site,
                        const DenseTensor& eff_site, const DenseTensor& w_site) {
    DenseTensor t = contract(env, obs_site.conjugated(), {0}, {0}); // (lE, lw, a, rO)
    t = contract(t, eff_site, {0, 2}, {0, 1});                      // (lw, rO, k, rE)
    return contract(t, w_site, {0, 2}, {0, 1});                     // (rO, rE, rw)
}

DenseTensor push_right_v(const DenseTensor& env, const DenseTensor& obs_site,
                         const DenseTensor& eff_site, const DenseTensor& w_site) {
    DenseTensor t = contract(obs_site.conjugated(), env, {2}, {0}); // (lO, a, rE, rw)
    t = contract(t, eff_site, {1, 2}, {1, 3});                      // (lO, rw, lE, k)
    return contract(t, w_site, {1, 3}, {2, 1});                     // (lO, lE, lw)
}

// --- local-system assembly -----------------------------------------------

long flat_index(long l, long k, long r, long s, long cr) { return (l * s + k) * cr + r; }

// b with bond-1 operator environments: kron(L, G, R).
Mat assemble_b_kron(const DenseTensor& envl, const DenseTensor& gsite, const DenseTensor& envr) {
    const long cl = envl.extent(0), cr = envr.extent(0), s = gsite.extent(1);
    Mat lm(cl, cl), rm(cr, cr), gm(s, s);
    for (long i = 0; i < cl; ++i)
        for (long j = 0; j < cl; ++j) lm(i, j) = envl.at({i, 0, j}).real();
    for (long i = 0; i < cr; ++i)
        for (long j = 0; j < cr; ++j) rm(i, j) = envr.at({i, 0, j}).real();
    for (long k = 0; k < s; ++k)
        for (long kp = 0; kp < s; ++kp) gm(k, kp) = gsite.at({0, k, kp, 0}).real();
    const long dim = cl * s * cr;
    Mat b(dim, dim);
    for (long l = 0; l < cl; ++l)
        for (long lp = 0; lp < cl; ++lp)
            for (long k = 0; k < s; ++k)
                for (long kp = 0; kp < s; ++kp) {
                    const double f = lm(l, lp) * gm(k, kp);
                    for (long r = 0; r < cr; ++r)
                        for (long rp = 0; rp < cr; ++rp)
                            b(flat_index(l, k, r, s, cr), flat_index(lp, kp, rp, s, cr)) =
                                f * rm(r, rp);
                }
    return b;
}

// Generic dense assembly for operators with bond > 1 (used for b only when
// the POVM is given in MPO form with nontrivial bonds).
Mat assemble_op_generic(const DenseTensor& envl, const DenseTensor& op_site,
                        const DenseTensor& envr) {
    DenseTensor t = contract(envl, op_site, {1}, {0});  // (l, l', k, k', mr)
    t = contract(t, envr, {4}, {1});                    // (l, l', k, k', r, r')
    t = t.permuted({0, 2, 4, 1, 3, 5});                 // (l, k, r, l', k', r')
    const long dim = t.extent(0) * t.extent(1) * t.extent(2);
    Mat out(dim, dim);
    for (long i = 0; i < dim; ++i)
        for (long j = 0; j < dim; ++j) out(i, j) = t.data()[i * dim + j].real();
    return out;
}

// a for an outcome-diagonal model operator (the probability MPO): assembled
// block by block to avoid a side^2 complex intermediate.
Mat assemble_a_diag(const DenseTensor& envl, const DenseTensor& op_site, const DenseTensor& envr) {
    const long cl = envl.extent(0), cr = envr.extent(0);
    const long m = op_site.extent(0), s = op_site.extent(1), mp = op_site.extent(3);
    const long dim = cl * s * cr;
    // envl (l, m, l') -> matrix ((l,l') x m); envr (r, m', r') -> ((r,r') x m')
    CMat lmat(cl * cl, m), rmat(cr * cr, mp);
    for (long l = 0; l < cl; ++l)
        for (long lp = 0; lp < cl; ++lp)
            for (long q = 0; q < m; ++q) lmat(l * cl + lp, q) = envl.at({l, q, lp});
    for (long r = 0; r < cr; ++r)
        for (long rp = 0; rp < cr; ++rp)
            for (long q = 0; q < mp; ++q) rmat(r * cr + rp, q) = envr.at({r, q, rp});
    Mat a = Mat::Zero(dim, dim);
    CMat wk(m, mp), blk;
    for (long k = 0; k < s; ++k) {
        for (long q = 0; q < m; ++q)
            for (long qp = 0; qp < mp; ++qp) wk(q, qp) = op_site.at({q, k, k, qp});
        blk.noalias() = lmat * wk * rmat.transpose(); // ((l,l') x (r,r'))
        for (long l = 0; l < cl; ++l)
            for (long lp = 0; lp < cl; ++lp)
                for (long r = 0; r < cr; ++r)
                    for (long rp = 0; rp < cr; ++rp)
                        a(flat_index(l, k, r, s, cr), flat_index(lp, k, rp, s, cr)) =
                            blk(l * cl + lp, r * cr + rp).real();
    }
    return a;
}

Vec assemble_v(const DenseTensor& envl, const DenseTensor& obs_site, const DenseTensor& eff_site,
               const DenseTensor& envr) {
    DenseTensor t = contract(envl, obs_site.conjugated(), {0}, {0}); // (lE, lw, a, rO)
    t = contract(t, eff_site, {0, 2}, {0, 1});                       // (lw, rO, k, rE)
    t = contract(t, envr, {1, 3}, {0, 1});                           // (lw, k, rw)
    Vec v(t.size());
    for (long i = 0; i < t.size(); ++i) v(i) = t.data()[i].real();
    return v;
}

// --- per-shot environment stacks (empirical mode and test monitoring) ----

Mat slice_real(const DenseTensor& t, long k) {
    const long bl = t.extent(0), br = t.extent(2);
    Mat w(bl, br);
    for (long l = 0; l < bl; ++l)
        for (long r = 0; r < br; ++r) w(l, r) = t.at({l, k, r}).real();
    return w;
}

struct ShotStacks {
    const DedupShots* dd = nullptr;
    std::vector<std::vector<std::vector<long>>> part; // [site][k] -> dedup indices
    std::vector<Mat> left, right;                     // left[i] covers < i, right[i] covers > i

    long count() const { return dd ? static_cast<long>(dd->outcomes.size()) : 0; }

    void init_partition(const std::vector<long>& extents) {
        const long n = static_cast<long>(extents.size());
        part.assign(n, {});
        for (long i = 0; i < n; ++i) {
            part[i].assign(extents[i], {});
            for (long u = 0; u < count(); ++u) {
                const long k = dd->outcomes[u][i];
                if (k >= extents[i])
                    throw DataMismatchError("dataset outcome index out of range at site " +
                                            std::to_string(i));
                part[i][k].push_back(u);
            }
        }
        left.assign(n, Mat());
        right.assign(n, Mat());
        left[0] = Mat::Ones(count(), 1);
        right[n - 1] = Mat::Ones(count(), 1);
    }

    void push_left(long i, const DenseTensor& site) {
        const long br = site.extent(2);
        Mat next(count(), br);
        for (long k = 0; k < site.extent(1); ++k) {
            const auto& rows = part[i][k];
            if (rows.empty()) continue;
            Mat w = slice_real(site, k);
            Mat x(static_cast<long>(rows.size()), w.rows());
            for (std::size_t j = 0; j < rows.size(); ++j) x.row(j) = left[i].row(rows[j]);
            Mat y = x * w;
            for (std::size_t j = 0; j < rows.size(); ++j) next.row(rows[j]) = y.row(j);
        }
        left[i + 1] = std::move(next);
    }

    void push_right(long i, const DenseTensor& site) {
        const long bl = site.extent(0);
        Mat next(count(), bl);
        for (long k = 0; k < site.extent(1); ++k) {
            const auto& rows = part[i][k];
            if (rows.empty()) continue;
            Mat w = slice_real(site, k);
            Mat x(static_cast<long>(rows.size()), w.cols());
            for (std::size_t j = 0; j < rows.size(); ++j) x.row(j) = right[i].row(rows[j]);
            Mat y = x * w.transpose();
            for (std::size_t j = 0; j < rows.size(); ++j) next.row(rows[j]) = y.row(j);
        }
        right[i - 1] = std::move(next);
    }

    // E[w^2] with the center site already written at `site`.
    double second_moment_at(long i, const DenseTensor& site) const {
        double acc = 0;
        for (long k = 0; k < site.extent(1); ++k) {
            const auto& rows = part[i][k];
            if (rows.empty()) continue;
            Mat w = slice_real(site, k);
            for (long u : rows) {
                const double val = left[i].row(u) * w * right[i].row(u).transpose();
                acc += dd->weights[u] * val * val;
            }
        }
        return acc;
    }

    // Frequency-weighted a block: block-diagonal over outcomes.
    Mat a_matrix(long i, const std::vector<long>& extents) const {
        const long cl = left[i].cols(), cr = right[i].cols(), s = extents[i];
        const long dim = cl * s * cr;
        Mat a = Mat::Zero(dim, dim);
        Mat z;
        for (long k = 0; k < s; ++k) {
            const auto& rows = part[i][k];
            if (rows.empty()) continue;
            z.resize(static_cast<long>(rows.size()), cl * cr);
            for (std::size_t j = 0; j < rows.size(); ++j) {
                const long u = rows[j];
                const double sw = std::sqrt(dd->weights[u]);
                for (long l = 0; l < cl; ++l)
                    for (long r = 0; r < cr; ++r)
                        z(static_cast<long>(j), l * cr + r) =
                            sw * left[i](u, l) * right[i](u, r);
            }
            Mat blk = z.transpose() * z;
            for (long l = 0; l < cl; ++l)
                for (long lp = 0; lp < cl; ++lp)
                    for (long r = 0; r < cr; ++r)
                        for (long rp = 0; rp < cr; ++rp)
                            a(flat_index(l, k, r, s, cr), flat_index(lp, k, rp, s, cr)) =
                                blk(l * cr + r, lp * cr + rp);
        }
        return a;
    }
};

// --- real canonical moves -------------------------------------------------

Mat site_matrix_real(const DenseTensor& t, long rows, long cols) {
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = t.data()[i * cols + j].real();
    return m;
}

DenseTensor tensor_from_real(const Mat& m, std::vector<long> shape) {
    DenseTensor t(std::move(shape));
    const long cols = m.cols();
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < cols; ++j) t.data()[i * cols + j] = m(i, j);
    return t;
}

void move_center_right(Mps& m, long l) {
    const auto& t = m.site(l);
    const long bl = t.extent(0), s = t.extent(1), br = t.extent(2);
    Mat a = site_matrix_real(t, bl * s, br);
    Eigen::HouseholderQR<Mat> qr(a);
    const long k = std::min(a.rows(), a.cols());
    Mat q = qr.householderQ() * Mat::Identity(a.rows(), k);
    Mat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    m.site(l) = tensor_from_real(q, {bl, s, k});
    const auto& nxt = m.site(l + 1);
    const long s2 = nxt.extent(1), br2 = nxt.extent(2);
    Mat nm = site_matrix_real(nxt, br, s2 * br2);
    m.site(l + 1) = tensor_from_real(r * nm, {k, s2, br2});
    m.set_canonical_center(l + 1);
}

void move_center_left(Mps& m, long l) {
    const auto& t = m.site(l);
    const long bl = t.extent(0), s = t.extent(1), br = t.extent(2);
    Mat a = site_matrix_real(t, bl, s * br);
    Eigen::HouseholderQR<Mat> qr(a.transpose());
    const long k = std::min(a.rows(), a.cols());
    Mat q = qr.householderQ() * Mat::Identity(s * br, k);
    Mat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    m.site(l) = tensor_from_real(q.transpose(), {k, s, br});
    const auto& prv = m.site(l - 1);
    const long s0 = prv.extent(1), bl0 = prv.extent(0);
    Mat pm = site_matrix_real(prv, bl0 * s0, bl);
    m.site(l - 1) = tensor_from_real(pm * r.transpose(), {bl0, s0, k});
    m.set_canonical_center(l - 1);
}

void canonize_real(Mps& m, long center) {
    for (long i = m.n() - 1; i > center; --i) move_center_left(m, i);
    for (long i = 0; i < center; ++i) move_center_right(m, i);
    m.set_canonical_center(center);
}

Vec flatten_site(const DenseTensor& t) {
    Vec x(t.size());
    for (long i = 0; i < t.size(); ++i) x(i) = t.data()[i].real();
    return x;
}

DenseTensor unflatten_site(const Vec& x, long bl, long s, long br) {
    DenseTensor t({bl, s, br});
    for (long i = 0; i < t.size(); ++i) t.data()[i] = x(i);
    return t;
}

// --- sweep engine ----------------------------------------------------------

struct SweepEngine {
    Mps* w = nullptr;
    const Mpo* eff = nullptr;
    Mpo gram;
    const ObservableMps* obs = nullptr;
    const ProbabilityModel* pm = nullptr;
    std::vector<long> extents;
    long n = 0;
    double obs_norm2sq = 0;

    bool exact = false;
    std::vector<DenseTensor> gl, gr; // gram environments
    std::vector<DenseTensor> al, ar; // exact model environments
    std::vector<DenseTensor> vl, vr; // observable cross environments
    ShotStacks train;                // empirical mode
    std::optional<ShotStacks> test;  // early-stop monitoring

    void init(Mps& west, const Mpo& effect, const ObservableMps& o, const ProbabilityModel& model,
              const DedupShots* test_dd) {
        w = &west;
        eff = &effect;
        obs = &o;
        pm = &model;
        gram = gram_mpo(effect);
        n = west.n();
        extents.resize(n);
        for (long i = 0; i < n; ++i) extents[i] = west.phys(i);
        obs_norm2sq = o.norm2 * o.norm2;
        exact = model.mode() == ProbabilityModel::Mode::Exact;

        gl.assign(n, DenseTensor());
        gr.assign(n, DenseTensor());
        vl.assign(n, DenseTensor());
        vr.assign(n, DenseTensor());
        gl[0] = trivial_env();
        gr[n - 1] = trivial_env();
        vl[0] = trivial_env();
        vr[n - 1] = trivial_env();
        if (exact) {
            al.assign(n, DenseTensor());
            ar.assign(n, DenseTensor());
            al[0] = trivial_env();
            ar[n - 1] = trivial_env();
        } else {
            train.dd = &model.dedup_shots();
            train.init_partition(extents);
        }
        if (test_dd) {
            test.emplace();
            test->dd = test_dd;
            test->init_partition(extents);
        }
        rebuild_right_from(n - 1);
        // Left stacks above index 0 are produced while sweeping right.
    }

    // Recomputes right environments for boundaries end-1 .. 0.
    void rebuild_right_from(long end) {
        for (long i = end; i > 0; --i) push_right_at(i);
    }

    void push_left_at(long i) {
        gl[i + 1] = push_left_op(gl[i], gram.site(i), w->site(i));
        vl[i + 1] = push_left_v(vl[i], obs->mps.site(i), eff->site(i), w->site(i));
        if (exact)
            al[i + 1] = push_left_op(al[i], pm->prob_mpo().site(i), w->site(i));
        else
            train.push_left(i, w->site(i));
        if (test) test->push_left(i, w->site(i));
    }

    void push_right_at(long i) {
        gr[i - 1] = push_right_op(gr[i], gram.site(i), w->site(i));
        vr[i - 1] = push_right_v(vr[i], obs->mps.site(i), eff->site(i), w->site(i));
        if (exact)
            ar[i - 1] = push_right_op(ar[i], pm->prob_mpo().site(i), w->site(i));
        else
            train.push_right(i, w->site(i));
        if (test) test->push_right(i, w->site(i));
    }

    LocalSystem assemble(long l) const {
        LocalSystem sys;
        const auto& t = w->site(l);
        sys.chi_left = t.extent(0);
        sys.s = t.extent(1);
        sys.chi_right = t.extent(2);
        if (gram.bond(l) == 1 && gram.bond(l + 1) == 1)
            sys.b = assemble_b_kron(gl[l], gram.site(l), gr[l]);
        else
            sys.b = assemble_op_generic(gl[l], gram.site(l), gr[l]);
        sys.v = assemble_v(vl[l], obs->mps.site(l), eff->site(l), vr[l]);
        if (exact)
            sys.a = assemble_a_diag(al[l], pm->prob_mpo().site(l), ar[l]);
        else
            sys.a = train.a_matrix(l, extents);
        return sys;
    }

    std::optional<double> test_second_moment(long l) const {
        if (!test) return std::nullopt;
        return test->second_moment_at(l, w->site(l));
    }
};

// --- config and solve -------------------------------------------------------

constexpr long kLapackSolveThreshold = 256;

bool solve_residual_ok(const Mat& a, const Mat& b, double lambda, double ridge, const Vec& x,
                       const Vec& rhs) {
    if (!x.allFinite()) return false;
    Vec mx = (1 - lambda) * (a * x + a.transpose() * x) + lambda * (b * x + b.transpose() * x) +
             ridge * x;
    const double rel = (mx - rhs).norm() / std::max(rhs.norm(), 1e-300);
    return rel <= 1e-7;
}

} // namespace

void OptimizerConfig::validate() const {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("optimizer: lambda must lie in (0, 1)");
    if (chi_max < 1) throw std::invalid_argument("optimizer: chi_max must be >= 1");
    if (max_sweeps < 0) throw std::invalid_argument("optimizer: max_sweeps must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("optimizer: alpha must lie in (0, 1]");
    if (tau < 0) throw std::invalid_argument("optimizer: tau must be >= 0");
    if (tol < 0) throw std::invalid_argument("optimizer: tol must be >= 0");
    if (perturb_noise < 0) throw std::invalid_argument("optimizer: perturb noise must be >= 0");
    if (early_stop) {
        if (!early_stop->test) throw std::invalid_argument("optimizer: early stop needs a test dataset");
        if (early_stop->patience < 1)
            throw std::invalid_argument("optimizer: early-stop patience must be >= 1");
    }
}

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxSweeps: return "max_sweeps";
        case StopReason::CostConverged: return "cost_converged";
        default: return "early_stopped";
    }
}

Mpo gram_mpo(const Mpo& eff) {
    std::vector<DenseTensor> sites;
    sites.reserve(eff.n());
    for (long i = 0; i < eff.n(); ++i) {
        DenseTensor t = contract(eff.site(i).conjugated(), eff.site(i), {1}, {1});
        // (gl, k, gr, gl', k', gr') -> ((gl gl'), k, k', (gr gr'))
        t = t.permuted({0, 3, 1, 4, 2, 5});
        const long gl2 = t.extent(0) * t.extent(1);
        const long gr2 = t.extent(4) * t.extent(5);
        sites.push_back(t.reshaped({gl2, t.extent(2), t.extent(3), gr2}));
    }
    return Mpo(std::move(sites));
}

LocalSystem environments(const EstimatorMps& est, const Mpo& eff, const ObservableMps& obs,
                         const ProbabilityModel& pm, long site) {
    if (site < 0 || site >= est.n()) throw std::invalid_argument("environments: site out of range");
    if (est.mps().canonical_center() != std::optional<long>(site))
        throw std::invalid_argument(
            "environments: estimator must be in canonical form with center at the requested site");
    Mps w = est.mps();
    SweepEngine eng;
    eng.init(w, eff, obs, pm, nullptr);
    for (long i = 0; i < site; ++i) eng.push_left_at(i);
    return eng.assemble(site);
}

Eigen::VectorXd local_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const Eigen::VectorXd& v, double lambda, double tau) {
    const long dim = v.size();
    if (a.rows() != dim || a.cols() != dim || b.rows() != dim || b.cols() != dim)
        throw std::invalid_argument("local_solve: dimension mismatch");
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("local_solve: lambda must lie in (0, 1)");
    if (tau < 0) throw std::invalid_argument("local_solve: tau must be >= 0");

    Mat m = (1 - lambda) * (a + a.transpose()) + lambda * (b + b.transpose());
    const double ridge = tau * m.diagonal().mean();
    m.diagonal().array() += ridge;
    Vec rhs = 2.0 * lambda * v;

    if (tau > 0) {
        if (dim >= kLapackSolveThreshold) {
            Vec x = rhs;
            Mat mf = m;
            int info = LAPACKE_dposv(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(dim), 1,
                                     mf.data(), static_cast<lapack_int>(dim), x.data(),
                                     static_cast<lapack_int>(dim));
            if (info == 0 && solve_residual_ok(a, b, lambda, ridge, x, rhs)) return x;
        } else {
            Eigen::LLT<Mat> llt(m);
            if (llt.info() == Eigen::Success) {
                Vec x = llt.solve(rhs);
                if (solve_residual_ok(a, b, lambda, ridge, x, rhs)) return x;
            }
        }
    }
    {
        Eigen::LDLT<Mat> ldlt(m);
        if (ldlt.info() == Eigen::Success) {
            Vec x = ldlt.solve(rhs);
            if (solve_residual_ok(a, b, lambda, ridge, x, rhs)) return x;
        }
    }
    // Rank-deficient or ill-conditioned: minimum-norm least squares.
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(m);
    Vec x = cod.solve(rhs);
    if (!x.allFinite()) throw NumericalError("local_solve: solve produced non-finite values");
    return x;
}

CostReport cost(const EstimatorMps& est, const Mpo& eff, const ObservableMps& obs,
                const ProbabilityModel& pm, double lambda) {
    CostReport rep;
    rep.second_moment = second_moment(est, pm);
    Mps applied = apply_mpo(eff, est.mps());
    const double bb = inner(applied, applied).real();
    const double cross = inner(obs.mps, applied).real();
    const double c0 = obs.norm2 * obs.norm2;
    rep.penalty = std::sqrt(std::max(0.0, c0 - 2 * cross + bb));
    rep.cost = (1 - lambda) * rep.second_moment + lambda * (bb - 2 * cross);
    return rep;
}

namespace {

std::vector<long> bond_profile(const std::vector<long>& extents, long chi) {
    const long n = static_cast<long>(extents.size());
    std::vector<long> bonds(n + 1, 1);
    long acc = 1;
    for (long i = 1; i < n; ++i) {
        acc = std::min(acc * extents[i - 1], chi);
        bonds[i] = acc;
    }
    acc = 1;
    for (long i = n - 1; i > 0; --i) {
        acc = std::min(acc * extents[i], chi);
        bonds[i] = std::min(bonds[i], acc);
    }
    return bonds;
}

Mps random_real_mps(const std::vector<long>& extents, long chi, std::uint64_t seed) {
    const long n = static_cast<long>(extents.size());
    std::vector<long> bonds = bond_profile(extents, chi);
    Rng rng(seed, 0, Rng::kInit);
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    for (long i = 0; i < n; ++i) {
        DenseTensor t({bonds[i], extents[i], bonds[i + 1]});
        for (long j = 0; j < t.size(); ++j) t.data()[j] = rng.normal();
        sites.push_back(std::move(t));
    }
    return Mps(std::move(sites));
}

} // namespace

EstimatorMps make_initial(const OptimizerConfig& cfg, const ObservableMps& obs,
                          const ProductPovm& povm) {
    cfg.validate();
    if (cfg.init == OptimizerConfig::Init::Random)
        return EstimatorMps(random_real_mps(povm.outcome_extents(), cfg.chi_max, cfg.seed));

    EstimatorMps can = canonical_estimator(obs, povm);
    if (cfg.init == OptimizerConfig::Init::PerturbedCanonical)
        return embed_perturbed(can, cfg.chi_max, cfg.perturb_noise, cfg.seed);
    Mps m = can.mps();
    if (m.max_bond() > cfg.chi_max) {
        auto [compressed, err] = compress(std::move(m), cfg.chi_max, 0.0);
        m = std::move(compressed);
        (void)err;
    }
    return EstimatorMps(std::move(m));
}

EstimatorMps embed_perturbed(const EstimatorMps& est, long chi_max, double noise,
                             std::uint64_t seed) {
    if (chi_max < 1) throw std::invalid_argument("embed_perturbed: chi_max must be >= 1");
    if (noise < 0) throw std::invalid_argument("embed_perturbed: noise must be >= 0");
    Mps m = est.mps();
    if (m.max_bond() > chi_max) {
        auto [compressed, err] = compress(std::move(m), chi_max, 0.0);
        m = std::move(compressed);
        (void)err;
    }
    const long n = m.n();
    std::vector<long> extents(n);
    for (long i = 0; i < n; ++i) extents[i] = m.phys(i);
    const std::vector<long> bonds = bond_profile(extents, chi_max);
    Rng rng(seed, 0, Rng::kPerturb);
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    for (long i = 0; i < n; ++i) {
        const auto& old = m.site(i);
        DenseTensor t({bonds[i], extents[i], bonds[i + 1]});
        for (long l = 0; l < old.extent(0); ++l)
            for (long k = 0; k < extents[i]; ++k)
                for (long r = 0; r < old.extent(2); ++r)
                    t.at({l, k, r}) = old.at({l, k, r}).real();
        double rms = 0;
        for (long j = 0; j < old.size(); ++j) rms += std::norm(old.data()[j]);
        rms = std::sqrt(rms / static_cast<double>(old.size()));
        const double scale = noise * (rms > 0 ? rms : 1.0);
        if (noise > 0)
            for (long j = 0; j < t.size(); ++j) t.data()[j] += scale * rng.normal();
        sites.push_back(std::move(t));
    }
    return EstimatorMps(Mps(std::move(sites)));
}

std::pair<EstimatorMps, TrainTrace> sweep(EstimatorMps init, const Mpo& eff,
                                          const ObservableMps& obs, const ProbabilityModel& pm,
                                          const OptimizerConfig& cfg) {
    cfg.validate();
    const long n = init.n();
    if (eff.n() != n || obs.mps.n() != n || pm.n() != n)
        throw DataMismatchError("sweep: site count mismatch between estimator, POVM and model");
    for (long i = 0; i < n; ++i) {
        if (eff.phys_in(i) != init.mps().phys(i))
            throw DataMismatchError("sweep: estimator outcome extents do not match the POVM");
        if (eff.phys_out(i) != obs.mps.phys(i))
            throw DataMismatchError("sweep: observable physical extents do not match the POVM");
    }
    const DedupShots* test_dd = nullptr;
    std::optional<DedupShots> test_holder;
    if (cfg.early_stop) {
        const auto& t = *cfg.early_stop->test;
        t.validate();
        if (t.n != n) throw DataMismatchError("sweep: test dataset site count mismatch");
        for (long i = 0; i < n; ++i)
            if (t.s[i] != init.mps().phys(i))
                throw DataMismatchError("sweep: test dataset outcome extents mismatch");
        test_holder = dedup(t);
        test_dd = &*test_holder;
    }

    TrainTrace trace;
    if (cfg.max_sweeps == 0) {
        CostReport rep = cost(init, eff, obs, pm, cfg.lambda);
        trace.final_cost = rep.cost;
        trace.final_second_moment = rep.second_moment;
        trace.final_penalty = rep.penalty;
        trace.stop_reason = StopReason::MaxSweeps;
        return {std::move(init), std::move(trace)};
    }

    Mps w = init.mps();
    canonize_real(w, 0);
    SweepEngine eng;
    eng.init(w, eff, obs, pm, test_dd);

    double best_test = std::numeric_limits<double>::infinity();
    std::optional<Mps> best_w;
    if (cfg.early_stop) {
        // The initial estimator is the baseline: sweeps must beat it on the
        // test set or early stopping hands it back unchanged.
        best_test = *eng.test_second_moment(0);
        best_w = w;
    }
    long bad_sweeps = 0;
    double prev_cost = std::numeric_limits<double>::quiet_NaN();
    double last_cost = 0;
    std::optional<double> last_test;

    auto update_site = [&](long l, long sweep_idx) {
        LocalSystem sys = eng.assemble(l);
        Vec x = local_solve(sys.a, sys.b, sys.v, cfg.lambda, cfg.tau);
        Vec old = flatten_site(w.site(l));
        Vec blended = cfg.alpha * x + (1 - cfg.alpha) * old;
        w.site(l) = unflatten_site(blended, sys.chi_left, sys.s, sys.chi_right);

        TraceRecord rec;
        rec.sweep = sweep_idx;
        rec.site = l;
        rec.second_moment = blended.dot(sys.a * blended);
        const double bb = blended.dot(sys.b * blended);
        const double crs = blended.dot(sys.v);
        rec.penalty = std::sqrt(std::max(0.0, eng.obs_norm2sq - 2 * crs + bb));
        rec.cost = (1 - cfg.lambda) * rec.second_moment + cfg.lambda * (bb - 2 * crs);
        rec.test_second_moment = eng.test_second_moment(l);
        last_cost = rec.cost;
        last_test = rec.test_second_moment;
        trace.records.push_back(rec);
    };

    for (long sweep_idx = 0; sweep_idx < cfg.max_sweeps; ++sweep_idx) {
        for (long l = 0; l < n; ++l) {
            update_site(l, sweep_idx);
            if (l < n - 1) {
                move_center_right(w, l);
                eng.push_left_at(l);
            }
        }
        for (long l = n - 1; l >= 0; --l) {
            update_site(l, sweep_idx);
            if (l > 0) {
                move_center_left(w, l);
                eng.push_right_at(l);
            }
        }
        ++trace.sweeps_done;

        if (cfg.early_stop) {
            const double t = *last_test;
            if (t < best_test) {
                best_test = t;
                best_w = w;
                bad_sweeps = 0;
            } else {
                ++bad_sweeps;
                if (bad_sweeps >= cfg.early_stop->patience) {
                    trace.stop_reason = StopReason::EarlyStopped;
                    break;
                }
            }
        }
        if (sweep_idx > 0 && std::isfinite(prev_cost)) {
            if (std::abs(last_cost - prev_cost) <= cfg.tol * std::max(std::abs(prev_cost), 1e-300)) {
                trace.stop_reason = StopReason::CostConverged;
                break;
            }
        }
        prev_cost = last_cost;
        if (sweep_idx == cfg.max_sweeps - 1) trace.stop_reason = StopReason::MaxSweeps;
    }

    Mps result = (cfg.early_stop && best_w) ? std::move(*best_w) : std::move(w);
    EstimatorMps out{std::move(result)};
    CostReport rep = cost(out, eff, obs, pm, cfg.lambda);
    trace.final_cost = rep.cost;
    trace.final_second_moment = rep.second_moment;
    trace.final_penalty = rep.penalty;
    if (cfg.early_stop && std::isfinite(best_test)) trace.final_test_second_moment = best_test;
    return {std::move(out), std::move(trace)};
}

void save_estimator(const EstimatorMps& est, const nlohmann::json& meta, const std::string& path) {
    const Mps& m = est.mps();
    nlohmann::json tensors = nlohmann::json::array();
    nlohmann::json s = nlohmann::json::array();
    nlohmann::json chi = nlohmann::json::array();
    chi.push_back(1);
    for (long i = 0; i < m.n(); ++i) {
        s.push_back(m.phys(i));
        chi.push_back(m.site(i).extent(2));
        const auto& t = m.site(i);
        nlohmann::json site = nlohmann::json::array();
        for (long l = 0; l < t.extent(0); ++l) {
            nlohmann::json pl = nlohmann::json::array();
            for (long k = 0; k < t.extent(1); ++k) {
                nlohmann::json pk = nlohmann::json::array();
                for (long r = 0; r < t.extent(2); ++r) pk.push_back(t.at({l, k, r}).real());
                pl.push_back(std::move(pk));
            }
            site.push_back(std::move(pl));
        }
        tensors.push_back(std::move(site));
    }
    nlohmann::json j = {{"version", "est-v1"}, {"n", m.n()},       {"s", s},
                        {"chi", chi},          {"tensors", tensors}, {"meta", meta}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataMismatchError("cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

std::pair<EstimatorMps, nlohmann::json> load_estimator(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataMismatchError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataMismatchError(path + ": invalid JSON: " + e.what());
    }
    if (j.value("version", "") != "est-v1")
        throw DataMismatchError(path + ": expected version est-v1");
    const long n = j.at("n").get<long>();
    const auto& tensors = j.at("tensors");
    if (static_cast<long>(tensors.size()) != n)
        throw DataMismatchError(path + ": tensor count does not match n");
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    for (long i = 0; i < n; ++i) {
        const auto& site = tensors[i];
        const long bl = static_cast<long>(site.size());
        const long s = bl ? static_cast<long>(site[0].size()) : 0;
        const long br = (bl && s) ? static_cast<long>(site[0][0].size()) : 0;
        if (bl == 0 || s == 0 || br == 0)
            throw DataMismatchError(path + ": empty tensor at site " + std::to_string(i));
        DenseTensor t({bl, s, br});
        for (long l = 0; l < bl; ++l) {
            if (static_cast<long>(site[l].size()) != s)
                throw DataMismatchError(path + ": ragged tensor at site " + std::to_string(i));
            for (long k = 0; k < s; ++k) {
                if (static_cast<long>(site[l][k].size()) != br)
                    throw DataMismatchError(path + ": ragged tensor at site " + std::to_string(i));
                for (long r = 0; r < br; ++r) t.at({l, k, r}) = site[l][k][r].get<double>();
            }
        }
        sites.push_back(std::move(t));
    }
    nlohmann::json meta = j.value("meta", nlohmann::json::object());
    return {EstimatorMps(Mps(std::move(sites))), std::move(meta)};
}

void save_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataMismatchError("cannot open " + path + " for writing");
    bool with_test = false;
    for (const auto& r : trace.records)
        if (r.test_second_moment) with_test = true;
    out << "sweep,site,second_moment,penalty,cost";
    if (with_test) out << ",test_second_moment";
    out << "\n";
    char buf[512];
    for (const auto& r : trace.records) {
        if (with_test)
            std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g,%.17g", r.sweep, r.site,
                          r.second_moment, r.penalty, r.cost,
                          r.test_second_moment ? *r.test_second_moment
                                               : std::numeric_limits<double>::quiet_NaN());
        else
            std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g", r.sweep, r.site,
                          r.second_moment, r.penalty, r.cost);
        out << buf << "\n";
    }
}

} // namespace tnice
