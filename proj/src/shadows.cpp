#include "tnice/shadows.hpp"

#include <cmath>

namespace tnice {

EstimatorMps::EstimatorMps(Mps m, double imag_tol) : mps_(std::move(m)) {
    mps_.validate();
    double scale = 0, imag = 0;
    for (long i = 0; i < mps_.n(); ++i) {
        const auto& t = mps_.site(i);
        for (long j = 0; j < t.size(); ++j) {
            scale = std::max(scale, std::abs(t.data()[j]));
            imag = std::max(imag, std::abs(t.data()[j].imag()));
        }
    }
    if (imag > imag_tol * std::max(scale, 1.0))
        throw DataMismatchError("estimator MPS has non-negligible imaginary parts");
    for (long i = 0; i < mps_.n(); ++i) {
        auto& t = mps_.site(i);
        for (long j = 0; j < t.size(); ++j) t.data()[j] = t.data()[j].real();
    }
}

bool EstimatorMps::is_real() const {
    for (long i = 0; i < mps_.n(); ++i) {
        const auto& t = mps_.site(i);
        for (long j = 0; j < t.size(); ++j)
            if (t.data()[j].imag() != 0.0) return false;
    }
    return true;
}

double EstimatorMps::value(const std::vector<std::uint16_t>& outcome) const {
    const long n = mps_.n();
    if (static_cast<long>(outcome.size()) != n)
        throw DataMismatchError("estimator value: outcome length mismatch");
    Eigen::VectorXd left = Eigen::VectorXd::Ones(1);
    for (long i = 0; i < n; ++i) {
        const auto& t = mps_.site(i);
        const long bl = t.extent(0), br = t.extent(2);
        if (outcome[i] >= t.extent(1))
            throw DataMismatchError("estimator value: outcome index out of range at site " +
                                    std::to_string(i));
        Eigen::VectorXd next = Eigen::VectorXd::Zero(br);
        for (long r = 0; r < br; ++r) {
            double acc = 0;
            for (long l = 0; l < bl; ++l) acc += left(l) * t.at({l, outcome[i], r}).real();
            next(r) = acc;
        }
        left = std::move(next);
    }
    return left(0);
}

EstimatorMps canonical_estimator(const ObservableMps& obs, const ProductPovm& povm) {
    const long n = obs.mps.n();
    if (povm.n() != n) throw DataMismatchError("canonical_estimator: POVM/observable mismatch");
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    for (long i = 0; i < n; ++i) {
        auto duals = canonical_duals(povm.site(i));
        const long s = povm.s(i);
        const auto& b = obs.mps.site(i);
        const long bl = b.extent(0), br = b.extent(2);
        DenseTensor t({bl, s, br});
        for (long k = 0; k < s; ++k) {
            Eigen::Vector4d d = vectorize_effect(duals[k]);
            for (long l = 0; l < bl; ++l)
                for (long r = 0; r < br; ++r) {
                    cplx acc = 0;
                    for (long a = 0; a < 4; ++a) acc += d(a) * b.at({l, a, r});
                    t.at({l, k, r}) = acc;
                }
        }
        sites.push_back(std::move(t));
    }
    return EstimatorMps(Mps(std::move(sites)));
}

double second_moment(const EstimatorMps& est, const ProbabilityModel& pm) {
    if (pm.mode() == ProbabilityModel::Mode::Exact)
        return expect(est.mps(), pm.prob_mpo(), est.mps()).real();
    const auto& dd = pm.dedup_shots();
    double acc = 0;
    for (std::size_t u = 0; u < dd.outcomes.size(); ++u) {
        double w = est.value(dd.outcomes[u]);
        acc += dd.weights[u] * w * w;
    }
    return acc;
}

double mean_value(const EstimatorMps& est, const ProbabilityModel& pm) {
    if (pm.mode() == ProbabilityModel::Mode::Exact) {
        // <<p|omega>> via the diagonal of the probability MPO.
        const Mpo& p = pm.prob_mpo();
        std::vector<DenseTensor> diag;
        diag.reserve(p.n());
        for (long i = 0; i < p.n(); ++i) {
            const auto& w = p.site(i);
            const long bl = w.extent(0), s = w.extent(1), br = w.extent(3);
            DenseTensor t({bl, s, br});
            for (long l = 0; l < bl; ++l)
                for (long k = 0; k < s; ++k)
                    for (long r = 0; r < br; ++r) t.at({l, k, r}) = w.at({l, k, k, r});
            diag.push_back(std::move(t));
        }
        return inner(Mps(std::move(diag)), est.mps()).real();
    }
    const auto& dd = pm.dedup_shots();
    double acc = 0;
    for (std::size_t u = 0; u < dd.outcomes.size(); ++u)
        acc += dd.weights[u] * est.value(dd.outcomes[u]);
    return acc;
}

} // namespace tnice
