#include "tnice/stats.hpp"

#include "tnice/state.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace tnice {

std::vector<double> evaluate(const EstimatorMps& est, const OutcomeDataset& ds) {
    ds.validate();
    if (ds.n != est.n()) throw DataMismatchError("evaluate: dataset site count mismatch");
    for (long i = 0; i < ds.n; ++i)
        if (ds.s[i] > est.mps().phys(i))
            throw DataMismatchError("evaluate: dataset outcome extent exceeds estimator at site " +
                                    std::to_string(i));
    std::unordered_map<std::string, double> memo;
    std::vector<double> out;
    out.reserve(ds.shots.size());
    std::string key;
    for (const auto& shot : ds.shots) {
        key.assign(reinterpret_cast<const char*>(shot.data()), shot.size() * sizeof(shot[0]));
        auto it = memo.find(key);
        if (it == memo.end()) it = memo.emplace(key, est.value(shot)).first;
        out.push_back(it->second);
    }
    return out;
}

namespace {

// Mean and frequency-weighted variance (divisor S, Eq. of the sample
// second central moment), computed in two passes so variance is >= 0.
std::pair<double, double> mean_and_variance(const std::vector<double>& stream) {
    const double s = static_cast<double>(stream.size());
    double mean = 0;
    for (double x : stream) mean += x;
    mean /= s;
    double var = 0;
    for (double x : stream) var += (x - mean) * (x - mean);
    var /= s;
    return {mean, var};
}

} // namespace

EstimateReport sample_mean_report(const std::vector<double>& stream, double penalty) {
    if (stream.size() < 2)
        throw std::invalid_argument("sample_mean_report: need at least two values");
    EstimateReport rep;
    rep.kind = EstimateReport::Kind::SampleMean;
    rep.shots = static_cast<long>(stream.size());
    std::tie(rep.mean, rep.variance) = mean_and_variance(stream);
    rep.std_error = std::sqrt(rep.variance / static_cast<double>(rep.shots));
    rep.penalty = penalty;
    return rep;
}

double median_of_means(const std::vector<double>& stream, long k) {
    const long s = static_cast<long>(stream.size());
    if (k < 1 || k > s) throw std::invalid_argument("median_of_means: need 1 <= K <= S");
    const long m = s / k; // remainder shots are dropped
    std::vector<double> means(k, 0.0);
    for (long c = 0; c < k; ++c) {
        double acc = 0;
        for (long j = c * m; j < (c + 1) * m; ++j) acc += stream[j];
        means[c] = acc / static_cast<double>(m);
    }
    std::sort(means.begin(), means.end());
    if (k % 2 == 1) return means[k / 2];
    return 0.5 * (means[k / 2 - 1] + means[k / 2]);
}

EstimateReport median_of_means_report(const std::vector<double>& stream, long k, double penalty) {
    EstimateReport rep = sample_mean_report(stream, penalty);
    rep.kind = EstimateReport::Kind::MedianOfMeans;
    rep.clusters = k;
    rep.mean = median_of_means(stream, k);
    return rep;
}

GuaranteeBound chebyshev_bound(double variance, long s, double penalty, double delta) {
    if (delta <= 0) throw std::invalid_argument("chebyshev_bound: delta must be positive");
    if (s < 1) throw std::invalid_argument("chebyshev_bound: need S >= 1");
    if (variance < 0) throw std::invalid_argument("chebyshev_bound: variance must be >= 0");
    GuaranteeBound b;
    b.delta = delta;
    b.value = variance / (delta * delta * static_cast<double>(s)) +
              (penalty * penalty) / (delta * delta);
    b.value = std::min(1.0, b.value);
    b.uninformative = delta <= penalty;
    return b;
}

long mom_cluster_count(double delta) {
    if (!(delta > 0 && delta < 1))
        throw std::invalid_argument("mom_cluster_count: delta must lie in (0, 1)");
    return static_cast<long>(std::ceil(8.0 * std::log(1.0 / delta)));
}

double bias_bound_check(const ObservableMps& obs, const EstimatorMps& est, const Mpo& eff,
                        const std::vector<StateMps>& states) {
    Mps applied = apply_mpo(eff, est.mps());
    const double bb = inner(applied, applied).real();
    const double cross = inner(obs.mps, applied).real();
    const double eps =
        std::sqrt(std::max(0.0, obs.norm2 * obs.norm2 - 2 * cross + bb));
    double worst = 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        Mps rho = state_to_ptm_mps(states[i]);
        const double bias = inner(rho, applied).real() - inner(rho, obs.mps).real();
        if (std::abs(bias) > eps + 1e-10)
            throw NumericalError("bias bound violated for state " + std::to_string(i) + ": |" +
                                 std::to_string(bias) + "| > penalty " + std::to_string(eps));
        worst = std::max(worst, std::abs(bias));
    }
    return worst;
}

nlohmann::json report_to_json(const EstimateReport& rep) {
    nlohmann::json j = {
        {"version", "rep-v1"}, {"mean", rep.mean},          {"variance", rep.variance},
        {"stderr", rep.std_error}, {"S", rep.shots},        {"penalty", rep.penalty},
    };
    if (rep.guarantee)
        j["bound"] = {{"delta", rep.guarantee->delta}, {"value", rep.guarantee->value}};
    else
        j["bound"] = nullptr;
    if (rep.kind == EstimateReport::Kind::MedianOfMeans) {
        j["kind"] = "median_of_means";
        j["clusters"] = rep.clusters;
    } else {
        j["kind"] = "sample_mean";
    }
    return j;
}

void save_report(const EstimateReport& rep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataMismatchError("cannot open " + path + " for writing");
    out << report_to_json(rep).dump() << "\n";
}

} // namespace tnice
