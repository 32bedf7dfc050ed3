#pragma once

#include "tnice/estimator.hpp"
#include "tnice/observable.hpp"
#include "tnice/sampling.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tnice {

// Chebyshev-style deviation guarantee: Pr(|mean - <O>| > delta) <= value.
struct GuaranteeBound {
    double delta = 0;
    double value = 0;
    bool uninformative = false; // delta <= penalty: the bound cannot drop below 1
};

struct EstimateReport {
    enum class Kind { SampleMean, MedianOfMeans };

    Kind kind = Kind::SampleMean;
    long clusters = 1; // MedianOfMeans only
    double mean = 0;
    double variance = 0;  // frequency-weighted, divisor S
    double std_error = 0; // sqrt(variance / S)
    long shots = 0;
    std::string estimator_id;
    double penalty = 0;
    std::optional<GuaranteeBound> guarantee;
};

// Per-shot estimator coefficients w_{k_s}, memoized over repeated outcomes.
std::vector<double> evaluate(const EstimatorMps& est, const OutcomeDataset& ds);

// Mean, variance (divisor S) and standard error of a coefficient stream.
EstimateReport sample_mean_report(const std::vector<double>& stream, double penalty);

// Median of k contiguous equal-size cluster means; a remainder of fewer
// than k shots is truncated.
double median_of_means(const std::vector<double>& stream, long k);
EstimateReport median_of_means_report(const std::vector<double>& stream, long k, double penalty);

// min(1, variance/(delta^2 S) + penalty^2/delta^2), flagged uninformative
// when delta <= penalty.
GuaranteeBound chebyshev_bound(double variance, long s, double penalty, double delta);

// Cluster-count rule ceil(8 ln(1/delta)) for a target failure probability.
long mom_cluster_count(double delta);

// Max |Tr[O_w rho] - Tr[O rho]| over the states; throws NumericalError
// naming the first state whose bias exceeds the penalty + 1e-10.
double bias_bound_check(const ObservableMps& obs, const EstimatorMps& est, const Mpo& eff,
                        const std::vector<StateMps>& states);

nlohmann::json report_to_json(const EstimateReport& rep);
void save_report(const EstimateReport& rep, const std::string& path);

} // namespace tnice
