#pragma once

#include "tnice/estimator.hpp"
#include "tnice/observable.hpp"
#include "tnice/sampling.hpp"
#include "tnice/shadows.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <optional>

namespace tnice {

struct EarlyStopConfig {
    std::shared_ptr<const OutcomeDataset> test;
    long patience = 2;
};

struct OptimizerConfig {
    enum class Init { Random, Canonical, PerturbedCanonical };

    double lambda = 0.999;  // in (0, 1); weight of the penalty term
    long chi_max = 8;
    long max_sweeps = 10;
    double alpha = 1.0;     // in (0, 1]; smooth-update blend toward the local optimum
    double tau = 1e-10;     // ridge, scaled by the mean diagonal of the local system
    double tol = 1e-9;      // stop when the relative cost change per sweep falls below
    Init init = Init::Random;
    std::uint64_t seed = 0;
    double perturb_noise = 1e-2;  // PerturbedCanonical: entry noise = this * tensor rms
    std::optional<EarlyStopConfig> early_stop;

    void validate() const;
};

struct TraceRecord {
    long sweep = 0;  // 0-based; each sweep is a left-to-right then right-to-left pass
    long site = 0;
    double second_moment = 0;
    double penalty = 0;
    double cost = 0;
    std::optional<double> test_second_moment;
};

enum class StopReason { MaxSweeps, CostConverged, EarlyStopped };
std::string to_string(StopReason r);

struct TrainTrace {
    std::vector<TraceRecord> records;
    long sweeps_done = 0;
    StopReason stop_reason = StopReason::MaxSweeps;
    double final_cost = 0;
    double final_second_moment = 0;
    double final_penalty = 0;
    std::optional<double> final_test_second_moment;
};

// Local quadratic data at one site: second-moment block a, effect Gram
// block b, observable cross vector v. Row-major flattening (left, outcome,
// right) matches the site tensor layout.
struct LocalSystem {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Eigen::VectorXd v;
    long chi_left = 1, s = 1, chi_right = 1;
};

// Gram MPO of the effect map: G[k,k'] = <<pi_k|pi_k'>> site-wise.
Mpo gram_mpo(const Mpo& eff);

// Builds (a, b, v) for `site`. The estimator must be in mixed canonical form
// with its center at `site`.
LocalSystem environments(const EstimatorMps& est, const Mpo& eff, const ObservableMps& obs,
                         const ProbabilityModel& pm, long site);

// Solves [(1-lambda)(a+a^T) + lambda(b+b^T) + ridge] x = 2 lambda v.
// The ridge is tau times the mean diagonal of the symmetrized system. Falls
// back to a least-squares pseudo-solution when factorization fails or the
// residual reveals rank deficiency.
Eigen::VectorXd local_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const Eigen::VectorXd& v, double lambda, double tau);

struct CostReport {
    double cost = 0;           // (1-lambda) E[w^2] + lambda (<Pw|Pw> - 2<O|Pw>), no constant
    double second_moment = 0;  // E[w^2]
    double penalty = 0;        // || |O>> - Pi |w> ||_2, constant included
};

CostReport cost(const EstimatorMps& est, const Mpo& eff, const ObservableMps& obs,
                const ProbabilityModel& pm, double lambda);

// Initial estimator per the configured scheme. Outcome extents are taken
// from the POVM; bond extents are capped at chi_max (Canonical keeps the
// observable's bonds, compressed down if they exceed the cap).
EstimatorMps make_initial(const OptimizerConfig& cfg, const ObservableMps& obs,
                          const ProductPovm& povm);

// Embeds the estimator into the full bond profile capped at chi_max and adds
// entry noise = `noise` times the per-tensor rms. Single-site sweeping keeps
// bond extents fixed, so enlarging them (with noise, or the padded block
// stays dead) is what lets a later run exploit a larger bond budget; used by
// the PerturbedCanonical initializer and for warm-starting bond scans.
EstimatorMps embed_perturbed(const EstimatorMps& est, long chi_max, double noise,
                             std::uint64_t seed);

// Alternating local solves, left-to-right then right-to-left per sweep.
// Returns the trained estimator (best-on-test when early stopping is
// configured) and the per-update trace.
std::pair<EstimatorMps, TrainTrace> sweep(EstimatorMps init, const Mpo& eff,
                                          const ObservableMps& obs, const ProbabilityModel& pm,
                                          const OptimizerConfig& cfg);

void save_estimator(const EstimatorMps& est, const nlohmann::json& meta, const std::string& path);
std::pair<EstimatorMps, nlohmann::json> load_estimator(const std::string& path);

void save_trace_csv(const TrainTrace& trace, const std::string& path);

} // namespace tnice
