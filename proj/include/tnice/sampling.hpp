#pragma once

#include "tnice/povm.hpp"
#include "tnice/state.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace tnice {

// Measurement shots: S rows of n outcome indices.
struct OutcomeDataset {
    long n = 0;
    std::vector<long> s;                   // outcome count per site
    std::uint64_t seed = 0;
    std::vector<std::vector<std::uint16_t>> shots;

    long size() const { return static_cast<long>(shots.size()); }
    void validate() const;
};

// p_k = <psi| (x) pi_{k_i} |psi> for one outcome string.
double outcome_probability(const StateMps& state, const ProductPovm& povm,
                           const std::vector<std::uint16_t>& outcome);

// Draws S shots by sequential conditional sampling along the chain.
// Shot i uses substream i of the seed, so any shot range reproduces
// identically regardless of batching.
OutcomeDataset sample(const StateMps& state, const ProductPovm& povm, long shots,
                      std::uint64_t seed);

// Diagonal MPO over outcome indices whose diagonal is the outcome
// distribution; bond extent is the squared state bond.
Mpo probability_mpo(const StateMps& state, const ProductPovm& povm);

void save_dataset(const OutcomeDataset& ds, const std::string& path);
OutcomeDataset load_dataset(const std::string& path);

// Shots collapsed to unique outcome strings with relative frequencies.
struct DedupShots {
    std::vector<std::vector<std::uint16_t>> outcomes;
    std::vector<double> weights; // counts / S, sums to 1
    long total = 0;
};

DedupShots dedup(const OutcomeDataset& ds);

// Where estimator moments come from: an exact outcome distribution (state +
// POVM) or the empirical distribution of a dataset.
class ProbabilityModel {
public:
    enum class Mode { Exact, Empirical };

    static ProbabilityModel exact(StateMps state, ProductPovm povm);
    static ProbabilityModel empirical(OutcomeDataset ds);

    Mode mode() const { return mode_; }
    const StateMps& state() const;
    const ProductPovm& povm() const;
    const Mpo& prob_mpo() const;
    const OutcomeDataset& dataset() const;
    const DedupShots& dedup_shots() const;

    long n() const;
    std::vector<long> outcome_extents() const;

private:
    ProbabilityModel() = default;
    Mode mode_ = Mode::Exact;
    std::shared_ptr<const StateMps> state_;
    std::shared_ptr<const ProductPovm> povm_;
    std::shared_ptr<const Mpo> prob_mpo_;
    std::shared_ptr<const OutcomeDataset> data_;
    std::shared_ptr<const DedupShots> dedup_;
};

} // namespace tnice
