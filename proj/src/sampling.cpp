#include "tnice/sampling.hpp"

#include "tnice/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace tnice {

void OutcomeDataset::validate() const {
    if (n < 1) throw DataMismatchError("dataset: n must be >= 1");
    if (static_cast<long>(s.size()) != n)
        throw DataMismatchError("dataset: outcome-count list length does not match n");
    for (const auto& shot : shots) {
        if (static_cast<long>(shot.size()) != n)
            throw DataMismatchError("dataset: shot length does not match n");
        for (long i = 0; i < n; ++i)
            if (shot[i] >= s[i])
                throw DataMismatchError("dataset: outcome index " + std::to_string(shot[i]) +
                                        " out of range at site " + std::to_string(i));
    }
}

namespace {

// Transfer matrix of an operator o at one site: E[(a a'), (b b')] =
// sum_{p p'} conj(A[a,p,b]) o[p,p'] A[a',p',b'].
Eigen::MatrixXcd transfer(const DenseTensor& a, const Eigen::Matrix2cd& o) {
    const long bl = a.extent(0), br = a.extent(2);
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(bl * bl, br * br);
    for (long l = 0; l < bl; ++l)
        for (long lp = 0; lp < bl; ++lp)
            for (long r = 0; r < br; ++r)
                for (long rp = 0; rp < br; ++rp) {
                    cplx acc = 0;
                    for (int p = 0; p < 2; ++p)
                        for (int q = 0; q < 2; ++q)
                            acc += std::conj(a.at({l, p, r})) * o(p, q) * a.at({lp, q, rp});
                    e(l * bl + lp, r * br + rp) = acc;
                }
    return e;
}

} // namespace

double outcome_probability(const StateMps& state, const ProductPovm& povm,
                           const std::vector<std::uint16_t>& outcome) {
    const long n = state.mps.n();
    if (povm.n() != n) throw DataMismatchError("outcome_probability: POVM/state site mismatch");
    if (static_cast<long>(outcome.size()) != n)
        throw DataMismatchError("outcome_probability: outcome length mismatch");
    Eigen::RowVectorXcd env = Eigen::RowVectorXcd::Ones(1);
    for (long i = 0; i < n; ++i) {
        if (outcome[i] >= povm.s(i))
            throw DataMismatchError("outcome_probability: outcome index out of range at site " +
                                    std::to_string(i));
        env = env * transfer(state.mps.site(i), povm.site(i).effect(outcome[i]));
    }
    return env(0).real();
}

OutcomeDataset sample(const StateMps& state, const ProductPovm& povm, long shots,
                      std::uint64_t seed) {
    const long n = state.mps.n();
    if (povm.n() != n) throw DataMismatchError("sample: POVM/state site mismatch");
    if (shots < 1) throw std::invalid_argument("sample: need shots >= 1");

    // Per-site, per-outcome transfer matrices, identity right environments,
    // and the per-outcome conditional vectors the shot loop dots against.
    std::vector<std::vector<Eigen::MatrixXcd>> eff_transfer(n);
    for (long i = 0; i < n; ++i) {
        eff_transfer[i].reserve(povm.s(i));
        for (long k = 0; k < povm.s(i); ++k)
            eff_transfer[i].push_back(transfer(state.mps.site(i), povm.site(i).effect(k)));
    }
    std::vector<Eigen::VectorXcd> right(n + 1);
    right[n] = Eigen::VectorXcd::Ones(1);
    for (long i = n - 1; i >= 0; --i)
        right[i] = transfer(state.mps.site(i), Eigen::Matrix2cd::Identity()) * right[i + 1];
    std::vector<std::vector<Eigen::VectorXcd>> cond(n);
    for (long i = 0; i < n; ++i) {
        cond[i].reserve(povm.s(i));
        for (long k = 0; k < povm.s(i); ++k)
            cond[i].push_back(eff_transfer[i][k] * right[i + 1]);
    }

    OutcomeDataset ds;
    ds.n = n;
    ds.s = povm.outcome_extents();
    ds.seed = seed;
    ds.shots.resize(shots);

    std::vector<double> q;
    for (long sh = 0; sh < shots; ++sh) {
        Rng rng(seed, static_cast<std::uint64_t>(sh), Rng::kSample);
        Eigen::RowVectorXcd left = Eigen::RowVectorXcd::Ones(1);
        auto& shot = ds.shots[sh];
        shot.resize(n);
        for (long i = 0; i < n; ++i) {
            const long s = povm.s(i);
            q.assign(s, 0.0);
            double total = 0;
            for (long k = 0; k < s; ++k) {
                double w = (left * cond[i][k]).value().real();
                q[k] = std::max(w, 0.0);
                total += q[k];
            }
            if (total <= 0) throw NumericalError("sample: vanishing branch probability");
            double u = rng.uniform() * total;
            long pick = s - 1;
            double acc = 0;
            for (long k = 0; k < s; ++k) {
                acc += q[k];
                if (u < acc) {
                    pick = k;
                    break;
                }
            }
            shot[i] = static_cast<std::uint16_t>(pick);
            left = left * eff_transfer[i][pick];
        }
    }
    return ds;
}

Mpo probability_mpo(const StateMps& state, const ProductPovm& povm) {
    const long n = state.mps.n();
    if (povm.n() != n) throw DataMismatchError("probability_mpo: POVM/state site mismatch");
    std::vector<DenseTensor> sites;
    sites.reserve(n);
    for (long i = 0; i < n; ++i) {
        const long s = povm.s(i);
        const long bl = state.mps.site(i).extent(0), br = state.mps.site(i).extent(2);
        DenseTensor t({bl * bl, s, s, br * br});
        for (long k = 0; k < s; ++k) {
            Eigen::MatrixXcd e = transfer(state.mps.site(i), povm.site(i).effect(k));
            for (long l = 0; l < bl * bl; ++l)
                for (long r = 0; r < br * br; ++r) t.at({l, k, k, r}) = e(l, r);
        }
        sites.push_back(std::move(t));
    }
    return Mpo(std::move(sites));
}

void save_dataset(const OutcomeDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataMismatchError("cannot open " + path + " for writing");
    bool uniform = true;
    for (long v : ds.s)
        if (v != ds.s[0]) uniform = false;
    nlohmann::json header = {{"version", "ds-v1"}, {"n", ds.n}, {"seed", ds.seed}};
    if (uniform)
        header["s"] = ds.s[0];
    else
        header["s"] = ds.s;
    out << header.dump() << "\n";
    for (const auto& shot : ds.shots) {
        out << "[";
        for (long i = 0; i < ds.n; ++i) out << (i ? "," : "") << shot[i];
        out << "]\n";
    }
}

OutcomeDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataMismatchError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataMismatchError(path + ": empty dataset file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataMismatchError(path + ": invalid header: " + e.what());
    }
    if (header.value("version", "") != "ds-v1")
        throw DataMismatchError(path + ": expected version ds-v1");
    OutcomeDataset ds;
    ds.n = header.at("n").get<long>();
    ds.seed = header.value("seed", std::uint64_t{0});
    if (header.at("s").is_array())
        ds.s = header.at("s").get<std::vector<long>>();
    else
        ds.s.assign(ds.n, header.at("s").get<long>());
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataMismatchError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        std::vector<std::uint16_t> shot;
        for (const auto& v : row) shot.push_back(v.get<std::uint16_t>());
        ds.shots.push_back(std::move(shot));
    }
    ds.validate();
    return ds;
}

DedupShots dedup(const OutcomeDataset& ds) {
    std::map<std::vector<std::uint16_t>, long> counts;
    for (const auto& shot : ds.shots) ++counts[shot];
    DedupShots out;
    out.total = ds.size();
    out.outcomes.reserve(counts.size());
    out.weights.reserve(counts.size());
    for (const auto& [outcome, c] : counts) {
        out.outcomes.push_back(outcome);
        out.weights.push_back(static_cast<double>(c) / static_cast<double>(out.total));
    }
    return out;
}

ProbabilityModel ProbabilityModel::exact(StateMps state, ProductPovm povm) {
    state.validate();
    if (state.mps.n() != povm.n())
        throw DataMismatchError("probability model: POVM/state site mismatch");
    ProbabilityModel pm;
    pm.mode_ = Mode::Exact;
    // The raw bond is the squared state bond; trim numerically-zero modes so
    // downstream environment contractions scale with the true rank.
    auto [pmpo, err] = compress_mpo(probability_mpo(state, povm), 16384, 1e-12);
    (void)err;
    pm.prob_mpo_ = std::make_shared<Mpo>(std::move(pmpo));
    pm.state_ = std::make_shared<StateMps>(std::move(state));
    pm.povm_ = std::make_shared<ProductPovm>(std::move(povm));
    return pm;
}

ProbabilityModel ProbabilityModel::empirical(OutcomeDataset ds) {
    ds.validate();
    if (ds.size() == 0) throw DataMismatchError("probability model: dataset has no shots");
    ProbabilityModel pm;
    pm.mode_ = Mode::Empirical;
    pm.dedup_ = std::make_shared<DedupShots>(dedup(ds));
    pm.data_ = std::make_shared<OutcomeDataset>(std::move(ds));
    return pm;
}

const StateMps& ProbabilityModel::state() const {
    if (mode_ != Mode::Exact) throw std::logic_error("probability model has no state");
    return *state_;
}

const ProductPovm& ProbabilityModel::povm() const {
    if (mode_ != Mode::Exact) throw std::logic_error("probability model has no POVM");
    return *povm_;
}

const Mpo& ProbabilityModel::prob_mpo() const {
    if (mode_ != Mode::Exact) throw std::logic_error("probability model has no probability MPO");
    return *prob_mpo_;
}

const OutcomeDataset& ProbabilityModel::dataset() const {
    if (mode_ != Mode::Empirical) throw std::logic_error("probability model has no dataset");
    return *data_;
}

const DedupShots& ProbabilityModel::dedup_shots() const {
    if (mode_ != Mode::Empirical) throw std::logic_error("probability model has no dataset");
    return *dedup_;
}

long ProbabilityModel::n() const {
    return mode_ == Mode::Exact ? state_->mps.n() : data_->n;
}

std::vector<long> ProbabilityModel::outcome_extents() const {
    return mode_ == Mode::Exact ? povm_->outcome_extents() : data_->s;
}

} // namespace tnice
