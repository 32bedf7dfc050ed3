// Command-line frontend: sample measurement data, train estimators,
// evaluate them on datasets, and compare against the canonical baseline.

#include "tnice/observable.hpp"
#include "tnice/optimizer.hpp"
#include "tnice/povm.hpp"
#include "tnice/sampling.hpp"
#include "tnice/shadows.hpp"
#include "tnice/state.hpp"
#include "tnice/stats.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace tnice;

StateMps make_state(const std::string& spec, long n) {
    if (spec == "ghz") return ghz(n);
    if (spec == "zeros") return zeros(n);
    if (spec.rfind("gs:", 0) == 0) {
        PauliSum h = load_hamiltonian(spec.substr(3));
        if (n > 0 && h.n() != n)
            throw DataMismatchError("state: --n disagrees with the Hamiltonian's site count");
        return ground_state_dense(h);
    }
    throw std::invalid_argument("state: expected ghz, zeros or gs:<hamiltonian file>");
}

long state_spec_n(const std::string& spec, long n_flag) {
    if (spec.rfind("gs:", 0) == 0) return load_hamiltonian(spec.substr(3)).n();
    return n_flag;
}

ProductPovm make_povm(const std::string& spec, long n) {
    if (spec == "pauli6") {
        if (n < 1) throw std::invalid_argument("povm: site count unknown; pass --n");
        return ProductPovm(n, pauli6());
    }
    ProductPovm p = load_povm(spec);
    if (n > 0 && p.n() != n)
        throw DataMismatchError("povm: file site count disagrees with the task");
    return p;
}

OptimizerConfig::Init parse_init(const std::string& s) {
    if (s == "random") return OptimizerConfig::Init::Random;
    if (s == "canonical") return OptimizerConfig::Init::Canonical;
    if (s == "perturbed") return OptimizerConfig::Init::PerturbedCanonical;
    throw std::invalid_argument("init: expected random, canonical or perturbed");
}

std::vector<long> parse_chi_list(const std::string& s) {
    std::vector<long> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, comma - pos);
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(tok, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("chi: expected a positive integer list, got '" + tok + "'");
        }
        if (used != tok.size() || v < 1)
            throw std::invalid_argument("chi: expected a positive integer list, got '" + tok + "'");
        out.push_back(v);
        pos = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("chi: empty list");
    return out;
}

// est.json -> est.chi8.json; extensionless paths get the suffix appended.
std::string with_chi_suffix(const std::string& path, long chi) {
    const std::string tag = ".chi" + std::to_string(chi);
    const std::size_t dot = path.find_last_of('.');
    const std::size_t slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
    return path.substr(0, dot) + tag + path.substr(dot);
}

std::string with_ext_swap(const std::string& path, const std::string& repl) {
    const std::size_t dot = path.find_last_of('.');
    const std::size_t slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + repl;
    return path.substr(0, dot) + repl;
}

struct OptimizeArgs {
    std::string obs_path, state_spec, povm_spec = "pauli6";
    std::string train_path, test_path, out_path, trace_path;
    long n = 0;
    std::string chi = "8";
    std::string init = "random";
    double lambda = 0.999, alpha = 1.0, tau = 1e-10, tol = 1e-9, noise = 1e-2;
    long sweeps = 10, patience = 2;
    std::uint64_t seed = 0;
    bool scan = false;
};

nlohmann::json run_meta(const OptimizeArgs& a, const OptimizerConfig& cfg, const TrainTrace& tr) {
    nlohmann::json meta = {
        {"observable", a.obs_path},
        {"lambda", cfg.lambda},
        {"chi", cfg.chi_max},
        {"init", a.init},
        {"seed", cfg.seed},
        {"sweeps_done", tr.sweeps_done},
        {"stop_reason", to_string(tr.stop_reason)},
        {"second_moment", tr.final_second_moment},
        {"penalty", tr.final_penalty},
    };
    if (tr.final_test_second_moment) meta["test_second_moment"] = *tr.final_test_second_moment;
    return meta;
}

int cmd_optimize(const OptimizeArgs& a) {
    PauliSum ham = load_hamiltonian(a.obs_path);
    const long n = ham.n();
    if (a.n > 0 && a.n != n)
        throw DataMismatchError("optimize: --n disagrees with the observable's site count");
    ObservableMps obs = to_mps(ham);
    ProductPovm povm = make_povm(a.povm_spec, n);
    Mpo eff = effect_mpo(povm);

    const bool empirical = !a.train_path.empty();
    if (empirical == !a.state_spec.empty())
        throw std::invalid_argument("optimize: pass exactly one of --state (exact) or --train");
    ProbabilityModel pm = empirical
                              ? ProbabilityModel::empirical(load_dataset(a.train_path))
                              : ProbabilityModel::exact(make_state(a.state_spec, n), povm);
    if (pm.n() != n) throw DataMismatchError("optimize: model site count disagrees with observable");

    OptimizerConfig cfg;
    cfg.lambda = a.lambda;
    cfg.max_sweeps = a.sweeps;
    cfg.alpha = a.alpha;
    cfg.tau = a.tau;
    cfg.tol = a.tol;
    cfg.init = parse_init(a.init);
    cfg.seed = a.seed;
    cfg.perturb_noise = a.noise;
    if (!a.test_path.empty()) {
        EarlyStopConfig es;
        es.test = std::make_shared<const OutcomeDataset>(load_dataset(a.test_path));
        es.patience = a.patience;
        cfg.early_stop = es;
    }

    std::vector<long> chis = parse_chi_list(a.chi);
    if (!a.scan && chis.size() != 1)
        throw std::invalid_argument("optimize: a chi list needs --scan");

    if (!a.scan) {
        cfg.chi_max = chis[0];
        auto [est, trace] = sweep(make_initial(cfg, obs, povm), eff, obs, pm, cfg);
        save_estimator(est, run_meta(a, cfg, trace), a.out_path);
        if (!a.trace_path.empty()) save_trace_csv(trace, a.trace_path);
        std::printf("%s: sweeps=%ld stop=%s second_moment=%.6g penalty=%.6g\n",
                    a.out_path.c_str(), trace.sweeps_done, to_string(trace.stop_reason).c_str(),
                    trace.final_second_moment, trace.final_penalty);
        return 0;
    }

    // Bond scan: ascending chi, warm-starting each run from the previous one.
    std::sort(chis.begin(), chis.end());
    std::string csv = "chi,second_moment,penalty,cost\n";
    std::optional<EstimatorMps> warm;
    for (long chi : chis) {
        cfg.chi_max = chi;
        // Pad the previous solution to the new bond budget with a little
        // noise; dead zero blocks would pin the sweeps to the old bonds.
        EstimatorMps init = warm ? embed_perturbed(*warm, chi, 1e-3, cfg.seed + chi)
                                 : make_initial(cfg, obs, povm);
        auto [est, trace] = sweep(std::move(init), eff, obs, pm, cfg);
        const std::string path = with_chi_suffix(a.out_path, chi);
        save_estimator(est, run_meta(a, cfg, trace), path);
        if (!a.trace_path.empty()) save_trace_csv(trace, with_chi_suffix(a.trace_path, chi));
        char row[256];
        std::snprintf(row, sizeof row, "%ld,%.17g,%.17g,%.17g\n", chi, trace.final_second_moment,
                      trace.final_penalty, trace.final_cost);
        csv += row;
        std::printf("%s: sweeps=%ld stop=%s second_moment=%.6g penalty=%.6g\n", path.c_str(),
                    trace.sweeps_done, to_string(trace.stop_reason).c_str(),
                    trace.final_second_moment, trace.final_penalty);
        warm = std::move(est);
    }
    const std::string scan_path = with_ext_swap(a.out_path, ".scan.csv");
    std::ofstream out(scan_path, std::ios::binary);
    if (!out) throw DataMismatchError("cannot open " + scan_path + " for writing");
    out << csv;
    std::printf("wrote %s\n", scan_path.c_str());
    return 0;
}

double penalty_of(const ObservableMps& obs, const EstimatorMps& est, const Mpo& eff) {
    Mps applied = apply_mpo(eff, est.mps());
    const double bb = inner(applied, applied).real();
    const double cross = inner(obs.mps, applied).real();
    return std::sqrt(std::max(0.0, obs.norm2 * obs.norm2 - 2 * cross + bb));
}

int cmd_estimate(const std::string& est_path, const std::string& data_path,
                 const std::string& obs_path, const std::string& povm_spec, long mom, double delta,
                 const std::string& out_path) {
    auto [est, meta] = load_estimator(est_path);
    OutcomeDataset ds = load_dataset(data_path);
    std::vector<double> stream = evaluate(est, ds);

    double penalty = 0;
    if (!obs_path.empty()) {
        PauliSum ham = load_hamiltonian(obs_path);
        ObservableMps obs = to_mps(ham);
        penalty = penalty_of(obs, est, effect_mpo(make_povm(povm_spec, ham.n())));
    } else if (meta.contains("penalty")) {
        penalty = meta["penalty"].get<double>();
    } else {
        throw std::invalid_argument(
            "estimate: estimator file carries no penalty; pass --obs to recompute it");
    }

    EstimateReport rep = mom > 0 ? median_of_means_report(stream, mom, penalty)
                                 : sample_mean_report(stream, penalty);
    rep.estimator_id = est_path;
    if (delta > 0) {
        rep.guarantee = chebyshev_bound(rep.variance, rep.shots, penalty, delta);
        if (rep.guarantee->uninformative)
            std::fprintf(stderr,
                         "warning: delta %.6g <= penalty %.6g; the deviation bound is vacuous\n",
                         delta, penalty);
    }
    save_report(rep, out_path);
    std::printf("%s: mean=%.10g stderr=%.4g S=%ld\n", out_path.c_str(), rep.mean, rep.std_error,
                rep.shots);
    return 0;
}

int cmd_compare(const std::string& obs_path, const std::string& state_spec, long n_flag,
                const std::string& povm_spec, const std::string& est_path,
                const std::string& out_path) {
    PauliSum ham = load_hamiltonian(obs_path);
    const long n = ham.n();
    if (n_flag > 0 && n_flag != n)
        throw DataMismatchError("compare: --n disagrees with the observable's site count");
    ObservableMps obs = to_mps(ham);
    StateMps state = make_state(state_spec, n);
    ProductPovm povm = make_povm(povm_spec, n);
    Mpo eff = effect_mpo(povm);
    ProbabilityModel pm = ProbabilityModel::exact(state, povm);

    std::string csv = "estimator,variance,penalty,mean,stderr\n";
    char row[256];
    if (n <= 12) {
        Eigen::VectorXcd psi = mps_to_dense(state);
        const double m1 = expectation_dense(ham, psi);
        const double m2 = apply_dense(ham, psi).squaredNorm();
        std::snprintf(row, sizeof row, "observable,%.17g,%.17g,%.17g,\n", m2 - m1 * m1, 0.0, m1);
        csv += row;
    }
    auto add_row = [&](const char* name, const EstimatorMps& est) {
        const double sm = second_moment(est, pm);
        const double mean = mean_value(est, pm);
        std::snprintf(row, sizeof row, "%s,%.17g,%.17g,%.17g,\n", name, sm - mean * mean,
                      penalty_of(obs, est, eff), mean);
        csv += row;
    };
    add_row("canonical", canonical_estimator(obs, povm));
    add_row("trained", load_estimator(est_path).first);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataMismatchError("cannot open " + out_path + " for writing");
    out << csv;
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("TN_ICE_THREADS"))
        setenv("OPENBLAS_NUM_THREADS", threads, 1);

    CLI::App app{"Low-variance observable estimators from IC POVM data"};
    app.require_subcommand(1);

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "Draw measurement shots from a state");
    std::string s_state = "ghz", s_povm = "pauli6", s_out;
    long s_n = 0, s_shots = 0;
    std::uint64_t s_seed = 0;
    sample_cmd->add_option("--state", s_state, "ghz, zeros or gs:<hamiltonian file>");
    sample_cmd->add_option("--n", s_n, "site count");
    sample_cmd->add_option("--shots", s_shots, "number of shots")->required();
    sample_cmd->add_option("--seed", s_seed, "RNG seed");
    sample_cmd->add_option("--povm", s_povm, "pauli6 or a povm-v1 file");
    sample_cmd->add_option("--out", s_out, "output dataset (ds-v1)")->required();

    // optimize
    auto* opt_cmd = app.add_subcommand("optimize", "Train an estimator MPS");
    OptimizeArgs oa;
    opt_cmd->add_option("--obs", oa.obs_path, "observable (Hamiltonian text file)")->required();
    opt_cmd->add_option("--state", oa.state_spec, "exact mode: ghz, zeros or gs:<file>");
    opt_cmd->add_option("--n", oa.n, "site count (consistency check)");
    opt_cmd->add_option("--train", oa.train_path, "empirical mode: training dataset");
    opt_cmd->add_option("--test", oa.test_path, "held-out dataset for early stopping");
    opt_cmd->add_option("--povm", oa.povm_spec, "pauli6 or a povm-v1 file");
    opt_cmd->add_option("--lambda", oa.lambda, "penalty weight in (0,1)");
    opt_cmd->add_option("--chi", oa.chi, "bond cap, or a comma list with --scan");
    opt_cmd->add_option("--sweeps", oa.sweeps, "max sweeps");
    opt_cmd->add_option("--alpha", oa.alpha, "update blend in (0,1]");
    opt_cmd->add_option("--tau", oa.tau, "relative ridge");
    opt_cmd->add_option("--tol", oa.tol, "relative cost-change stop threshold");
    opt_cmd->add_option("--init", oa.init, "random, canonical or perturbed");
    opt_cmd->add_option("--noise", oa.noise, "perturbed init: relative entry noise");
    opt_cmd->add_option("--seed", oa.seed, "RNG seed");
    opt_cmd->add_option("--patience", oa.patience, "early-stop patience (sweeps)");
    opt_cmd->add_option("--out", oa.out_path, "output estimator (est-v1)")->required();
    opt_cmd->add_option("--trace", oa.trace_path, "per-update trace CSV");
    opt_cmd->add_flag("--scan", oa.scan, "run every chi in --chi, warm-started");

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "Evaluate an estimator on a dataset");
    std::string e_est, e_data, e_obs, e_povm = "pauli6", e_out;
    long e_mom = 0;
    double e_delta = 0;
    est_cmd->add_option("--est", e_est, "estimator file (est-v1)")->required();
    est_cmd->add_option("--data", e_data, "dataset file (ds-v1)")->required();
    est_cmd->add_option("--obs", e_obs, "recompute the penalty from this observable");
    est_cmd->add_option("--povm", e_povm, "POVM for the penalty recomputation");
    est_cmd->add_option("--mom", e_mom, "median of means with K clusters");
    est_cmd->add_option("--delta", e_delta, "attach a Chebyshev deviation bound");
    est_cmd->add_option("--out", e_out, "output report (rep-v1)")->required();

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "Baseline-vs-trained summary table");
    std::string c_obs, c_state = "ghz", c_povm = "pauli6", c_est, c_out;
    long c_n = 0;
    cmp_cmd->add_option("--obs", c_obs, "observable (Hamiltonian text file)")->required();
    cmp_cmd->add_option("--state", c_state, "ghz, zeros or gs:<file>");
    cmp_cmd->add_option("--n", c_n, "site count (consistency check)");
    cmp_cmd->add_option("--povm", c_povm, "pauli6 or a povm-v1 file");
    cmp_cmd->add_option("--est", c_est, "trained estimator file")->required();
    cmp_cmd->add_option("--out", c_out, "output CSV")->required();

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(sample_cmd)) {
            long n = state_spec_n(s_state, s_n);
            if (n < 1 && s_povm != "pauli6") n = load_povm(s_povm).n();
            StateMps state = make_state(s_state, n);
            n = state.mps.n();
            OutcomeDataset ds = sample(state, make_povm(s_povm, n), s_shots, s_seed);
            save_dataset(ds, s_out);
            std::printf("%s: S=%ld n=%ld seed=%llu\n", s_out.c_str(), ds.size(), ds.n,
                        static_cast<unsigned long long>(ds.seed));
            return 0;
        }
        if (app.got_subcommand(opt_cmd)) return cmd_optimize(oa);
        if (app.got_subcommand(est_cmd))
            return cmd_estimate(e_est, e_data, e_obs, e_povm, e_mom, e_delta, e_out);
        return cmd_compare(c_obs, c_state, c_n, c_povm, c_est, c_out);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const DataMismatchError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
