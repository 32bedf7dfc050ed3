#include "tnice/observable.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace tnice {

namespace {

const double kSqrt2 = std::sqrt(2.0);

int op_code(char c) {
    switch (c) {
        case 'I': return 0;
        case 'X': return 1;
        case 'Y': return 2;
        case 'Z': return 3;
        default: return -1;
    }
}

// Pauli action on a computational basis state: P|b> = phase * |b'>.
void pauli_action(int op, int b, int& b_out, cplx& phase) {
    switch (op) {
        case 0: b_out = b; phase = 1.0; break;
        case 1: b_out = 1 - b; phase = 1.0; break;
        case 2: b_out = 1 - b; phase = b == 0 ? cplx(0, 1) : cplx(0, -1); break;
        default: b_out = b; phase = b == 0 ? 1.0 : -1.0; break;
    }
}

} // namespace

PauliSum::PauliSum(long n, std::vector<PauliString> terms) : n_(n) {
    if (n < 1) throw std::invalid_argument("PauliSum: need n >= 1");
    std::map<std::vector<int>, double> merged;
    for (const auto& t : terms) {
        if (static_cast<long>(t.ops.size()) != n)
            throw DataMismatchError("PauliSum: term word length " + std::to_string(t.ops.size()) +
                                    " does not match n=" + std::to_string(n));
        for (int op : t.ops)
            if (op < 0 || op > 3) throw std::invalid_argument("PauliSum: invalid op code");
        merged[t.ops] += t.coeff;
    }
    for (auto& [ops, c] : merged)
        if (c != 0.0) terms_.push_back({c, ops});
}

std::string PauliSum::word(const PauliString& t) {
    static const char* names = "IXYZ";
    std::string w;
    for (int op : t.ops) w += names[op];
    return w;
}

PauliSum parse_hamiltonian(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<PauliString> terms;
    long n = -1;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string coeff_tok, word_tok, extra;
        if (!(ls >> coeff_tok)) continue; // blank or comment-only line
        if (!(ls >> word_tok))
            throw DataMismatchError("hamiltonian line " + std::to_string(lineno) +
                                    ": missing pauli word");
        if (ls >> extra)
            throw DataMismatchError("hamiltonian line " + std::to_string(lineno) +
                                    ": unexpected trailing token '" + extra + "'");
        double coeff;
        try {
            std::size_t pos = 0;
            coeff = std::stod(coeff_tok, &pos);
            if (pos != coeff_tok.size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw DataMismatchError("hamiltonian line " + std::to_string(lineno) +
                                    ": invalid coefficient '" + coeff_tok + "'");
        }
        PauliString t;
        t.coeff = coeff;
        for (char c : word_tok) {
            int op = op_code(c);
            if (op < 0)
                throw DataMismatchError("hamiltonian line " + std::to_string(lineno) +
                                        ": invalid pauli character '" + std::string(1, c) + "'");
            t.ops.push_back(op);
        }
        if (n < 0) n = static_cast<long>(t.ops.size());
        if (static_cast<long>(t.ops.size()) != n)
            throw DataMismatchError("hamiltonian line " + std::to_string(lineno) +
                                    ": word length " + std::to_string(t.ops.size()) +
                                    " differs from earlier length " + std::to_string(n));
        terms.push_back(std::move(t));
    }
    if (terms.empty()) throw DataMismatchError("hamiltonian text contains no terms");
    return PauliSum(n, std::move(terms));
}

PauliSum load_hamiltonian(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataMismatchError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_hamiltonian(buf.str());
}

std::string format_hamiltonian(const PauliSum& o) {
    std::ostringstream out;
    for (const auto& t : o.terms()) {
        char num[64];
        std::snprintf(num, sizeof num, "%.17g", t.coeff);
        out << num << " " << PauliSum::word(t) << "\n";
    }
    return out.str();
}

ObservableMps to_mps(const PauliSum& o, long chi_max, double cutoff) {
    if (o.terms().empty())
        throw std::invalid_argument("to_mps: observable has no terms (zero operator)");
    const long n = o.n();

    auto product_mps = [&](const PauliString& t) {
        std::vector<DenseTensor> sites;
        sites.reserve(n);
        for (long i = 0; i < n; ++i) {
            DenseTensor site({1, 4, 1});
            site.at({0, t.ops[i], 0}) = kSqrt2;
            if (i == 0)
                for (long j = 0; j < site.size(); ++j) site.data()[j] *= t.coeff;
            sites.push_back(std::move(site));
        }
        return Mps(std::move(sites));
    };

    ObservableMps out;
    out.mps = product_mps(o.terms()[0]);
    double err2 = 0;
    for (std::size_t k = 1; k < o.terms().size(); ++k) {
        out.mps = add(out.mps, product_mps(o.terms()[k]));
        if (out.mps.max_bond() > 2 * chi_max) {
            auto [m, err] = compress(std::move(out.mps), chi_max, cutoff);
            out.mps = std::move(m);
            err2 += err * err;
        }
    }
    auto [m, err] = compress(std::move(out.mps), chi_max, cutoff);
    out.mps = std::move(m);
    err2 += err * err;
    out.truncation_error = std::sqrt(err2);
    out.norm2 = std::sqrt(std::abs(inner(out.mps, out.mps).real()));
    return out;
}

Eigen::VectorXcd apply_dense(const PauliSum& o, const Eigen::VectorXcd& psi) {
    const long n = o.n();
    if (n > 12) throw std::invalid_argument("apply_dense: guarded to n <= 12");
    const long dim = 1L << n;
    if (psi.size() != dim)
        throw DataMismatchError("apply_dense: state length " + std::to_string(psi.size()) +
                                " does not match 2^" + std::to_string(n));
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
    for (const auto& t : o.terms()) {
        for (long b = 0; b < dim; ++b) {
            if (psi(b) == cplx(0)) continue;
            long b_out = 0;
            cplx phase = t.coeff;
            for (long i = 0; i < n; ++i) {
                // Site 0 is the most significant bit.
                int bit = static_cast<int>((b >> (n - 1 - i)) & 1);
                int nb;
                cplx ph;
                pauli_action(t.ops[i], bit, nb, ph);
                phase *= ph;
                b_out = (b_out << 1) | nb;
            }
            out(b_out) += phase * psi(b);
        }
    }
    return out;
}

double expectation_dense(const PauliSum& o, const Eigen::VectorXcd& psi) {
    return psi.dot(apply_dense(o, psi)).real();
}

} // namespace tnice
