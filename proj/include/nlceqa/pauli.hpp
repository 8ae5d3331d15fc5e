#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nlceqa {

using cplx = std::complex<double>;

/// Maximum register width supported by the bit-mask representation.
inline constexpr int max_qubits = 24;

/// Phase-free tensor product of single-qubit Paulis, stored as X/Z bit masks.
/// Bit q of the masks refers to qubit q; Y sets both bits.
class PauliString {
  public:
    PauliString() = default;
    explicit PauliString(int n) : n_(n) { check_width(n); }
    PauliString(int n, std::uint64_t xmask, std::uint64_t zmask) : n_(n), x_(xmask), z_(zmask) {
        check_width(n);
        const std::uint64_t all = n == 64 ? ~0ull : (1ull << n) - 1;
        if((x_ | z_) & ~all) throw std::invalid_argument("PauliString: mask exceeds qubit count");
    }

    /// Parses "XIZY": character q is the letter on qubit q.
    static PauliString parse(std::string_view text) {
        PauliString p(static_cast<int>(text.size()));
        for(int q = 0; q < p.n_; ++q) p.set(q, text[static_cast<std::size_t>(q)]);
        return p;
    }

    /// Single- or multi-site string, e.g. on(5, {{0,'X'},{1,'X'}}).
    static PauliString on(int n, std::initializer_list<std::pair<int, char>> letters) {
        PauliString p(n);
        for(auto [q, c] : letters) p.set(q, c);
        return p;
    }

    void set(int q, char letter) {
        if(q < 0 || q >= n_) throw std::out_of_range("PauliString: qubit index " + std::to_string(q));
        const std::uint64_t bit = 1ull << q;
        x_ &= ~bit;
        z_ &= ~bit;
        switch(letter) {
            case 'I': break;
            case 'X': x_ |= bit; break;
            case 'Z': z_ |= bit; break;
            case 'Y': x_ |= bit; z_ |= bit; break;
            default: throw std::invalid_argument(std::string("PauliString: bad letter '") + letter + "'");
        }
    }

    [[nodiscard]] char letter(int q) const {
        const bool x = (x_ >> q) & 1u, z = (z_ >> q) & 1u;
        return x ? (z ? 'Y' : 'X') : (z ? 'Z' : 'I');
    }

    [[nodiscard]] int size() const noexcept { return n_; }
    [[nodiscard]] std::uint64_t xmask() const noexcept { return x_; }
    [[nodiscard]] std::uint64_t zmask() const noexcept { return z_; }
    [[nodiscard]] std::uint64_t support() const noexcept { return x_ | z_; }
    [[nodiscard]] int weight() const noexcept { return std::popcount(support()); }
    [[nodiscard]] int y_count() const noexcept { return std::popcount(x_ & z_); }
    [[nodiscard]] bool is_identity() const noexcept { return support() == 0; }

    [[nodiscard]] std::vector<int> support_qubits() const {
        std::vector<int> out;
        for(int q = 0; q < n_; ++q)
            if((support() >> q) & 1u) out.push_back(q);
        return out;
    }

    [[nodiscard]] std::string str() const {
        std::string s(static_cast<std::size_t>(n_), 'I');
        for(int q = 0; q < n_; ++q) s[static_cast<std::size_t>(q)] = letter(q);
        return s;
    }

    /// Action on a computational basis state: P|b> = phase(b) |b ^ xmask>.
    [[nodiscard]] cplx phase_on(std::uint64_t b) const noexcept {
        static constexpr cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        const int sign = std::popcount(b & z_) & 1;
        const cplx ph = ipow[y_count() & 3];
        return sign ? -ph : ph;
    }

    [[nodiscard]] bool commutes_with(const PauliString &o) const noexcept {
        return ((std::popcount(x_ & o.z_) + std::popcount(z_ & o.x_)) & 1) == 0;
    }

    /// Qubit-wise commutation: on every qubit the letters agree or one is I.
    [[nodiscard]] bool qubitwise_commutes_with(const PauliString &o) const noexcept {
        const std::uint64_t both = support() & o.support();
        return ((x_ ^ o.x_) & both) == 0 && ((z_ ^ o.z_) & both) == 0;
    }

    friend bool operator==(const PauliString &, const PauliString &) = default;
    friend auto operator<=>(const PauliString &a, const PauliString &b) {
        return std::tie(a.n_, a.x_, a.z_) <=> std::tie(b.n_, b.x_, b.z_);
    }

  private:
    static void check_width(int n) {
        if(n < 0 || n > max_qubits) throw std::invalid_argument("PauliString: unsupported width " + std::to_string(n));
    }

    int n_ = 0;
    std::uint64_t x_ = 0;
    std::uint64_t z_ = 0;
};

/// Product a*b = phase * c, with phase in {±1, ±i}.
inline std::pair<cplx, PauliString> multiply(const PauliString &a, const PauliString &b) {
    if(a.size() != b.size()) throw std::invalid_argument("multiply: width mismatch");
    // Per-qubit letter products; exponent of i accumulated mod 4.
    int iexp = 0;
    for(int q = 0; q < a.size(); ++q) {
        const char la = a.letter(q), lb = b.letter(q);
        if(la == 'I' || lb == 'I' || la == lb) continue;
        // XY = iZ, YZ = iX, ZX = iY; reversed order gives -i.
        const bool cyclic = (la == 'X' && lb == 'Y') || (la == 'Y' && lb == 'Z') || (la == 'Z' && lb == 'X');
        iexp += cyclic ? 1 : 3;
    }
    static constexpr cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return {ipow[iexp & 3], PauliString(a.size(), a.xmask() ^ b.xmask(), a.zmask() ^ b.zmask())};
}

/// Real linear combination of Pauli strings. Hermitian by construction.
class Observable {
  public:
    struct Term {
        double coeff;
        PauliString string;
    };

    Observable() = default;
    explicit Observable(int n) : n_(n) {}

    /// Adds a term; duplicates are merged in place, keeping first-insertion order.
    Observable &add(double coeff, const PauliString &s) {
        if(!std::isfinite(coeff)) throw std::invalid_argument("Observable: non-finite coefficient");
        if(s.size() != n_) throw std::invalid_argument("Observable: string width mismatch");
        for(auto &t : terms_)
            if(t.string == s) {
                t.coeff += coeff;
                return *this;
            }
        terms_.push_back({coeff, s});
        return *this;
    }
    Observable &add(double coeff, std::string_view s) { return add(coeff, PauliString::parse(s)); }

    /// Drops terms whose merged coefficient is exactly zero.
    Observable &prune(double tol = 0.0) {
        std::erase_if(terms_, [tol](const Term &t) { return std::abs(t.coeff) <= tol; });
        return *this;
    }

    [[nodiscard]] int num_qubits() const noexcept { return n_; }
    [[nodiscard]] const std::vector<Term> &terms() const noexcept { return terms_; }
    [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
    [[nodiscard]] bool empty() const noexcept { return terms_.empty(); }

    /// Sum of absolute coefficients.
    [[nodiscard]] double coefficient_norm() const {
        double s = 0;
        for(const auto &t : terms_) s += std::abs(t.coeff);
        return s;
    }

    /// Coefficient of the identity string (tr(O)/2^N).
    [[nodiscard]] double identity_coefficient() const {
        double s = 0;
        for(const auto &t : terms_)
            if(t.string.is_identity()) s += t.coeff;
        return s;
    }

    /// True when all strings are pairwise qubit-wise commuting (one measurement basis).
    [[nodiscard]] bool is_qubitwise_commuting() const {
        for(std::size_t a = 0; a < terms_.size(); ++a)
            for(std::size_t b = a + 1; b < terms_.size(); ++b)
                if(!terms_[a].string.qubitwise_commutes_with(terms_[b].string)) return false;
        return true;
    }

    /// Per-qubit measurement letter of a qubit-wise commuting group ('I' = unmeasured, read in Z).
    [[nodiscard]] std::string measurement_basis() const {
        if(!is_qubitwise_commuting()) throw std::invalid_argument("Observable: terms are not qubit-wise commuting");
        std::string basis(static_cast<std::size_t>(n_), 'I');
        for(const auto &t : terms_)
            for(int q = 0; q < n_; ++q)
                if(t.string.letter(q) != 'I') basis[static_cast<std::size_t>(q)] = t.string.letter(q);
        return basis;
    }

    friend Observable operator+(Observable a, const Observable &b) {
        for(const auto &t : b.terms_) a.add(t.coeff, t.string);
        return a;
    }
    friend Observable operator*(double s, Observable a) {
        for(auto &t : a.terms_) t.coeff *= s;
        return a;
    }

  private:
    int n_ = 0;
    std::vector<Term> terms_;
};

/// Complex linear combination of Pauli strings, e.g. a product or commutator of observables.
class PauliSum {
  public:
    PauliSum() = default;
    explicit PauliSum(int n) : n_(n) {}
    explicit PauliSum(const Observable &o) : n_(o.num_qubits()) {
        for(const auto &t : o.terms()) add(t.coeff, t.string);
    }

    PauliSum &add(cplx c, const PauliString &s) {
        if(s.size() != n_) throw std::invalid_argument("PauliSum: string width mismatch");
        terms_[s] += c;
        return *this;
    }

    [[nodiscard]] int num_qubits() const noexcept { return n_; }
    [[nodiscard]] const std::map<PauliString, cplx> &terms() const noexcept { return terms_; }

    [[nodiscard]] double max_abs_coefficient() const {
        double m = 0;
        for(const auto &[s, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    [[nodiscard]] bool is_hermitian(double tol = 1e-12) const {
        return std::ranges::all_of(terms_, [tol](const auto &kv) { return std::abs(kv.second.imag()) <= tol; });
    }

    /// Converts to an Observable; rejects non-Hermitian sums.
    [[nodiscard]] Observable to_observable(double tol = 1e-12) const {
        if(!is_hermitian(tol)) throw std::invalid_argument("PauliSum: operator is not Hermitian");
        Observable o(n_);
        for(const auto &[s, c] : terms_)
            if(c.real() != 0.0) o.add(c.real(), s);
        return o;
    }

    friend PauliSum operator*(const PauliSum &a, const PauliSum &b) {
        if(a.n_ != b.n_) throw std::invalid_argument("PauliSum: width mismatch");
        PauliSum out(a.n_);
        for(const auto &[sa, ca] : a.terms_)
            for(const auto &[sb, cb] : b.terms_) {
                auto [ph, s] = multiply(sa, sb);
                out.add(ca * cb * ph, s);
            }
        return out;
    }
    friend PauliSum operator-(const PauliSum &a, const PauliSum &b) {
        PauliSum out = a;
        for(const auto &[s, c] : b.terms_) out.add(-c, s);
        return out;
    }

  private:
    int n_ = 0;
    std::map<PauliString, cplx> terms_;
};

inline PauliSum commutator(const Observable &a, const Observable &b) {
    const PauliSum pa(a), pb(b);
    return pa * pb - pb * pa;
}

/// Splits an observable into qubit-wise commuting groups (greedy, first fit, order preserving).
inline std::vector<Observable> measurement_groups(const Observable &obs) {
    std::vector<Observable> groups;
    for(const auto &t : obs.terms()) {
        if(t.string.is_identity()) continue;
        bool placed = false;
        for(auto &g : groups) {
            const bool fits = std::ranges::all_of(
                g.terms(), [&](const Observable::Term &u) { return u.string.qubitwise_commutes_with(t.string); });
            if(fits) {
                g.add(t.coeff, t.string);
                placed = true;
                break;
            }
        }
        if(!placed) groups.emplace_back(obs.num_qubits()).add(t.coeff, t.string);
    }
    return groups;
}

// JSON: [{"coeff": c, "string": "XIZ"}, ...]

inline nlohmann::json to_json(const Observable &o) {
    auto arr = nlohmann::json::array();
    for(const auto &t : o.terms()) arr.push_back({{"coeff", t.coeff}, {"string", t.string.str()}});
    return arr;
}

inline Observable observable_from_json(const nlohmann::json &j) {
    if(!j.is_array()) throw std::invalid_argument("observable JSON must be an array");
    if(j.empty()) throw std::invalid_argument("observable JSON is empty; qubit count unknown");
    const auto n = static_cast<int>(j.front().at("string").get<std::string>().size());
    Observable o(n);
    for(const auto &e : j) o.add(e.at("coeff").get<double>(), e.at("string").get<std::string>());
    return o;
}

} // namespace nlceqa
