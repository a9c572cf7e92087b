// Shared aliases, RNG plumbing, and small numeric helpers.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace afdm {

using cd = std::complex<double>;
using VecC = Eigen::VectorXcd;
using VecD = Eigen::VectorXd;
using MatC = Eigen::MatrixXcd;
using MatD = Eigen::MatrixXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// e^{j 2*pi*cycles}, with the argument reduced mod 1 first so large phase
// accumulations (c1*n^2 grows past 1e3 cycles) keep full double precision.
inline cd unit_phase(double cycles) {
    const double f = cycles - std::floor(cycles);
    return {std::cos(kTwoPi * f), std::sin(kTwoPi * f)};
}

inline double db_from_linear(double x) { return 10.0 * std::log10(x); }
inline double linear_from_db(double x) { return std::pow(10.0, x / 10.0); }

// --------------------------------------------------------------------------
// Deterministic RNG
// --------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable sub-stream derivation: fold tag words into the base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag,
                                 std::uint64_t index = 0) {
    std::uint64_t s = base;
    (void)splitmix64(s);
    s ^= 0x632be59bd9b4e019ULL * (tag + 1);
    (void)splitmix64(s);
    s ^= 0x9e6c63d0876a9a27ULL * (index + 1);
    std::uint64_t t = s;
    return splitmix64(t);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do { v = gen_(); } while (v >= limit);
        return v % n;
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        have_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

    // CN(0,1): unit-variance circular complex Gaussian.
    cd cnormal() {
        return {normal() * 0.7071067811865476, normal() * 0.7071067811865476};
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// --------------------------------------------------------------------------
// Constellations (PSK with Gray labelling)
// --------------------------------------------------------------------------

struct PskConstellation {
    int order = 8;

    int bits_per_symbol() const {
        int b = 0;
        for (int m = order; m > 1; m >>= 1) ++b;
        return b;
    }

    // Gray-coded point for the bit pattern `value`.
    cd map(unsigned value) const {
        const unsigned gray = value ^ (value >> 1);
        return unit_phase(static_cast<double>(gray) / order);
    }

    cd random_symbol(Rng& rng) const {
        return map(static_cast<unsigned>(rng.below(order)));
    }

    // Hard decision -> bit pattern.
    unsigned demap(cd y) const {
        double ang = std::arg(y) / kTwoPi;  // cycles
        if (ang < 0) ang += 1.0;
        int k = static_cast<int>(std::lround(ang * order)) % order;
        // invert gray code
        unsigned v = static_cast<unsigned>(k);
        for (unsigned shift = 1; shift < 32; shift <<= 1) v ^= v >> shift;
        return v;
    }
};

inline int popcount8(unsigned x) {
    int c = 0;
    for (; x; x >>= 1) c += static_cast<int>(x & 1u);
    return c;
}

// --------------------------------------------------------------------------
// Small statistics helpers
// --------------------------------------------------------------------------

// Nearest-rank percentile, p in (0, 1]: smallest value v such that at least
// p*n samples are <= v.
inline double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) throw std::invalid_argument("percentile: empty sample set");
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n));
    if (rank == 0) rank = 1;
    return samples[std::min(rank, samples.size()) - 1];
}

struct Interval {
    double lo = 0.0, hi = 0.0;
};

// Wilson score interval for a binomial proportion (95% by default).
inline Interval wilson_ci(std::uint64_t successes, std::uint64_t trials, double z = 1.959964) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (phat + z2 / (2 * n)) / denom;
    const double half = z * std::sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace afdm
