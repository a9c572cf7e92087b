#include "afdm/core.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace afdm {

SubcarrierPartition SubcarrierPartition::comb(int n, double rcs_ratio) {
    if (n <= 0) throw std::invalid_argument("partition: n must be positive");
    if (rcs_ratio < 0.0 || rcs_ratio > 1.0)
        throw std::invalid_argument("partition: rcs_ratio must lie in [0, 1]");
    const int nr = static_cast<int>(std::ceil(rcs_ratio * n - 1e-12));
    SubcarrierPartition p;
    std::vector<bool> mask(n, false);
    for (int i = 0; i < nr; ++i) {
        const int idx = static_cast<int>(static_cast<long long>(i) * n / nr);
        mask[idx] = true;
    }
    for (int m = 0; m < n; ++m) {
        (mask[m] ? p.reserved : p.data).push_back(m);
    }
    return p;
}

SubcarrierPartition SubcarrierPartition::full_data(int n) {
    SubcarrierPartition p;
    p.data.resize(n);
    for (int m = 0; m < n; ++m) p.data[m] = m;
    return p;
}

void SubcarrierPartition::validate(int n) const {
    std::vector<int> seen(n, 0);
    for (int m : data) {
        if (m < 0 || m >= n) throw std::invalid_argument("partition: index out of range");
        ++seen[m];
    }
    for (int m : reserved) {
        if (m < 0 || m >= n) throw std::invalid_argument("partition: index out of range");
        ++seen[m];
    }
    for (int m = 0; m < n; ++m) {
        if (seen[m] != 1)
            throw std::invalid_argument("partition: D and R must partition {0..n-1}");
    }
}

std::vector<bool> SubcarrierPartition::reserved_mask(int n) const {
    std::vector<bool> mask(n, false);
    for (int m : reserved) mask[m] = true;
    return mask;
}

void AfdmConfig::validate() const {
    if (n <= 0 || n % 2 != 0) throw std::invalid_argument("config: n must be positive and even");
    if (oversampling < 1) throw std::invalid_argument("config: oversampling must be >= 1");
    if (symbol_duration <= 0) throw std::invalid_argument("config: symbol duration must be positive");
    if (alphabet_size < 1) throw std::invalid_argument("config: alphabet size must be >= 1");
    const double c = 2.0 * n * c1;
    if (c < -1e-9 || std::abs(c - std::round(c)) > 1e-9)
        throw std::invalid_argument("config: 2*n*c1 must be a nonnegative integer (CP-equivalent regime)");
    partition.validate(n);
}

int AfdmConfig::wrap_count() const {
    return static_cast<int>(std::llround(2.0 * n * c1));
}

std::vector<cd> build_prechirp_alphabet(const AfdmConfig& cfg, int m) {
    if (m < 0 || m >= cfg.n) throw std::invalid_argument("alphabet: subcarrier out of range");
    if (m == 0) return {cd{1.0, 0.0}};
    std::vector<cd> pts;
    pts.reserve(cfg.alphabet_size);
    for (int l = 0; l < cfg.alphabet_size; ++l) {
        const double phase = cfg.phi0 + cfg.delta + l * (kTwoPi / cfg.alphabet_size);
        pts.push_back(unit_phase(phase / kTwoPi));
    }
    return pts;
}

cd prechirp_point(const AfdmConfig& cfg, int index, int m) {
    if (m == 0) return cd{1.0, 0.0};
    if (index < 0 || index >= cfg.alphabet_size)
        throw std::invalid_argument("alphabet: index out of range");
    const double phase = cfg.phi0 + cfg.delta + index * (kTwoPi / cfg.alphabet_size);
    return unit_phase(phase / kTwoPi);
}

double wrap_boundary(const AfdmConfig& cfg, int m, int q) {
    if (q == 0) return 0.0;
    // Positive root of c1 th^2 + (m/n) th = q (sample units), scaled back by dt.
    const double b = static_cast<double>(m) / cfg.n;
    double th;
    if (cfg.c1 > 0.0) {
        th = (-b + std::sqrt(b * b + 4.0 * cfg.c1 * q)) / (2.0 * cfg.c1);
    } else {
        th = (b > 0.0) ? q / b : std::numeric_limits<double>::infinity();
    }
    return th * cfg.dt();
}

int wrap_index(const AfdmConfig& cfg, int m, double t) {
    if (m < 0 || m >= cfg.n) throw std::invalid_argument("wrap_index: subcarrier out of range");
    if (t < 0.0 || t >= cfg.symbol_duration)
        throw std::out_of_range("wrap_index: t outside [0, T)");
    const int c = cfg.wrap_count();
    int q = 0;
    while (q < c && wrap_boundary(cfg, m, q + 1) <= t) ++q;
    return q;
}

ChirpBasis::ChirpBasis(const AfdmConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int n = cfg_.n;
    const int lp = cfg_.oversampling;
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    e_.resize(n, n);
    for (int m = 0; m < n; ++m) {
        for (int k = 0; k < n; ++k) {
            const double cycles = cfg_.c1 * k * k + static_cast<double>(k) * m / n;
            e_(k, m) = inv_sqrt_n * unit_phase(cycles);
        }
    }

    const int nl = n * lp;
    const double inv_sqrt_nl = 1.0 / std::sqrt(static_cast<double>(nl));
    const int c = cfg_.wrap_count();
    ep_.resize(nl, n);
    for (int m = 0; m < n; ++m) {
        // Wrap boundaries in sample units for column m.
        std::vector<double> bounds(c + 1, 0.0);
        for (int q = 1; q <= c; ++q) {
            const double b = static_cast<double>(m) / n;
            bounds[q] = (-b + std::sqrt(b * b + 4.0 * cfg_.c1 * q)) / (2.0 * cfg_.c1);
        }
        int q = 0;
        for (int k = 0; k < nl; ++k) {
            const double th = static_cast<double>(k) / lp;
            while (q < c && bounds[q + 1] <= th) ++q;
            const double cycles = cfg_.c1 * th * th + th * m / n - static_cast<double>(q) * th;
            ep_(k, m) = inv_sqrt_nl * unit_phase(cycles);
        }
        // q is monotone in th; reset for the next column.
    }
}

MatC ChirpBasis::modulation_matrix(const VecC& prechirp_phase) const {
    if (prechirp_phase.size() != cfg_.n)
        throw std::invalid_argument("modulation_matrix: phase vector size mismatch");
    return e_ * prechirp_phase.asDiagonal();
}

MatC ChirpBasis::phi(const VecC& b) const {
    if (b.size() != cfg_.n) throw std::invalid_argument("phi: b size mismatch");
    return e_ * b.asDiagonal();
}

MatC ChirpBasis::phi_oversampled(const VecC& b) const {
    if (b.size() != cfg_.n) throw std::invalid_argument("phi_oversampled: b size mismatch");
    return ep_ * b.asDiagonal();
}

VecC DesignVector::b() const {
    VecC out = symbols;
    for (int m : partition.reserved) out[m] = cd{1.0, 0.0};
    return out;
}

void DesignVector::validate(const AfdmConfig& cfg) const {
    if (u.size() != cfg.n || symbols.size() != cfg.n)
        throw std::invalid_argument("design vector: size mismatch");
    partition.validate(cfg.n);
    const double energy = u.squaredNorm();
    if (std::abs(energy - cfg.n) > 1e-9 * cfg.n)
        throw std::invalid_argument("design vector: ||u||^2 must equal n");
}

ModulationMatrices build_modulation_matrices(const ChirpBasis& basis,
                                             const VecC& prechirp_phase,
                                             const VecC& b) {
    ModulationMatrices mm;
    mm.a = basis.modulation_matrix(prechirp_phase);
    mm.phi = basis.phi(b);
    mm.phi_p = basis.phi_oversampled(b);
    mm.row_norms = mm.phi_p.rowwise().squaredNorm();
    return mm;
}

VecC synthesize(const MatC& phi, const VecC& u) {
    if (phi.cols() != u.size()) throw std::invalid_argument("synthesize: dimension mismatch");
    return phi * u;
}

VecC synthesize(const ChirpBasis& basis, const DesignVector& dv) {
    return basis.phi(dv.b()) * dv.u;
}

VecC synthesize_oversampled(const MatC& phi_p, const VecC& u) {
    if (phi_p.cols() != u.size())
        throw std::invalid_argument("synthesize_oversampled: dimension mismatch");
    return phi_p * u;
}

VecC synthesize_oversampled(const ChirpBasis& basis, const DesignVector& dv) {
    return basis.phi_oversampled(dv.b()) * dv.u;
}

double effective_spectral_efficiency(const AfdmConfig& cfg, int constellation_bits,
                                     bool prechirp_optimized) {
    if (constellation_bits < 1)
        throw std::invalid_argument("spectral efficiency: constellation bits must be >= 1");
    const double nd = static_cast<double>(cfg.partition.data.size());
    if (nd == 0.0) return 0.0;
    const double side_bits =
        prechirp_optimized ? nd * std::log2(static_cast<double>(cfg.alphabet_size)) : 0.0;
    return nd / (cfg.n + side_bits / constellation_bits);
}

}  // namespace afdm
