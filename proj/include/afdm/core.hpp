// AFDM signal model: chirp-subcarrier bases at symbol rate and oversampled
// rate, data/reserved subcarrier bookkeeping, and the DAFT-domain design
// vector used by the waveform optimizer.
//
// Conventions: time is handled internally in sample units (dt = 1, T = N),
// which makes every phase expression scale-invariant. The symbol_duration
// field is metadata for unit conversion at the API boundary only.
#pragma once

#include "afdm/common.hpp"

#include <cstdint>
#include <memory>

namespace afdm {

inline constexpr double kDefaultDelta = 4.442882938158366e-4;  // pi * 1e-4 * sqrt(2)

struct SubcarrierPartition {
    std::vector<int> data;      // D, sorted
    std::vector<int> reserved;  // R, sorted

    // Evenly spaced comb reservation: |R| = ceil(ratio * n) indices at
    // floor(i*n/|R|). Index 0 lands in R whenever |R| > 0.
    static SubcarrierPartition comb(int n, double rcs_ratio);
    static SubcarrierPartition full_data(int n);

    void validate(int n) const;  // D and R disjoint, union = {0..n-1}
    std::vector<bool> reserved_mask(int n) const;
};

struct AfdmConfig {
    int n = 128;                  // subcarrier count, even
    double c1 = 21.0 / 256.0;     // post-chirp parameter, 2*n*c1 integer
    int oversampling = 4;         // L_P
    double symbol_duration = 1.0; // T (seconds); internals use sample units
    int alphabet_size = 8;        // Q = L_phi
    double phi0 = 0.0;            // pre-chirp phase offset
    double delta = kDefaultDelta; // small irrational rotation
    SubcarrierPartition partition = SubcarrierPartition::comb(128, 0.2);

    // Recorded in run metadata only; all computation is in normalized units.
    double carrier_ghz = 28.0;
    double bandwidth_mhz = 100.0;

    void validate() const;
    int wrap_count() const;  // C = 2*n*c1
    double dt() const { return symbol_duration / n; }
};

// Pre-chirp phase alphabet on subcarrier m: the octagonal (Q-point) set
// { e^{j(phi0 + delta + l*2pi/Q)} }. Subcarrier 0 collapses to {1} because
// e^{j 2 pi c2 m^2} = 1 at m = 0 for every c2.
std::vector<cd> build_prechirp_alphabet(const AfdmConfig& cfg, int m);

// Single alphabet point (vertex `index` of subcarrier m's alphabet).
cd prechirp_point(const AfdmConfig& cfg, int index, int m);

// Frequency-wrapping index q for subcarrier m at time t in [0, T): largest q
// with t_{m,q} <= t, where t_{m,q} solves c1*th^2 + (m/n)*th = q in sample
// units th = t/dt.
int wrap_index(const AfdmConfig& cfg, int m, double t);

// Wrap boundary t_{m,q} in seconds (q = 0 gives 0).
double wrap_boundary(const AfdmConfig& cfg, int m, int q);

// DAFT-domain design variable. Data symbols x live in `symbols`; on D they
// multiply the chirp basis through B = diag(b), on R they are absorbed into
// u itself, so u[m] = prechirp phase on D and prechirp phase * x[m] on R.
struct DesignVector {
    VecC u;                           // length n, ||u||^2 = n
    VecC symbols;                     // x[m] for all m (R entries = seed draws)
    std::vector<int> prechirp_index;  // per-m alphabet index, -1 if relaxed
    SubcarrierPartition partition;

    VecC b() const;  // b[m] = x[m] on D, 1 on R
    void validate(const AfdmConfig& cfg) const;
};

// Static per-config chirp bases (independent of data and pre-chirp choice):
//   e[n,m]  = (1/sqrt(n))      e^{j2pi (c1 n^2 + n m / N)}
//   ep[k,m] = (1/sqrt(n*L_P))  e^{j2pi (c1 th^2 + m th / N - q_m(th) th)},
// th = k / L_P. Built once per AfdmConfig and shared read-only.
class ChirpBasis {
public:
    explicit ChirpBasis(const AfdmConfig& cfg);

    const AfdmConfig& cfg() const { return cfg_; }
    const MatC& e() const { return e_; }
    const MatC& ep() const { return ep_; }

    // Modulation matrix A = Lambda_c1 F^H Lambda_c2 for a given per-subcarrier
    // pre-chirp phase vector (entries of Lambda_c2's diagonal).
    MatC modulation_matrix(const VecC& prechirp_phase) const;

    // Phi = Lambda_c1 F^H B and Phi^(P), column-scaled copies of the bases.
    MatC phi(const VecC& b) const;
    MatC phi_oversampled(const VecC& b) const;

private:
    AfdmConfig cfg_;
    MatC e_;   // n x n
    MatC ep_;  // n*L_P x n
};

struct ModulationMatrices {
    MatC a;          // n x n, receiver-side DAFT matrix
    MatC phi;        // n x n
    MatC phi_p;      // n*L_P x n
    VecD row_norms;  // ||row_k(phi_p)||^2
};

ModulationMatrices build_modulation_matrices(const ChirpBasis& basis,
                                             const VecC& prechirp_phase,
                                             const VecC& b);

// s = Phi u (time samples at symbol rate).
VecC synthesize(const MatC& phi, const VecC& u);
VecC synthesize(const ChirpBasis& basis, const DesignVector& dv);

// s~ = Phi^(P) u (L_P-fold oversampled samples). Satisfies
// sqrt(L_P) * s~[L_P n] = s[n].
VecC synthesize_oversampled(const MatC& phi_p, const VecC& u);
VecC synthesize_oversampled(const ChirpBasis& basis, const DesignVector& dv);

// |D| / (N + B_SI / log2|X|), with B_SI = |D| log2(L_phi) when the per-
// subcarrier pre-chirp parameters are optimized (side information), else 0.
double effective_spectral_efficiency(const AfdmConfig& cfg, int constellation_bits,
                                     bool prechirp_optimized);

}  // namespace afdm
