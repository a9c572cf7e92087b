// Ambiguity-function evaluation on the low-ambiguity-zone grid, weighted ISL,
// oversampled PAPR, CCDF statistics, and the precomputed quadratic-form
// matrices consumed by the MM optimizer.
#pragma once

#include "afdm/core.hpp"

namespace afdm {

// Delay-Doppler sampling set A: tau in [-tau_max, tau_max] integer, Doppler on
// an l_mu-point grid over [mu_min, mu_max], excluding (0, 0).
struct LazSpec {
    int tau_max = 8;
    double mu_min = -4.0;
    double mu_max = 4.0;
    int l_mu = 9;
    std::vector<double> weights;  // per cell; empty = all ones

    struct Cell {
        int tau;
        double mu;
        double w;
    };

    double delta_mu() const {
        return l_mu > 1 ? (mu_max - mu_min) / (l_mu - 1) : 0.0;
    }
    // Cells in fixed (tau-major, Doppler-minor) order, (0,0) removed.
    std::vector<Cell> cells() const;
    void validate() const;
};

// A_{tau,mu} = s^H J_tau D(mu) s, evaluated in O(N) without forming matrices:
// sum_k e^{-j2pi mu k/N} s[k] conj(s[(k+tau) mod N]).
cd ambiguity(const VecC& s, int tau, double mu);

// J_tau D(mu) s: cyclic delay by tau samples after the Doppler ramp.
VecC delay_doppler_apply(const VecC& s, int tau, double mu);

struct AfGrid {
    LazSpec laz;
    std::vector<cd> values;  // aligned with laz.cells()
};

AfGrid af_grid(const VecC& s, const LazSpec& laz);

// Weighted ISL straight from time samples (used by `evaluate`, independent of
// the optimizer's cached-matrix path).
double weighted_isl_of_samples(const VecC& s, const LazSpec& laz);

struct PaprReport {
    double papr_db = 0.0;
    double peak = 0.0;  // max_n |s~[n]|^2
    double avg = 0.0;   // mean_n |s~[n]|^2
};

PaprReport papr_of_samples(const VecC& oversampled);

// Empirical Pr(PAPR > gamma) per threshold; monotone non-increasing.
std::vector<double> ccdf(const std::vector<double>& papr_samples_db,
                         const std::vector<double>& thresholds_db);

// Precomputed quadratic forms for one (config, data realization, LAZ) triple:
//   C_{tau,mu} = Phi^H J_tau D(mu) Phi            (ISL block)
//   G_k = phi_p^H e_k e_k^H phi_p (rank one, kept as rows of phi_p)
//   R   = (1/(N L_P)) Phi^(P)H Phi^(P)            (PAPR block)
// plus norm summaries used for the majorizer eigenvalue bounds.
struct QuadFormCache {
    AfdmConfig cfg;
    VecC b;

    // PAPR block (always present)
    MatC phi;
    MatC phi_p;
    MatC r_mat;
    VecD row_norms;  // r_k = ||row_k(phi_p)||^2
    MatD row_gram;   // |<row_k, row_l>|^2 of phi_p rows

    // ISL block (present iff has_isl)
    bool has_isl = false;
    LazSpec laz;
    std::vector<LazSpec::Cell> cells;  // laz.cells(), precomputed
    std::vector<MatC> c_mats;
    VecD c_frob2;          // ||C||_F^2 per cell
    double lambda_j = 0.0; // upper bound for lambda_max of the lifted ISL matrix
    double lambda_j_trace = 0.0;  // sum_w ||C||_F^2 (trace bound)

    int n() const { return cfg.n; }
    int nl() const { return cfg.n * cfg.oversampling; }
};

// Full cache (ISL + PAPR blocks). Throws std::length_error when the C-matrix
// storage would exceed `mem_budget_bytes`.
QuadFormCache build_quadform_cache(const ChirpBasis& basis, const LazSpec& laz,
                                   const VecC& b,
                                   std::size_t mem_budget_bytes = std::size_t{2} << 30);

// PAPR-only cache (no LAZ needed), for papr_min runs.
QuadFormCache build_papr_cache(const ChirpBasis& basis, const VecC& b);

// sum_cells w |u^H C u|^2 via the cached matrices.
double weighted_isl(const VecC& u, const QuadFormCache& cache);

// Per-cell quadratic forms zeta = u^H C u, computed in O(|A| N) through the
// synthesized waveform (identical to the cached-matrix values).
std::vector<cd> af_quadforms(const QuadFormCache& cache, const VecC& u);

// max_k p_k(u) / (u^H R u), in dB plus the linear peak/average report.
PaprReport papr(const VecC& u, const QuadFormCache& cache);

void check_cache_compatible(const QuadFormCache& cache, const VecC& u);

}  // namespace afdm
