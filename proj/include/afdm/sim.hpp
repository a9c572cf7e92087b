// System-level evaluation: Rapp PA with input back-off, AWGN and doubly
// selective channels, DAFT-domain MMSE reception, matched-filter range-Doppler
// maps with CA-CFAR detection, and the Monte Carlo drivers for Pd/ROC/BER.
#pragma once

#include "afdm/baselines.hpp"
#include "afdm/metrics.hpp"

#include <functional>
#include <optional>

namespace afdm {

// ---------------------------------------------------------------------------
// Power amplifier
// ---------------------------------------------------------------------------

// Memoryless AM-AM saturation: out = in / (1 + (|in|/A_sat)^(2p))^(1/(2p)).
struct RappPa {
    double a_sat = 1.0;
    double p = 2.0;

    cd amplify(cd x) const {
        const double a_in = std::abs(x);
        if (a_in == 0.0) return x;
        const double g = std::pow(1.0 + std::pow(a_in / a_sat, 2.0 * p), -0.5 / p);
        return x * g;
    }
    VecC amplify(const VecC& samples) const;
};

// Choose A_sat so that 10 log10(A_sat^2 / P_in) = ibo_db with P_in the
// empirical mean input power. The samples pass through unscaled.
RappPa rapp_for_ibo(const VecC& pa_input, double ibo_db, double smoothness = 2.0);

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

struct ChannelPath {
    cd gain;
    int delay = 0;      // samples
    double doppler = 0; // normalized
};

struct ChannelRealization {
    std::vector<ChannelPath> paths;
};

ChannelRealization identity_channel();

// Random three-ish-path channel: gains CN(0, p_k) with the dB profile
// normalized to unit total power, integer delays uniform in [0, cp_len),
// Doppler uniform in [-doppler_span, doppler_span].
ChannelRealization draw_channel(Rng& rng, const std::vector<double>& profile_db,
                                int cp_len, double doppler_span);

// y = sum_k h_k J_{tau_k} D(mu_k) s (noiseless; CP-cyclic model).
// Throws if a path delay reaches cp_len.
VecC doubly_selective_apply(const VecC& s, const ChannelRealization& chan, int cp_len);

// DAFT-domain per-symbol estimates: xhat = (G^H G + sigma2 I)^{-1} G^H y with
// G = (sum_k h_k J D) A. sigma2 = 0 requires full-rank G (else throws).
VecC mmse_receive(const VecC& y, const ChannelRealization& chan, const MatC& a,
                  double sigma2);

// ---------------------------------------------------------------------------
// Sensing
// ---------------------------------------------------------------------------

// Matched-filter map: cell(ti, mi) = |<J_tau D(mu) s_ref, y>|^2.
MatD range_doppler_map(const VecC& s_ref, const VecC& y, const std::vector<int>& tau_grid,
                       const std::vector<double>& mu_grid);

struct CfarConfig {
    int guard = 2;     // guard cells per dimension
    int train = 8;     // training cells per dimension
    double pfa = 1e-3; // nominal false-alarm probability

    int training_cell_count() const {
        const int outer = 2 * (guard + train) + 1;
        const int inner = 2 * guard + 1;
        return outer * outer - inner * inner;
    }
    // alpha = N_t (pfa^{-1/N_t} - 1)
    double threshold_factor() const {
        const double nt = training_cell_count();
        return nt * (std::pow(pfa, -1.0 / nt) - 1.0);
    }
};

// Cell-averaging CFAR with cyclic wrap at the map edges.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> ca_cfar(const MatD& map,
                                                           const CfarConfig& cfg);

// ---------------------------------------------------------------------------
// Monte Carlo drivers
// ---------------------------------------------------------------------------

// A transmit-ready waveform with everything the receiver needs.
struct WaveformEntry {
    VecC oversampled;          // s~ = Phi^(P) u
    VecC prechirp_phase;       // receiver-side Lambda_c2 diagonal
    VecC symbols;              // ground-truth x
    SubcarrierPartition partition;
};

using WaveformPool = std::vector<WaveformEntry>;

struct DetectionScenario {
    int weak_tau = 3;
    double weak_mu = 2.0;
    int strong_tau = 6;
    double strong_mu = -2.0;
    double strong_gain_db = 10.0;  // strong minus weak, in dB
    std::vector<double> snr_grid_db = {-20, -17, -14, -11, -8, -5};
    int trials = 2000;
    CfarConfig cfar;
    int map_doppler_halfspan = 10;
    std::uint64_t seed = 1;
};

struct PdPoint {
    double snr_db = 0.0;
    double pd = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

// Weak-target detection rate vs SNR for one waveform source; trials share the
// seed schedule so different sources can be compared pairwise.
std::vector<PdPoint> run_detection_mc(const DetectionScenario& sc, const WaveformPool& pool);

struct RocPoint {
    double pfa = 0.0;
    double pd = 0.0;
};

std::vector<RocPoint> run_detection_roc(const DetectionScenario& sc, const WaveformPool& pool,
                                        double snr_db, const std::vector<double>& pfa_grid);

// Empirical CFAR false-alarm rate on noise-only maps.
double cfar_noise_pfa(const CfarConfig& cfg, const VecC& s_ref, int doppler_halfspan,
                      int maps, std::uint64_t seed);

enum class ChannelKind { awgn, doubly_selective };

struct BerScenario {
    std::vector<double> snr_grid_db = {6, 8, 10, 12, 14, 16, 18};
    std::uint64_t min_bits = 100000;
    std::uint64_t max_frames = 2000000;
    ChannelKind channel = ChannelKind::awgn;
    std::vector<double> profile_db = {0.0, -5.0, -10.0};
    int cp_len = 16;
    double doppler_span = 2.0;
    bool fixed_channel = false;            // one realization per SNR point
    std::optional<double> ibo_db = 0.0;    // nullopt = ideal linear PA
    double pa_smoothness = 2.0;
    PskConstellation constellation{8};
    std::uint64_t seed = 1;
};

struct BerPoint {
    double snr_db = 0.0;
    double ber = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
};

std::vector<BerPoint> run_ber_mc(const BerScenario& sc, const ChirpBasis& basis,
                                 const WaveformPool& pool);

// Pool construction helper: PA (optional) + decimation + unit-power transmit
// samples for one entry.
VecC transmit_samples(const WaveformEntry& wf, int oversampling,
                      std::optional<double> ibo_db, double pa_smoothness);

WaveformEntry waveform_entry_from_design(const ChirpBasis& basis, const DesignVector& dv);

}  // namespace afdm
