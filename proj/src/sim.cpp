#include "afdm/sim.hpp"

#include <cmath>

namespace afdm {

VecC RappPa::amplify(const VecC& samples) const {
    VecC out(samples.size());
    for (Eigen::Index k = 0; k < samples.size(); ++k) out[k] = amplify(samples[k]);
    return out;
}

RappPa rapp_for_ibo(const VecC& pa_input, double ibo_db, double smoothness) {
    if (pa_input.size() == 0) throw std::invalid_argument("ibo: empty input");
    const double p_in = pa_input.squaredNorm() / static_cast<double>(pa_input.size());
    if (p_in <= 0.0) throw std::invalid_argument("ibo: zero-power input");
    RappPa pa;
    pa.p = smoothness;
    pa.a_sat = std::sqrt(p_in * linear_from_db(ibo_db));
    return pa;
}

ChannelRealization identity_channel() {
    ChannelRealization chan;
    chan.paths.push_back({cd{1.0, 0.0}, 0, 0.0});
    return chan;
}

ChannelRealization draw_channel(Rng& rng, const std::vector<double>& profile_db,
                                int cp_len, double doppler_span) {
    if (profile_db.empty()) throw std::invalid_argument("channel: empty power profile");
    double total = 0.0;
    for (double p : profile_db) total += linear_from_db(p);
    ChannelRealization chan;
    for (double p : profile_db) {
        ChannelPath path;
        const double var = linear_from_db(p) / total;
        path.gain = std::sqrt(var) * rng.cnormal();
        path.delay = static_cast<int>(rng.below(static_cast<std::uint64_t>(cp_len)));
        path.doppler = doppler_span * (2.0 * rng.uniform() - 1.0);
        chan.paths.push_back(path);
    }
    return chan;
}

VecC doubly_selective_apply(const VecC& s, const ChannelRealization& chan, int cp_len) {
    VecC y = VecC::Zero(s.size());
    for (const auto& path : chan.paths) {
        if (path.delay < 0 || path.delay >= cp_len)
            throw std::invalid_argument("channel: path delay outside the CP");
        y += path.gain * delay_doppler_apply(s, path.delay, path.doppler);
    }
    return y;
}

VecC mmse_receive(const VecC& y, const ChannelRealization& chan, const MatC& a,
                  double sigma2) {
    const int n = static_cast<int>(a.rows());
    MatC g = MatC::Zero(n, n);
    for (const auto& path : chan.paths) {
        // h J_tau D(mu) A: Doppler ramp on the rows of A, then cyclic row shift.
        int shift = path.delay % n;
        if (shift < 0) shift += n;
        for (int i = 0; i < n; ++i) {
            const int k = (i - shift + n) % n;
            g.row(i) += path.gain * unit_phase(-path.doppler * k / n) * a.row(k);
        }
    }
    if (sigma2 <= 0.0) {
        Eigen::ColPivHouseholderQR<MatC> qr(g);
        if (qr.rank() < n)
            throw std::runtime_error("mmse: singular system at sigma2 = 0");
        return qr.solve(y);
    }
    MatC gram = g.adjoint() * g;
    gram.diagonal().array() += sigma2;
    return gram.ldlt().solve(g.adjoint() * y);
}

MatD range_doppler_map(const VecC& s_ref, const VecC& y, const std::vector<int>& tau_grid,
                       const std::vector<double>& mu_grid) {
    const int n = static_cast<int>(s_ref.size());
    MatD map(tau_grid.size(), mu_grid.size());
    for (std::size_t mi = 0; mi < mu_grid.size(); ++mi) {
        // <J_tau D(mu) s, y> = sum_k e^{+j2pi mu k/N} conj(s[k]) y[(k+tau) mod N]
        VecC z(n);
        for (int k = 0; k < n; ++k)
            z[k] = unit_phase(mu_grid[mi] * k / n) * std::conj(s_ref[k]);
        for (std::size_t ti = 0; ti < tau_grid.size(); ++ti) {
            int shift = tau_grid[ti] % n;
            if (shift < 0) shift += n;
            cd acc{0.0, 0.0};
            for (int k = 0; k < n; ++k) acc += z[k] * y[(k + shift) % n];
            map(static_cast<Eigen::Index>(ti), static_cast<Eigen::Index>(mi)) = std::norm(acc);
        }
    }
    return map;
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> ca_cfar(const MatD& map,
                                                           const CfarConfig& cfg) {
    const int rows = static_cast<int>(map.rows());
    const int cols = static_cast<int>(map.cols());
    const int outer = cfg.guard + cfg.train;
    if (2 * outer + 1 > rows || 2 * outer + 1 > cols)
        throw std::invalid_argument("cfar: window exceeds map extent");

    // Training ring offsets (Chebyshev distance in (guard, guard+train]).
    std::vector<std::pair<int, int>> ring;
    for (int di = -outer; di <= outer; ++di) {
        for (int dj = -outer; dj <= outer; ++dj) {
            if (std::max(std::abs(di), std::abs(dj)) > cfg.guard) ring.emplace_back(di, dj);
        }
    }
    const double alpha = cfg.threshold_factor();

    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (const auto& [di, dj] : ring) {
                const int ii = (i + di + rows) % rows;
                const int jj = (j + dj + cols) % cols;
                acc += map(ii, jj);
            }
            const double mean = acc / static_cast<double>(ring.size());
            mask(i, j) = map(i, j) > alpha * mean;
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Monte Carlo drivers
// ---------------------------------------------------------------------------

WaveformEntry waveform_entry_from_design(const ChirpBasis& basis, const DesignVector& dv) {
    WaveformEntry wf;
    wf.oversampled = synthesize_oversampled(basis, dv);
    wf.symbols = dv.symbols;
    wf.partition = dv.partition;
    wf.prechirp_phase.resize(basis.cfg().n);
    for (int m = 0; m < basis.cfg().n; ++m) {
        const int idx = dv.prechirp_index.empty() ? 0 : dv.prechirp_index[m];
        wf.prechirp_phase[m] = prechirp_point(basis.cfg(), idx < 0 ? 0 : idx, m);
    }
    // The receiver discards R, and on R the pre-chirp is folded into the
    // optimized symbol; demodulate those bins with a unit phase.
    for (int m : dv.partition.reserved) wf.prechirp_phase[m] = cd{1.0, 0.0};
    return wf;
}

VecC transmit_samples(const WaveformEntry& wf, int oversampling,
                      std::optional<double> ibo_db, double pa_smoothness) {
    VecC st = wf.oversampled;
    if (ibo_db.has_value()) {
        const RappPa pa = rapp_for_ibo(st, *ibo_db, pa_smoothness);
        st = pa.amplify(st);
    }
    const int n = static_cast<int>(st.size()) / oversampling;
    VecC s(n);
    const double root_lp = std::sqrt(static_cast<double>(oversampling));
    for (int k = 0; k < n; ++k) s[k] = root_lp * st[k * oversampling];
    const double power = s.squaredNorm() / n;
    return s / std::sqrt(power);
}

namespace {

struct SensingSetup {
    std::vector<int> tau_grid;
    std::vector<double> mu_grid;
    int weak_row = 0, weak_col = 0;
};

SensingSetup sensing_setup(const DetectionScenario& sc, int n) {
    SensingSetup s;
    s.tau_grid.resize(n);
    for (int t = 0; t < n; ++t) s.tau_grid[t] = t;
    for (int m = -sc.map_doppler_halfspan; m <= sc.map_doppler_halfspan; ++m)
        s.mu_grid.push_back(static_cast<double>(m));
    s.weak_row = sc.weak_tau;
    s.weak_col = static_cast<int>(std::lround(sc.weak_mu)) + sc.map_doppler_halfspan;
    return s;
}

bool detection_trial(const DetectionScenario& sc, const SensingSetup& setup,
                     const WaveformEntry& wf, double snr_db, std::uint64_t seed,
                     const CfarConfig& cfar) {
    Rng rng(seed);
    const int lp = static_cast<int>(wf.oversampled.size()) / static_cast<int>(wf.partition.data.size() + wf.partition.reserved.size());
    const int n = static_cast<int>(wf.oversampled.size()) / lp;
    VecC s(n);
    const double root_lp = std::sqrt(static_cast<double>(lp));
    for (int k = 0; k < n; ++k) s[k] = root_lp * wf.oversampled[k * lp];

    const double amp_weak = std::sqrt(linear_from_db(snr_db));
    const double amp_strong = amp_weak * std::sqrt(linear_from_db(sc.strong_gain_db));
    const cd h_w = amp_weak * unit_phase(rng.uniform());
    const cd h_s = amp_strong * unit_phase(rng.uniform());

    VecC y = h_w * delay_doppler_apply(s, sc.weak_tau, sc.weak_mu) +
             h_s * delay_doppler_apply(s, sc.strong_tau, sc.strong_mu);
    for (int k = 0; k < n; ++k) y[k] += rng.cnormal();

    const MatD map = range_doppler_map(s, y, setup.tau_grid, setup.mu_grid);
    const auto mask = ca_cfar(map, cfar);
    return mask(setup.weak_row, setup.weak_col);
}

}  // namespace

std::vector<PdPoint> run_detection_mc(const DetectionScenario& sc, const WaveformPool& pool) {
    if (pool.empty()) throw std::invalid_argument("detection: empty waveform pool");
    const int n = static_cast<int>(pool.front().partition.data.size() +
                                   pool.front().partition.reserved.size());
    const SensingSetup setup = sensing_setup(sc, n);

    std::vector<PdPoint> out;
    for (std::size_t pi = 0; pi < sc.snr_grid_db.size(); ++pi) {
        const double snr = sc.snr_grid_db[pi];
        std::uint64_t hits = 0;
        for (int t = 0; t < sc.trials; ++t) {
            const auto& wf = pool[static_cast<std::size_t>(t) % pool.size()];
            const std::uint64_t seed = derive_seed(sc.seed, 0xD37Ec7 + pi, static_cast<std::uint64_t>(t));
            if (detection_trial(sc, setup, wf, snr, seed, sc.cfar)) ++hits;
        }
        const auto ci = wilson_ci(hits, static_cast<std::uint64_t>(sc.trials));
        out.push_back({snr, static_cast<double>(hits) / sc.trials, ci.lo, ci.hi});
    }
    return out;
}

std::vector<RocPoint> run_detection_roc(const DetectionScenario& sc, const WaveformPool& pool,
                                        double snr_db, const std::vector<double>& pfa_grid) {
    if (pool.empty()) throw std::invalid_argument("detection: empty waveform pool");
    const int n = static_cast<int>(pool.front().partition.data.size() +
                                   pool.front().partition.reserved.size());
    const SensingSetup setup = sensing_setup(sc, n);

    std::vector<RocPoint> out;
    for (std::size_t gi = 0; gi < pfa_grid.size(); ++gi) {
        CfarConfig cfar = sc.cfar;
        cfar.pfa = pfa_grid[gi];
        std::uint64_t hits = 0;
        for (int t = 0; t < sc.trials; ++t) {
            const auto& wf = pool[static_cast<std::size_t>(t) % pool.size()];
            // Same noise seeds across pfa points and across waveform sources.
            const std::uint64_t seed = derive_seed(sc.seed, 0x50C7e5, static_cast<std::uint64_t>(t));
            if (detection_trial(sc, setup, wf, snr_db, seed, cfar)) ++hits;
        }
        out.push_back({pfa_grid[gi], static_cast<double>(hits) / sc.trials});
    }
    return out;
}

double cfar_noise_pfa(const CfarConfig& cfg, const VecC& s_ref, int doppler_halfspan,
                      int maps, std::uint64_t seed) {
    const int n = static_cast<int>(s_ref.size());
    std::vector<int> tau_grid(n);
    for (int t = 0; t < n; ++t) tau_grid[t] = t;
    std::vector<double> mu_grid;
    for (int m = -doppler_halfspan; m <= doppler_halfspan; ++m)
        mu_grid.push_back(static_cast<double>(m));

    std::uint64_t detections = 0, cells = 0;
    for (int i = 0; i < maps; ++i) {
        Rng rng(derive_seed(seed, 0xCFA4, static_cast<std::uint64_t>(i)));
        VecC y(n);
        for (int k = 0; k < n; ++k) y[k] = rng.cnormal();
        const MatD map = range_doppler_map(s_ref, y, tau_grid, mu_grid);
        const auto mask = ca_cfar(map, cfg);
        detections += static_cast<std::uint64_t>(mask.count());
        cells += static_cast<std::uint64_t>(mask.size());
    }
    return static_cast<double>(detections) / static_cast<double>(cells);
}

std::vector<BerPoint> run_ber_mc(const BerScenario& sc, const ChirpBasis& basis,
                                 const WaveformPool& pool) {
    if (pool.empty()) throw std::invalid_argument("ber: empty waveform pool");
    const AfdmConfig& cfg = basis.cfg();
    const int n = cfg.n;
    const int bits_per_symbol = sc.constellation.bits_per_symbol();

    // PA processing is deterministic per pool entry; do it once.
    std::vector<VecC> tx;
    std::vector<MatC> rx_matrix;
    tx.reserve(pool.size());
    rx_matrix.reserve(pool.size());
    for (const auto& wf : pool) {
        tx.push_back(transmit_samples(wf, cfg.oversampling, sc.ibo_db, sc.pa_smoothness));
        rx_matrix.push_back(basis.modulation_matrix(wf.prechirp_phase));
    }

    std::vector<BerPoint> out;
    for (std::size_t pi = 0; pi < sc.snr_grid_db.size(); ++pi) {
        const double sigma2 = linear_from_db(-sc.snr_grid_db[pi]);
        std::uint64_t bits = 0, errors = 0, frame = 0;

        std::optional<ChannelRealization> fixed;
        if (sc.channel == ChannelKind::doubly_selective && sc.fixed_channel) {
            Rng crng(derive_seed(sc.seed, 0xC4A221, pi));
            fixed = draw_channel(crng, sc.profile_db, sc.cp_len, sc.doppler_span);
        }

        while (bits < sc.min_bits && frame < sc.max_frames) {
            const std::size_t wi = frame % pool.size();
            const auto& wf = pool[wi];
            Rng rng(derive_seed(sc.seed, 0xBE2000 + pi, frame));

            VecC y;
            ChannelRealization chan;
            if (sc.channel == ChannelKind::awgn) {
                chan = identity_channel();
                y = tx[wi];
            } else {
                chan = fixed.has_value() ? *fixed
                                         : draw_channel(rng, sc.profile_db, sc.cp_len,
                                                        sc.doppler_span);
                y = doubly_selective_apply(tx[wi], chan, sc.cp_len);
            }
            const double noise_scale = std::sqrt(sigma2);
            for (int k = 0; k < n; ++k) y[k] += noise_scale * rng.cnormal();

            VecC xhat;
            if (sc.channel == ChannelKind::awgn) {
                xhat = rx_matrix[wi].adjoint() * y;  // unitary G: MMSE up to scale
            } else {
                xhat = mmse_receive(y, chan, rx_matrix[wi], sigma2);
            }

            for (int m : wf.partition.data) {
                const unsigned sent = sc.constellation.demap(wf.symbols[m]);
                const unsigned got = sc.constellation.demap(xhat[m]);
                errors += static_cast<std::uint64_t>(popcount8(sent ^ got));
                bits += static_cast<std::uint64_t>(bits_per_symbol);
            }
            ++frame;
        }
        out.push_back({sc.snr_grid_db[pi],
                       bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0,
                       bits, errors});
    }
    return out;
}

}  // namespace afdm
