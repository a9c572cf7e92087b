#include "afdm/baselines.hpp"

#include <cmath>

namespace afdm {

DesignVector conventional_afdm(const AfdmConfig& cfg, const PskConstellation& constellation,
                               std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    DesignVector dv;
    dv.partition = cfg.partition;
    dv.symbols.resize(cfg.n);
    dv.u.resize(cfg.n);
    dv.prechirp_index.assign(cfg.n, 0);
    for (int m = 0; m < cfg.n; ++m) {
        dv.symbols[m] = constellation.random_symbol(rng);
        const cd phase = prechirp_point(cfg, 0, m);
        dv.u[m] = phase;
    }
    for (int m : cfg.partition.reserved) dv.u[m] *= dv.symbols[m];
    return dv;
}

GpsResult gps_sweep(const ChirpBasis& basis, const DesignVector& conventional) {
    const AfdmConfig& cfg = basis.cfg();
    GpsResult res;
    res.dv = conventional;
    // GPS operates on a full-data configuration: every subcarrier carries a
    // symbol and only the pre-chirp phases are selected.
    res.dv.partition = SubcarrierPartition::full_data(cfg.n);
    res.dv.prechirp_index.assign(cfg.n, 0);
    for (int m = 0; m < cfg.n; ++m) res.dv.u[m] = prechirp_point(cfg, 0, m);

    const MatC phi_p = basis.phi_oversampled(res.dv.b());
    VecC st = phi_p * res.dv.u;
    const int nl = static_cast<int>(st.size());

    const auto ratio = [nl](const VecC& v) {
        double peak = 0.0, avg = 0.0;
        for (int k = 0; k < nl; ++k) {
            const double p = std::norm(v[k]);
            peak = std::max(peak, p);
            avg += p;
        }
        return peak * nl / avg;
    };

    for (int m = 0; m < cfg.n; ++m) {
        const auto alphabet = build_prechirp_alphabet(cfg, m);
        int best = res.dv.prechirp_index[m];
        double best_ratio = ratio(st);
        VecC best_st = st;
        for (int l = 0; l < static_cast<int>(alphabet.size()); ++l) {
            if (l == res.dv.prechirp_index[m]) continue;
            // One pre-chirp change shifts a single column contribution.
            const VecC cand = st + (alphabet[l] - res.dv.u[m]) * phi_p.col(m);
            const double r = ratio(cand);
            if (r < best_ratio) {
                best_ratio = r;
                best = l;
                best_st = cand;
            }
        }
        if (best != res.dv.prechirp_index[m]) {
            res.dv.u[m] = alphabet[static_cast<std::size_t>(best)];
            res.dv.prechirp_index[m] = best;
            st = best_st;
        }
    }
    res.papr_db = db_from_linear(ratio(st));
    return res;
}

GpsResult gps_sweep(const ChirpBasis& basis, const PskConstellation& constellation,
                    std::uint64_t seed) {
    AfdmConfig cfg = basis.cfg();
    cfg.partition = SubcarrierPartition::full_data(cfg.n);
    DesignVector conv = conventional_afdm(cfg, constellation, seed);
    return gps_sweep(basis, conv);
}

}  // namespace afdm
