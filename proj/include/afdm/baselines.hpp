// Reference waveforms: conventional AFDM (random data, common pre-chirp
// choice) and the greedy grouped pre-chirp selection (GPS) PAPR baseline.
#pragma once

#include "afdm/core.hpp"

namespace afdm {

// Conventional AFDM waveform with random constellation symbols on every
// subcarrier and the first alphabet element as the common pre-chirp choice.
// With a nontrivial partition this doubles as the optimizer initialization:
// symbols on R are random draws absorbed into u.
DesignVector conventional_afdm(const AfdmConfig& cfg, const PskConstellation& constellation,
                               std::uint64_t seed);

struct GpsResult {
    DesignVector dv;            // full-data partition, u on the phase alphabet
    std::vector<int> indices;   // chosen alphabet index per subcarrier
    double papr_db = 0.0;
};

// One ascending sweep over all subcarriers; at each m the pre-chirp phase is
// re-chosen from the alphabet to minimize the oversampled PAPR of the full
// waveform with everything else held fixed. The incumbent value is always a
// candidate, so the PAPR never increases.
GpsResult gps_sweep(const ChirpBasis& basis, const DesignVector& conventional);

GpsResult gps_sweep(const ChirpBasis& basis, const PskConstellation& constellation,
                    std::uint64_t seed);

}  // namespace afdm
