// Experiment orchestration behind the command-line front end: run
// configuration, waveform-source resolution, deterministic seeding, and the
// design / evaluate / ccdf / sense / ber entry points.
#pragma once

#include "afdm/optimizer.hpp"
#include "afdm/sim.hpp"

#include <filesystem>

namespace afdm {

struct RunConfig {
    // afdm
    int n = 128;
    double c1 = 21.0 / 256.0;
    int oversampling = 4;
    int alphabet_size = 8;
    double phi0 = 0.0;
    double delta = kDefaultDelta;
    double rcs_ratio = 0.2;
    int psk_order = 8;
    double carrier_ghz = 28.0;    // metadata only
    double bandwidth_mhz = 100.0; // metadata only

    // laz
    int tau_max = 8;
    double mu_min = -4.0;
    double mu_max = 4.0;
    int l_mu = 9;

    // optimizer
    std::string mode = "joint";
    std::string vars = "rcs+c2";
    double gamma_db = 5.0;
    int ell = 16;
    int r_max = 600;
    int r_nsp = 300;
    double stop_tol = 1e-4;
    bool accelerate = false;

    // sim
    double ibo_db = 0.0;
    bool ideal_pa = false;
    std::string channel = "awgn";
    std::vector<double> profile_db = {0.0, -5.0, -10.0};
    int cp_len = 16;
    double doppler_span = 2.0;
    bool fixed_channel = false;
    int cfar_guard = 2;
    int cfar_train = 8;
    double pfa = 1e-3;
    std::string snr_grid = "6:2:18";
    int trials = 2000;
    std::uint64_t min_bits = 100000;
    int pool = 50;
    double roc_snr_db = -8.0;
    std::string pfa_grid = "1e-1,3e-2,1e-2,3e-3,1e-3";

    // run
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int seeds = 1;
    int threads = 1;
    std::string sources = "conventional";
    std::string baseline;         // design command: conventional|gps
    double baseline_isl = 0.0;    // evaluate: 0 = normalize to input mean

    AfdmConfig afdm_config(double ratio) const;
    LazSpec laz() const;
    OptimizerOptions optimizer_options() const;
    PskConstellation constellation() const { return PskConstellation{psk_order}; }
    std::string canonical_string() const;  // hashed into manifests
};

std::vector<double> parse_grid(const std::string& spec);       // "lo:step:hi" or csv
std::vector<double> parse_double_list(const std::string& csv);

// A waveform source named on the command line: a baseline or one of the
// optimized designs, with an optional reserved-ratio suffix such as
// "papr-min-joint@0.2".
struct SourceSpec {
    std::string name;
    bool conventional = false;
    bool gps = false;
    DesignMode mode = DesignMode::af_shape;
    VariableSet variables = VariableSet::rcs_only;
    double ratio = 0.2;
};

SourceSpec parse_source(const std::string& token, const RunConfig& rc);
std::vector<SourceSpec> parse_sources(const std::string& csv, const RunConfig& rc);

// Design (or draw) one waveform for a source. Data symbols come from
// derive_seed(rc.seed, kDataTag, index), shared across sources so that
// comparison runs are seed-paired.
DesignResult design_for_source(const ChirpBasis& basis, const SourceSpec& src,
                               const RunConfig& rc, std::uint64_t index);

WaveformPool build_pool(const ChirpBasis& basis, const SourceSpec& src, const RunConfig& rc,
                        int count);

inline constexpr std::uint64_t kDataTag = 0xDA7A;

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const RunConfig& rc);

// Command entry points; throw std::invalid_argument for configuration
// problems and std::runtime_error for execution failures.
void run_design(const RunConfig& rc);
void run_evaluate(const RunConfig& rc, const std::vector<std::string>& files);
void run_ccdf(const RunConfig& rc);
void run_sense(const RunConfig& rc);
void run_ber(const RunConfig& rc);

}  // namespace afdm
