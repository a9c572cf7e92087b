// Command-line front end: design | evaluate | ccdf | sense | ber.
#include "afdm/cli.hpp"
#include "afdm/io.hpp"

#include <CLI11.hpp>

#include <cstdio>

int main(int argc, char** argv) {
    CLI::App app{"AFDM waveform design and evaluation"};
    app.set_version_flag("--version", afdm::version_string());
    app.set_config("--config", "", "Read options from a key-value config file");
    app.require_subcommand(1);

    afdm::RunConfig rc;
    std::vector<std::string> eval_files;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", rc.seed, "Master seed");
        cmd->add_option("--out,-o", rc.out_dir, "Output directory");
        cmd->add_option("--threads", rc.threads, "Worker count (results are thread-invariant)");
        cmd->add_option("--n", rc.n, "Subcarrier count");
        cmd->add_option("--c1", rc.c1, "Post-chirp parameter (2*n*c1 integer)");
        cmd->add_option("--lp", rc.oversampling, "PAPR oversampling factor");
        cmd->add_option("--alphabet", rc.alphabet_size, "Pre-chirp alphabet size");
        cmd->add_option("--psk", rc.psk_order, "PSK constellation order");
        cmd->add_option("--rcs-ratio", rc.rcs_ratio, "Reserved chirp-subcarrier ratio");
        cmd->add_option("--tau-max", rc.tau_max, "LAZ delay half-span");
        cmd->add_option("--mu-min", rc.mu_min, "LAZ Doppler lower edge");
        cmd->add_option("--mu-max", rc.mu_max, "LAZ Doppler upper edge");
        cmd->add_option("--l-mu", rc.l_mu, "LAZ Doppler grid points");
        cmd->add_option("--gamma", rc.gamma_db, "Target PAPR (dB, joint mode)");
        cmd->add_option("--ell", rc.ell, "Peak-power moment exponent");
        cmd->add_option("--r-max", rc.r_max, "Maximum optimizer iterations");
        cmd->add_option("--r-nsp", rc.r_nsp, "NSP activation iteration");
        cmd->add_option("--stop-tol", rc.stop_tol, "Relative objective stop tolerance");
        cmd->add_flag("--accelerate", rc.accelerate, "Enable squared-iterative acceleration");
    };

    auto* design = app.add_subcommand("design", "Optimize waveforms and write them out");
    add_common(design);
    design->add_option("--mode", rc.mode, "af-shape | papr-min | joint");
    design->add_option("--vars", rc.vars, "rcs | rcs+c2");
    design->add_option("--seeds", rc.seeds, "Number of instances");
    design->add_option("--baseline", rc.baseline, "conventional | gps (skip optimization)");

    auto* evaluate = app.add_subcommand("evaluate", "Recompute metrics from waveform files");
    add_common(evaluate);
    evaluate->add_option("files", eval_files, "Waveform binaries")->required();
    evaluate->add_option("--baseline-isl", rc.baseline_isl,
                         "ISL normalization reference (0 = input mean)");

    auto* ccdf = app.add_subcommand("ccdf", "PAPR CCDF over random instances");
    add_common(ccdf);
    ccdf->add_option("--sources", rc.sources, "Comma list of waveform sources");
    ccdf->add_option("--trials", rc.trials, "Instances per source");

    auto* sense = app.add_subcommand("sense", "Two-target CA-CFAR detection Monte Carlo");
    add_common(sense);
    sense->add_option("--sources", rc.sources, "Comma list of waveform sources");
    sense->add_option("--snr", rc.snr_grid, "SNR grid lo:step:hi (dB)");
    sense->add_option("--trials", rc.trials, "Trials per SNR point");
    sense->add_option("--pfa", rc.pfa, "Nominal CFAR false-alarm rate");
    sense->add_option("--guard", rc.cfar_guard, "CFAR guard cells per dimension");
    sense->add_option("--train", rc.cfar_train, "CFAR training cells per dimension");
    sense->add_option("--pool", rc.pool, "Designed waveforms per source");
    sense->add_option("--roc-snr", rc.roc_snr_db, "SNR for the ROC sweep (dB)");
    sense->add_option("--pfa-grid", rc.pfa_grid, "ROC false-alarm grid");

    auto* ber = app.add_subcommand("ber", "Link-level BER under PA nonlinearity");
    add_common(ber);
    ber->add_option("--sources", rc.sources, "Comma list of waveform sources");
    ber->add_option("--snr", rc.snr_grid, "Es/N0 grid lo:step:hi (dB)");
    ber->add_option("--ibo", rc.ibo_db, "PA input back-off (dB)");
    ber->add_flag("--ideal-pa", rc.ideal_pa, "Bypass the PA (linear reference)");
    ber->add_option("--channel", rc.channel, "awgn | doubly");
    ber->add_option("--min-bits", rc.min_bits, "Bits per SNR point");
    ber->add_option("--pool", rc.pool, "Designed waveforms per source");
    ber->add_flag("--fixed-channel", rc.fixed_channel,
                  "One channel realization per SNR point");
    ber->add_option("--cp-len", rc.cp_len, "Cyclic prefix length (samples)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (design->parsed()) afdm::run_design(rc);
        if (evaluate->parsed()) afdm::run_evaluate(rc, eval_files);
        if (ccdf->parsed()) afdm::run_ccdf(rc);
        if (sense->parsed()) afdm::run_sense(rc);
        if (ber->parsed()) afdm::run_ber(rc);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
