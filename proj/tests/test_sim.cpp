#include "afdm/sim.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace afdm;

namespace {

AfdmConfig cfg_n(int n, double ratio) {
    AfdmConfig cfg;
    cfg.n = n;
    cfg.c1 = 21.0 / (2.0 * n);
    cfg.partition = SubcarrierPartition::comb(n, ratio);
    cfg.validate();
    return cfg;
}

}  // namespace

TEST_CASE("rapp: limits, closed-form point, monotone compressive AM-AM") {
    RappPa pa{1.0, 2.0};

    // small-signal gain -> 1
    CHECK(std::abs(pa.amplify(cd{1e-6, 0.0}) - cd{1e-6, 0.0}) < 1e-12);

    // |in| = A_sat, p = 2: gain = 2^{-1/4}
    const cd at_sat = pa.amplify(cd{1.0, 0.0});
    CHECK(std::abs(at_sat) == doctest::Approx(std::pow(2.0, -0.25)).epsilon(1e-12));

    // saturation limit and strict bound
    CHECK(std::abs(pa.amplify(cd{1e6, 0.0})) == doctest::Approx(1.0).epsilon(1e-6));
    double prev = 0.0;
    for (double a = 0.01; a < 30.0; a *= 1.17) {
        const double out = std::abs(pa.amplify(cd{a, 0.0}));
        CHECK(out > prev);        // monotone
        CHECK(out < pa.a_sat);    // strictly below saturation
        CHECK(out <= a + 1e-15);  // gain <= 1
        prev = out;
    }

    // phase preserved
    const cd rotated = pa.amplify(cd{0.6, 0.8});
    CHECK(std::arg(rotated) == doctest::Approx(std::arg(cd{0.6, 0.8})).epsilon(1e-12));
}

TEST_CASE("ibo: closed-form saturation amplitude and exact round trip") {
    VecC unit(4);
    unit << cd{1, 0}, cd{0, 1}, cd{-1, 0}, cd{0, -1};  // P_in = 1
    CHECK(rapp_for_ibo(unit, 0.0).a_sat == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rapp_for_ibo(unit, 4.0).a_sat == doctest::Approx(std::pow(10.0, 0.2)).epsilon(1e-12));

    Rng rng(3);
    VecC samples(256);
    for (int i = 0; i < 256; ++i) samples[i] = 2.0 * rng.cnormal();
    const double ibo = 6.3;
    const RappPa pa = rapp_for_ibo(samples, ibo);
    const double p_in = samples.squaredNorm() / 256.0;
    CHECK(10.0 * std::log10(pa.a_sat * pa.a_sat / p_in) == doctest::Approx(ibo).epsilon(1e-12));

    CHECK_THROWS_AS(rapp_for_ibo(VecC::Zero(8), 0.0), std::invalid_argument);
}

TEST_CASE("channel: identity, pure delay, power profile, delay guard") {
    Rng rng(1);
    VecC s(16);
    for (int i = 0; i < 16; ++i) s[i] = rng.cnormal();

    CHECK((doubly_selective_apply(s, identity_channel(), 4) - s).cwiseAbs().maxCoeff() < 1e-15);

    ChannelRealization delayed;
    delayed.paths.push_back({cd{1.0, 0.0}, 2, 0.0});
    const VecC y = doubly_selective_apply(s, delayed, 4);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(y[i] - s[(i - 2 + 16) % 16]) < 1e-15);

    ChannelRealization bad;
    bad.paths.push_back({cd{1.0, 0.0}, 4, 0.0});
    CHECK_THROWS_AS(doubly_selective_apply(s, bad, 4), std::invalid_argument);

    // E|h_k|^2 ratios = 1 : 10^-0.5 : 10^-1 within 5% over 1e4 draws
    const std::vector<double> profile = {0.0, -5.0, -10.0};
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    const int draws = 10000;
    Rng crng(7);
    for (int i = 0; i < draws; ++i) {
        const ChannelRealization chan = draw_channel(crng, profile, 8, 2.0);
        for (int k = 0; k < 3; ++k) acc[k] += std::norm(chan.paths[k].gain);
    }
    acc /= draws;
    CHECK(acc[1] / acc[0] == doctest::Approx(std::pow(10.0, -0.5)).epsilon(0.05));
    CHECK(acc[2] / acc[0] == doctest::Approx(std::pow(10.0, -1.0)).epsilon(0.05));
    CHECK(acc.sum() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("mmse: exact recovery in the noiseless cases, singular report") {
    const AfdmConfig cfg = cfg_n(8, 0.0);
    ChirpBasis basis(cfg);
    Rng rng(11);
    const PskConstellation psk{8};
    VecC x(8), phase(8);
    for (int m = 0; m < 8; ++m) {
        x[m] = psk.random_symbol(rng);
        phase[m] = prechirp_point(cfg, 0, m);
    }
    const MatC a = basis.modulation_matrix(phase);
    const VecC s = a * x;

    // identity channel, sigma2 -> 0
    const VecC xhat0 = mmse_receive(s, identity_channel(), a, 0.0);
    CHECK((xhat0 - x).cwiseAbs().maxCoeff() < 1e-10);

    // known three-path channel, sigma2 = 0: exact inversion
    ChannelRealization chan;
    chan.paths.push_back({cd{0.9, 0.1}, 0, 0.3});
    chan.paths.push_back({cd{0.4, -0.2}, 2, -0.7});
    chan.paths.push_back({cd{-0.2, 0.25}, 3, 1.1});
    const VecC y = doubly_selective_apply(s, chan, 4);
    const VecC xhat = mmse_receive(y, chan, a, 0.0);
    CHECK((xhat - x).cwiseAbs().maxCoeff() < 1e-8);

    // cancelling paths make G singular
    ChannelRealization sing;
    sing.paths.push_back({cd{1.0, 0.0}, 1, 0.5});
    sing.paths.push_back({cd{-1.0, 0.0}, 1, 0.5});
    CHECK_THROWS_AS(mmse_receive(y, sing, a, 0.0), std::runtime_error);

    // with noise the estimate converges to the symbols at high SNR
    Rng nrng(13);
    VecC yn = doubly_selective_apply(s, chan, 4);
    const double sigma = 1e-4;
    for (int i = 0; i < 8; ++i) yn[i] += sigma * nrng.cnormal();
    const VecC xn = mmse_receive(yn, chan, a, sigma * sigma);
    CHECK((xn - x).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("range-Doppler map: matched peak at every injected cell") {
    const AfdmConfig cfg = cfg_n(16, 0.0);
    ChirpBasis basis(cfg);
    Rng rng(2);
    const DesignVector dv = conventional_afdm(cfg, PskConstellation{8}, 4);
    const VecC s = synthesize(basis, dv);

    std::vector<int> taus = {0, 1, 2, 3, 4, 5};
    std::vector<double> mus = {-2, -1, 0, 1, 2};
    for (int ti = 0; ti < 6; ++ti) {
        for (int mi = 0; mi < 5; ++mi) {
            const VecC y = delay_doppler_apply(s, taus[ti], mus[mi]);
            const MatD map = range_doppler_map(s, y, taus, mus);
            Eigen::Index brow, bcol;
            map.maxCoeff(&brow, &bcol);
            CHECK(brow == ti);
            CHECK(bcol == mi);
            CHECK(map(brow, bcol) == doctest::Approx(16.0 * 16.0).epsilon(1e-9));
        }
    }

    // two targets -> both cells are local maxima
    const VecC y2 = 1.0 * delay_doppler_apply(s, 1, -1.0) + 0.8 * delay_doppler_apply(s, 4, 2.0);
    const MatD map2 = range_doppler_map(s, y2, taus, mus);
    CHECK(map2(1, 1) > 0.5 * 16.0 * 16.0);
    CHECK(map2(4, 4) > 0.3 * 16.0 * 16.0);
}

TEST_CASE("cfar: constant map, spike detection, window guard") {
    CfarConfig cfg;
    cfg.guard = 1;
    cfg.train = 2;
    cfg.pfa = 1e-2;
    CHECK(cfg.training_cell_count() == 49 - 9);

    MatD flat = MatD::Constant(16, 16, 3.0);
    const auto mask = ca_cfar(flat, cfg);
    CHECK(mask.count() == 0);

    MatD spike = MatD::Constant(16, 16, 1.0);
    spike(8, 8) = 1e6;
    const auto mask2 = ca_cfar(spike, cfg);
    CHECK(mask2(8, 8));

    MatD tiny = MatD::Constant(4, 4, 1.0);
    CHECK_THROWS_AS(ca_cfar(tiny, cfg), std::invalid_argument);
}

TEST_CASE("cfar: empirical false-alarm rate within a factor of 3 of nominal") {
    const AfdmConfig cfg = cfg_n(32, 0.0);
    ChirpBasis basis(cfg);
    const DesignVector dv = conventional_afdm(cfg, PskConstellation{8}, 9);
    const VecC s = synthesize(basis, dv);

    CfarConfig cfar;
    cfar.guard = 2;
    cfar.train = 8;
    cfar.pfa = 1e-2;
    const double rate = cfar_noise_pfa(cfar, s, 10, 60, 33);
    CHECK(rate > cfar.pfa / 3.0);
    CHECK(rate < cfar.pfa * 3.0);
}

TEST_CASE("ber: ideal-PA AWGN link is clean at high SNR and gray mapping is adjacent") {
    const PskConstellation psk{8};
    for (unsigned v = 0; v < 8; ++v) {
        CHECK(psk.demap(psk.map(v)) == v);
        // adjacent constellation points differ in exactly one bit
        const unsigned g1 = v ^ (v >> 1);
        const unsigned next = (v + 1) % 8;
        const unsigned g2 = next ^ (next >> 1);
        CHECK(popcount8((g1 ^ g2)) == 1);
    }

    const AfdmConfig cfg = cfg_n(32, 0.0);
    ChirpBasis basis(cfg);
    WaveformPool pool;
    for (int i = 0; i < 4; ++i) {
        const DesignVector dv = conventional_afdm(cfg, psk, 50 + i);
        pool.push_back(waveform_entry_from_design(basis, dv));
    }
    BerScenario sc;
    sc.snr_grid_db = {18.0};
    sc.min_bits = 30000;
    sc.ibo_db.reset();  // ideal PA
    sc.seed = 3;
    const auto curve = run_ber_mc(sc, basis, pool);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].bits >= 30000);
    CHECK(curve[0].ber < 1e-3);
}

TEST_CASE("ber: doubly selective channel with MMSE is functional") {
    const AfdmConfig cfg = cfg_n(16, 0.0);
    ChirpBasis basis(cfg);
    const PskConstellation psk{8};
    WaveformPool pool;
    for (int i = 0; i < 2; ++i)
        pool.push_back(waveform_entry_from_design(basis, conventional_afdm(cfg, psk, 80 + i)));

    BerScenario sc;
    sc.snr_grid_db = {25.0};
    sc.min_bits = 5000;
    sc.channel = ChannelKind::doubly_selective;
    sc.cp_len = 4;
    sc.ibo_db.reset();
    sc.seed = 5;
    const auto curve = run_ber_mc(sc, basis, pool);
    CHECK(curve[0].ber < 0.2);  // equalizer does real work

    sc.fixed_channel = true;
    const auto fixed_curve = run_ber_mc(sc, basis, pool);
    CHECK(fixed_curve[0].bits >= 5000);
}

TEST_CASE("transmit pipeline: decimation, normalization, PA compression") {
    const AfdmConfig cfg = cfg_n(32, 0.0);
    ChirpBasis basis(cfg);
    const DesignVector dv = conventional_afdm(cfg, PskConstellation{8}, 17);
    const WaveformEntry wf = waveform_entry_from_design(basis, dv);

    const VecC ideal = transmit_samples(wf, cfg.oversampling, std::nullopt, 2.0);
    CHECK(ideal.squaredNorm() / cfg.n == doctest::Approx(1.0).epsilon(1e-12));
    // ideal path = normalized decimation of the stored oversampled samples
    const VecC s = synthesize(basis, dv);
    const VecC expect = s / std::sqrt(s.squaredNorm() / cfg.n);
    CHECK((ideal - expect).cwiseAbs().maxCoeff() < 1e-9);

    const VecC hard = transmit_samples(wf, cfg.oversampling, 0.0, 2.0);
    CHECK(hard.squaredNorm() / cfg.n == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((hard - ideal).cwiseAbs().maxCoeff() > 1e-3);  // PA actually engaged
}
