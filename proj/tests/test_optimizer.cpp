// Run-level optimizer behavior: energy conservation, the MM descent property
// in the continuous RCS-only modes, update optimality, mode dispatch, the
// adaptive peak-bound retry, and determinism.
#include "afdm/baselines.hpp"
#include "afdm/optimizer.hpp"

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

LazSpec laz_small() {
    LazSpec laz;
    laz.tau_max = 3;
    laz.mu_min = -2;
    laz.mu_max = 2;
    laz.l_mu = 5;
    return laz;
}

}  // namespace

TEST_CASE("options validation") {
    OptimizerOptions opt;
    opt.ell = 3;
    CHECK_THROWS_AS(opt.validate(), std::invalid_argument);
    opt.ell = 16;
    opt.mode = DesignMode::joint;
    opt.gamma_db = 0.0;
    CHECK_THROWS_AS(opt.validate(), std::invalid_argument);
    opt.gamma_db = 5.0;
    CHECK_NOTHROW(opt.validate());
    CHECK(design_mode_from_string("af-shape") == DesignMode::af_shape);
    CHECK_THROWS_AS(design_mode_from_string("x"), std::invalid_argument);
    CHECK(variable_set_from_string("rcs+c2") == VariableSet::rcs_plus_prechirp);
}

TEST_CASE("af-shape rcs-only: energy invariant, descent, fixed data entries") {
    const AfdmConfig cfg = cfg_n(16, 0.5);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 9);
    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::af_shape;
    opt.variables = VariableSet::rcs_only;
    opt.r_max = 120;
    opt.stop_tol = 1e-12;  // run the full budget
    JipdMm solver(cache, opt, init);

    VecC u = init.u;
    double prev = weighted_isl(u, cache);
    for (int r = 0; r < 60; ++r) {
        JipdMm::StepData st;
        u = solver.iterate(u, r, st);
        CHECK(u.squaredNorm() == doctest::Approx(16.0).epsilon(1e-12));
        for (int m : cfg.partition.data) CHECK(std::abs(u[m] - init.u[m]) < 1e-15);
        const double isl = weighted_isl(u, cache);
        CHECK(isl <= prev * (1.0 + 1e-8) + 1e-300);
        prev = isl;
    }
    CHECK(prev < weighted_isl(init.u, cache));
}

TEST_CASE("update: exact minimizer of the linear surrogate on the feasible slice") {
    const AfdmConfig cfg = cfg_n(4, 0.5);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 21);
    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::af_shape;
    opt.variables = VariableSet::rcs_only;
    JipdMm solver(cache, opt, init);

    JipdMm::StepData st;
    const VecC next = solver.iterate(init.u, 0, st);
    const double attained = 2.0 * std::real(st.g_total.dot(next));

    // random feasible candidates (same fixed D, ||u||^2 = N) cannot do better
    Rng rng(4);
    double sum_d = 0.0;
    for (int m : cfg.partition.data) sum_d += std::norm(init.u[m]);
    for (int t = 0; t < 500; ++t) {
        VecC v = init.u;
        double sum_r = 0.0;
        for (int m : cfg.partition.reserved) {
            v[m] = rng.cnormal();
            sum_r += std::norm(v[m]);
        }
        const double scale = std::sqrt((cfg.n - sum_d) / sum_r);
        for (int m : cfg.partition.reserved) v[m] *= scale;
        CHECK(2.0 * std::real(st.g_total.dot(v)) >= attained - 1e-9);
    }
}

TEST_CASE("joint variables: projections stay in the hulls, subcarrier zero pinned") {
    AfdmConfig cfg = cfg_n(16, 0.25);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 33);
    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::af_shape;
    opt.variables = VariableSet::rcs_plus_prechirp;
    opt.r_max = 40;
    opt.r_nsp = 10;
    JipdMm solver(cache, opt, init);

    VecC u = init.u;
    for (int r = 0; r < 30; ++r) {
        JipdMm::StepData st;
        u = solver.iterate(u, r, st);
        CHECK(u.squaredNorm() == doctest::Approx(16.0).epsilon(1e-12));
        for (int m : cfg.partition.data) {
            CHECK(std::abs(u[m]) <= 1.0 + 1e-12);
            if (m == 0) CHECK(u[0] == cd{1.0, 0.0});
        }
        if (r >= opt.r_nsp) CHECK(st.omega > 0.0);
        else CHECK(st.omega == 0.0);
    }
}

TEST_CASE("run: af-shape joint-vars snaps to the alphabet and reduces ISL") {
    AfdmConfig cfg = cfg_n(16, 0.25);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 2);
    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::af_shape;
    opt.variables = VariableSet::rcs_plus_prechirp;
    opt.r_max = 150;
    opt.r_nsp = 60;
    const DesignResult res = run_jipd_mm(cache, opt, init);

    CHECK(res.dv.u.squaredNorm() == doctest::Approx(16.0).epsilon(1e-10));
    for (int m : cfg.partition.data) {
        const auto alphabet = build_prechirp_alphabet(cfg, m);
        double best = 1e9;
        for (const cd v : alphabet) best = std::min(best, std::abs(res.dv.u[m] - v));
        CHECK(best < 1e-12);
        CHECK(res.dv.prechirp_index[m] >= 0);
        CHECK(res.dv.prechirp_index[m] < cfg.alphabet_size);
    }
    CHECK(res.isl_final < res.isl_init);
    CHECK(res.trace.size() >= 2);
    CHECK(res.trace.front().iter == 0);
}

TEST_CASE("run: papr-min reduces the peak metric and works without an ISL block") {
    AfdmConfig cfg = cfg_n(32, 0.5);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 14);
    const QuadFormCache cache = build_papr_cache(basis, init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::papr_min;
    opt.variables = VariableSet::rcs_only;
    opt.r_max = 150;
    opt.stop_tol = 1e-7;
    const DesignResult res = run_jipd_mm(cache, opt, init);
    CHECK(res.papr_final_db < res.papr_init_db);
    CHECK(std::isnan(res.isl_final));

    // descent of the tracked moment surrogate in the continuous rcs-only mode
    JipdMm solver(cache, opt, init);
    const auto moment = [&](const VecC& u) {
        const VecC st = cache.phi_p * u;
        double acc = 0.0;
        for (Eigen::Index k = 0; k < st.size(); ++k)
            acc += std::pow(std::norm(st[k]), opt.ell);
        return acc;
    };
    VecC u = init.u;
    double prev = moment(u);
    for (int r = 0; r < 40; ++r) {
        JipdMm::StepData st;
        u = solver.iterate(u, r, st);
        const double now = moment(u);
        CHECK(now <= prev * (1.0 + 1e-8));
        prev = now;
    }
}

TEST_CASE("run: joint mode tracks the PAPR target and flags feasibility") {
    AfdmConfig cfg = cfg_n(32, 0.25);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 77);
    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::joint;
    opt.variables = VariableSet::rcs_plus_prechirp;
    opt.gamma_db = 6.0;
    opt.r_max = 200;
    opt.r_nsp = 100;
    const DesignResult res = run_jipd_mm(cache, opt, init);
    CHECK(res.papr_final_db <= res.papr_init_db + 0.5);
    CHECK(res.feasible == (res.papr_final_db <= opt.gamma_db + 0.05));
    // trace columns populated
    for (const auto& row : res.trace) {
        CHECK(std::isfinite(row.papr_db));
        CHECK(row.rho >= 0.0);
    }
}

TEST_CASE("adaptive peak bound: accepted step respects the final t_p") {
    AfdmConfig cfg = cfg_n(16, 0.5);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 31);
    const QuadFormCache cache = build_papr_cache(basis, init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::papr_min;
    opt.variables = VariableSet::rcs_only;
    JipdMm solver(cache, opt, init);
    JipdMm::StepData st;
    const VecC next = solver.iterate(init.u, 0, st);
    const VecC stp = cache.phi_p * next;
    double peak = 0.0;
    for (Eigen::Index k = 0; k < stp.size(); ++k) peak = std::max(peak, std::norm(stp[k]));
    CHECK(peak <= st.t_p + 1e-12);
    // t_p = 1.1 * peak0 * 1.1^k for some retry count k >= 0
    const VecC st0 = cache.phi_p * init.u;
    double peak0 = 0.0;
    for (Eigen::Index k = 0; k < st0.size(); ++k) peak0 = std::max(peak0, std::norm(st0[k]));
    const double k_est = std::log(st.t_p / (1.1 * peak0)) / std::log(1.1);
    CHECK(k_est > -1e-9);
    CHECK(std::abs(k_est - std::lround(k_est)) < 1e-6);
}

TEST_CASE("determinism: identical seeds give identical results") {
    AfdmConfig cfg = cfg_n(16, 0.5);
    ChirpBasis basis(cfg);
    DesignVector init1 = conventional_afdm(cfg, PskConstellation{8}, 123);
    DesignVector init2 = conventional_afdm(cfg, PskConstellation{8}, 123);
    CHECK((init1.u - init2.u).cwiseAbs().maxCoeff() == 0.0);

    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), init1.b());
    OptimizerOptions opt;
    opt.mode = DesignMode::af_shape;
    opt.variables = VariableSet::rcs_only;
    opt.r_max = 50;
    const DesignResult a = run_jipd_mm(cache, opt, init1);
    const DesignResult b = run_jipd_mm(cache, opt, init2);
    CHECK((a.dv.u - b.dv.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.isl_final == b.isl_final);
}

TEST_CASE("acceleration: safeguarded extrapolation keeps the descent property") {
    AfdmConfig cfg = cfg_n(16, 0.5);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 6);
    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::af_shape;
    opt.variables = VariableSet::rcs_only;
    opt.r_max = 80;
    opt.stop_tol = 1e-12;
    opt.accelerate = true;
    const DesignResult fast = run_jipd_mm(cache, opt, init);
    CHECK(fast.isl_final < fast.isl_init);
    for (std::size_t i = 1; i + 1 < fast.trace.size(); ++i) {
        if (std::isfinite(fast.trace[i].isl) && std::isfinite(fast.trace[i - 1].isl))
            CHECK(fast.trace[i].isl <= fast.trace[i - 1].isl * (1.0 + 1e-8) + 1e-300);
    }
}

TEST_CASE("optimizer rejects inconsistent inputs") {
    AfdmConfig cfg = cfg_n(16, 0.5);
    ChirpBasis basis(cfg);
    DesignVector init = conventional_afdm(cfg, PskConstellation{8}, 1);
    const QuadFormCache papr_cache = build_papr_cache(basis, init.b());

    OptimizerOptions opt;
    opt.mode = DesignMode::af_shape;  // needs ISL block
    CHECK_THROWS_AS(JipdMm(papr_cache, opt, init), std::invalid_argument);

    // cache built for different data
    DesignVector other = conventional_afdm(cfg, PskConstellation{8}, 2);
    const QuadFormCache cache = build_quadform_cache(basis, laz_small(), other.b());
    CHECK_THROWS_AS(JipdMm(cache, opt, init), std::invalid_argument);

    // no reserved subcarriers
    AfdmConfig full = cfg_n(16, 0.0);
    DesignVector dv_full = conventional_afdm(full, PskConstellation{8}, 3);
    const QuadFormCache cache_full = build_quadform_cache(basis, laz_small(), dv_full.b());
    CHECK_THROWS_AS(JipdMm(cache_full, opt, dv_full), std::invalid_argument);
}
