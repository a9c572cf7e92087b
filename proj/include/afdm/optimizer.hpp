// Joint ISL / PAPR / discrete-phase majorization-minimization waveform design.
//
// Each iteration linearizes the weighted-ISL objective and the l-norm peak
// power penalty around the current iterate u^(r) through two quadratic
// majorization steps each, adds a negative-square penalty that drives the
// relaxed data-subcarrier entries toward the discrete phase alphabet, and
// minimizes the resulting linear form over (convex hulls on D) x (energy
// sphere) with a block projection / normalization update.
#pragma once

#include "afdm/metrics.hpp"

#include <limits>
#include <utility>

namespace afdm {

enum class DesignMode { af_shape, papr_min, joint };
enum class VariableSet { rcs_only, rcs_plus_prechirp };

const char* to_string(DesignMode m);
const char* to_string(VariableSet v);
DesignMode design_mode_from_string(const std::string& s);
VariableSet variable_set_from_string(const std::string& s);

// Eigenvalue-bound flavor for the lifted PAPR-penalty majorizer. Frobenius
// uses closed forms computed from cached row Grams in O((N L_P)^2); the
// Gershgorin path assembles the dense N x N matrices and is kept for
// validation and small problems.
enum class PaprBoundKind { frobenius, gershgorin };

// Shape of the peak-power penalty term.
//   moment:  rho * sum_k p_k(u)^ell, linearized by the Lemma-2 / lift chain.
//            All lift constants stay additive, so the step size survives even
//            when the iterate is far from feasible. Default.
//   squared: rho * |u^H Q_P1 u|^2 on the shifted constraint slack. Matches
//            the full bookkeeping chain term for term, but the exact rank-one
//            lift bound lambda_P2 = ||Q_P1||_F^2 grows with the squared slack
//            constants, which freezes the update at large N and ell.
enum class PaprPenaltyKind { moment, squared };

struct OptimizerOptions {
    DesignMode mode = DesignMode::joint;
    VariableSet variables = VariableSet::rcs_plus_prechirp;
    double gamma_db = 5.0;       // target PAPR (joint mode); papr_min forces 0 dB
    int ell = 16;                // even moment exponent, >= 2
    int r_max = 600;
    int r_nsp = 300;             // NSP activation iteration
    double stop_tol = 1e-4;      // relative change of the surrogate objective
    bool accelerate = true;      // squared-iterative wrapper with safeguard

    // rho continuation (joint mode): grow while the PAPR target is violated,
    // shrink otherwise, freeze after `rho_freeze_count` feasible iterations.
    double rho_init_scale = 1e-2;
    double rho_up = 1.5;
    double rho_down = 1.2;
    double rho_span = 1e4;  // rho in [rho0/span, rho0*span]
    int rho_freeze_count = 20;

    // omega continuation (NSP weight).
    double omega_init_scale = 1e-3;
    double omega_growth = 1.05;
    double omega_span = 1e3;

    PaprBoundKind papr_bound = PaprBoundKind::frobenius;
    PaprPenaltyKind papr_penalty = PaprPenaltyKind::moment;
    int tp_max_retries = 50;

    void validate() const;
};

// Quadratic majorant coefficients for x^ell at x0 on [0, t]:
//   x^ell <= alpha x^2 + beta x + constant,  equality at x0 and at t.
struct Lemma2Coeffs {
    double alpha;
    double beta;
    double constant;
};

// alpha = (t^l - x0^l - l x0^{l-1} (t - x0)) / (t - x0)^2, denominator floored
// at 1e-30. Throws if x0 >= t (adaptive peak bound failed upstream).
Lemma2Coeffs lemma2_coeffs(double x0, double t, int ell);

// Test utility for the quadratic majorization inequality
//   q^H Y q <= q^H Z q + 2 Re{q^H (Y - Z) q0} + q0^H (Z - Y) q0,  Z >= Y.
// Returns (lhs, rhs); throws if Z - Y is not PSD.
std::pair<double, double> lemma1_check(const MatC& y, const MatC& z,
                                       const VecC& q0, const VecC& q);

// Euclidean projection onto the convex polygon with `alphabet` as vertices
// (points on the unit circle in angular order). Singleton alphabets return
// their single point.
cd project_convex_hull(cd p, const std::vector<cd>& alphabet);

// Replace every data-subcarrier entry by its nearest alphabet vertex and
// rescale the reserved entries so that ||u||^2 = n again. Returns the chosen
// vertex indices (aligned with partition.data).
std::vector<int> snap_discrete(VecC& u, const AfdmConfig& cfg,
                               const SubcarrierPartition& partition);

struct TraceRow {
    int iter = 0;
    double isl = std::numeric_limits<double>::quiet_NaN();
    double papr_db = std::numeric_limits<double>::quiet_NaN();
    double rho = 0.0;
    double omega = 0.0;
    double t_p = 0.0;
    double objective = std::numeric_limits<double>::quiet_NaN();
};

struct DesignResult {
    DesignVector dv;
    std::vector<TraceRow> trace;
    int iterations = 0;
    bool converged = false;
    bool feasible = true;  // joint mode: PAPR(u_final) <= gamma + 0.05 dB
    double isl_init = std::numeric_limits<double>::quiet_NaN();
    double isl_final = std::numeric_limits<double>::quiet_NaN();
    double papr_init_db = std::numeric_limits<double>::quiet_NaN();
    double papr_final_db = std::numeric_limits<double>::quiet_NaN();
};

class JipdMm {
public:
    // `cache` must carry an ISL block for af_shape/joint; papr_min accepts a
    // PAPR-only cache. The initial design vector supplies the data realization
    // (through b) and u^(0).
    JipdMm(const QuadFormCache& cache, const OptimizerOptions& opt, DesignVector init);

    DesignResult run();

    // Per-iteration internals exposed for the majorization test-suite.
    struct StepData {
        VecD p;                       // sample powers p_k(u^(r))
        VecD alpha, beta, gamma_c;    // moment majorant coefficients
        double t_p = 0.0;
        double lambda_q = 0.0;        // >= lambda_max(Q0)
        double lambda_l = 0.0;        // >= lambda_max of lifted moment matrix
        double lambda_p2 = 0.0;       // = ||Q_P1||_F^2 (rank-one lift, exact)
        double lambda_p3 = 0.0;       // >= lambda_max(Q_P2)
        double e1 = 0.0, e2 = 0.0, e3 = 0.0;
        double xi = 0.0;              // u^H Q_P1 u at the iterate
        double gamma_p = 0.0;         // peak-power threshold
        double gamma_ell = 0.0;
        double isl_value = std::numeric_limits<double>::quiet_NaN();
        VecC d, c, g_nsp, g_total, u_pre;
        double rho = 0.0, omega = 0.0;
        double objective = 0.0;
    };

    // One full MM step from `u` (including the adaptive peak-bound retry
    // loop); returns the next iterate and fills `step`.
    VecC iterate(const VecC& u, int r, StepData& step);

    // Surrogate coefficient d^(r) = (Q0 - lambda_Q I) u^(r) for the ISL term.
    VecC isl_linear_coeff(const VecC& u, StepData& step) const;

    // Surrogate coefficient c^(r) for the peak-power penalty. Throws
    // std::runtime_error if some p_k >= t_p (caller retries with larger t_p).
    VecC papr_linear_coeff(const VecC& u, double t_p, StepData& step) const;

    // NSP gradient: -u on D, 0 on R.
    VecC nsp_coeff(const VecC& u) const;

    // Block projection/normalization update from the pre-projection point.
    VecC apply_update(const VecC& u_prev, const VecC& u_pre) const;

    double avg_power(const VecC& u) const;  // u^H R u
    const QuadFormCache& cache() const { return cache_; }

private:
    const QuadFormCache& cache_;
    OptimizerOptions opt_;
    DesignVector init_;
    VecC fixed_prechirp_;                    // ubar on D (rcs_only)
    std::vector<std::vector<cd>> alphabets_; // per data subcarrier

    double gamma_p_ = 0.0;   // fixed peak threshold 10^(gamma/10) * u0^H R u0
    double gamma_ell_ = 0.0;

    bool use_isl_ = true;
    bool use_papr_ = true;

    // Penalty continuation state (reset by run()).
    double rho_ = 0.0;
    double rho0_ = 0.0;
    bool rho_frozen_ = false;
    bool constraint_seen_ = false;
    int feasible_run_ = 0;
    double omega0_ = 0.0;
    bool omega_initialized_ = false;

    double sample_peak(const VecC& u) const;
    void reset_schedule_();
    // True-objective merit used by the step-size safeguard and the
    // extrapolation wrapper (ISL, ell-moment, or the joint combination).
    double merit_(const VecC& u) const;
};

DesignResult run_jipd_mm(const QuadFormCache& cache, const OptimizerOptions& opt,
                         DesignVector init);

}  // namespace afdm
