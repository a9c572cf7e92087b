#include "afdm/optimizer.hpp"

#include <cmath>
#include <limits>

namespace afdm {

const char* to_string(DesignMode m) {
    switch (m) {
        case DesignMode::af_shape: return "af-shape";
        case DesignMode::papr_min: return "papr-min";
        case DesignMode::joint: return "joint";
    }
    return "?";
}

const char* to_string(VariableSet v) {
    return v == VariableSet::rcs_only ? "rcs" : "rcs+c2";
}

DesignMode design_mode_from_string(const std::string& s) {
    if (s == "af-shape" || s == "af_shape") return DesignMode::af_shape;
    if (s == "papr-min" || s == "papr_min") return DesignMode::papr_min;
    if (s == "joint") return DesignMode::joint;
    throw std::invalid_argument("unknown design mode: " + s);
}

VariableSet variable_set_from_string(const std::string& s) {
    if (s == "rcs" || s == "rcs_only") return VariableSet::rcs_only;
    if (s == "rcs+c2" || s == "rcs_plus_prechirp") return VariableSet::rcs_plus_prechirp;
    throw std::invalid_argument("unknown variable set: " + s);
}

void OptimizerOptions::validate() const {
    if (ell < 2 || ell % 2 != 0)
        throw std::invalid_argument("optimizer: ell must be an even integer >= 2");
    if (r_max < 1) throw std::invalid_argument("optimizer: r_max must be >= 1");
    if (r_nsp < 0) throw std::invalid_argument("optimizer: r_nsp must be >= 0");
    if (stop_tol <= 0) throw std::invalid_argument("optimizer: stop_tol must be positive");
    if (mode == DesignMode::joint && gamma_db <= 0)
        throw std::invalid_argument("optimizer: joint mode needs gamma_db > 0");
    if (tp_max_retries < 1) throw std::invalid_argument("optimizer: tp_max_retries must be >= 1");
}

Lemma2Coeffs lemma2_coeffs(double x0, double t, int ell) {
    if (ell < 2) throw std::invalid_argument("lemma2: ell must be >= 2");
    if (x0 < 0.0) throw std::invalid_argument("lemma2: x0 must be nonnegative");
    if (x0 >= t) throw std::invalid_argument("lemma2: x0 >= t (peak bound too small)");
    if (ell == 2) {
        // Quadratic target: the majorant is x^2 itself.
        return {1.0, 0.0, 0.0};
    }
    const double gap = t - x0;
    const double denom = std::max(gap * gap, 1e-30);
    const double x0l = std::pow(x0, ell);
    const double x0l1 = std::pow(x0, ell - 1);
    const double alpha = (std::pow(t, ell) - x0l - ell * x0l1 * gap) / denom;
    const double beta = ell * x0l1 - 2.0 * alpha * x0;
    const double constant = alpha * x0 * x0 - (ell - 1) * x0l;
    return {alpha, beta, constant};
}

std::pair<double, double> lemma1_check(const MatC& y, const MatC& z,
                                       const VecC& q0, const VecC& q) {
    const MatC diff = z - y;
    Eigen::SelfAdjointEigenSolver<MatC> es(diff, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, diff.norm());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale)
        throw std::invalid_argument("lemma1: Z - Y is not positive semidefinite");
    const double lhs = std::real(q.dot(y * q));
    const double rhs = std::real(q.dot(z * q)) + 2.0 * std::real(q.dot((y - z) * q0)) +
                       std::real(q0.dot((z - y) * q0));
    return {lhs, rhs};
}

namespace {

double cross2d(cd a, cd b) { return std::imag(std::conj(a) * b); }

cd project_segment(cd p, cd a, cd b) {
    const cd ab = b - a;
    const double len2 = std::norm(ab);
    if (len2 <= 0.0) return a;
    double t = std::real(std::conj(ab) * (p - a)) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return a + t * ab;
}

// max_i [ Re(m_ii) + sum_{j != i} |m_ij| ] >= lambda_max for Hermitian m.
double gershgorin_max(const MatC& m) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double s = std::real(m(i, i));
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j != i) s += std::abs(m(i, j));
        }
        best = std::max(best, s);
    }
    return best;
}

// Safeguarded power iteration for a Hermitian PSD operator. Returns the
// inflated Rayleigh estimate once converged, capped by `fallback` (an always
// valid upper bound); returns `fallback` when not converged.
template <typename Vec, typename Apply>
double power_lambda_max(Apply&& apply, int dim, double fallback) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i)
        v[i] = 1.0 + 0.25 * ((i * 2654435761u) % 97) / 97.0;
    v.normalize();
    double prev = -1.0;
    for (int it = 0; it < 60; ++it) {
        Vec w = apply(v);
        const double lam = std::real(v.dot(w));
        const double norm = w.norm();
        if (norm <= 0.0) return 0.0;
        if (it >= 8 && std::abs(lam - prev) <= 1e-4 * std::max(std::abs(lam), 1e-300))
            return std::min(1.05 * lam, fallback);
        prev = lam;
        v = w / norm;
    }
    return fallback;
}

}  // namespace

cd project_convex_hull(cd p, const std::vector<cd>& alphabet) {
    const std::size_t q = alphabet.size();
    if (q == 0) throw std::invalid_argument("projection: empty alphabet");
    if (q == 1) return alphabet[0];
    if (q == 2) return project_segment(p, alphabet[0], alphabet[1]);

    // Vertices arrive in increasing-angle (counterclockwise) order.
    bool inside = true;
    for (std::size_t k = 0; k < q; ++k) {
        const cd a = alphabet[k];
        const cd b = alphabet[(k + 1) % q];
        if (cross2d(b - a, p - a) < -1e-14) {
            inside = false;
            break;
        }
    }
    if (inside) return p;

    cd best = alphabet[0];
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < q; ++k) {
        const cd cand = project_segment(p, alphabet[k], alphabet[(k + 1) % q]);
        const double dist = std::norm(p - cand);
        if (dist < best_d) {
            best_d = dist;
            best = cand;
        }
    }
    return best;
}

std::vector<int> snap_discrete(VecC& u, const AfdmConfig& cfg,
                               const SubcarrierPartition& partition) {
    std::vector<int> chosen;
    chosen.reserve(partition.data.size());
    double sum_d = 0.0;
    for (int m : partition.data) {
        const auto alphabet = build_prechirp_alphabet(cfg, m);
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < alphabet.size(); ++l) {
            const double dist = std::norm(u[m] - alphabet[l]);
            if (dist < best_d) {
                best_d = dist;
                best = static_cast<int>(l);
            }
        }
        u[m] = alphabet[static_cast<std::size_t>(best)];
        chosen.push_back(best);
        sum_d += std::norm(u[m]);
    }
    if (!partition.reserved.empty()) {
        const double deficit = std::max(cfg.n - sum_d, 0.0);
        double sum_r = 0.0;
        for (int m : partition.reserved) sum_r += std::norm(u[m]);
        if (sum_r < 1e-15 * cfg.n) {
            const double amp = std::sqrt(deficit / partition.reserved.size());
            for (int m : partition.reserved) u[m] = cd{amp, 0.0};
        } else {
            const double scale = std::sqrt(deficit / sum_r);
            for (int m : partition.reserved) u[m] *= scale;
        }
    }
    return chosen;
}

JipdMm::JipdMm(const QuadFormCache& cache, const OptimizerOptions& opt, DesignVector init)
    : cache_(cache), opt_(opt), init_(std::move(init)) {
    opt_.validate();
    init_.validate(cache_.cfg);
    use_isl_ = opt_.mode != DesignMode::papr_min;
    use_papr_ = opt_.mode != DesignMode::af_shape;
    if (use_isl_ && !cache_.has_isl)
        throw std::invalid_argument("optimizer: mode requires a cache with an ISL block");
    if (init_.partition.reserved.empty())
        throw std::invalid_argument("optimizer: no reserved chirp-subcarriers to optimize");
    const VecC b = init_.b();
    if ((b - cache_.b).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("optimizer: cache built for a different data realization");

    fixed_prechirp_ = init_.u;
    for (int m : init_.partition.data) {
        alphabets_.push_back(build_prechirp_alphabet(cache_.cfg, m));
    }

    if (use_papr_) {
        const double gamma_db = opt_.mode == DesignMode::papr_min ? 0.0 : opt_.gamma_db;
        gamma_p_ = linear_from_db(gamma_db) * avg_power(init_.u);
        gamma_ell_ = cache_.nl() * std::pow(gamma_p_, opt_.ell);
    }
    reset_schedule_();
}

void JipdMm::reset_schedule_() {
    omega_initialized_ = false;
    rho_frozen_ = false;
    constraint_seen_ = false;
    feasible_run_ = 0;
    omega0_ = 0.0;
    // papr_min: the penalty is the whole objective, unit weight.
    // joint: dimensionless weight against the ISL direction, continued by the
    // feasibility-driven schedule in run().
    rho_ = opt_.mode == DesignMode::papr_min ? 1.0 : opt_.rho_init_scale;
    rho0_ = rho_;
}

double JipdMm::avg_power(const VecC& u) const {
    return std::real(u.dot(cache_.r_mat * u));
}

double JipdMm::sample_peak(const VecC& u) const {
    const VecC st = cache_.phi_p * u;
    double peak = 0.0;
    for (Eigen::Index k = 0; k < st.size(); ++k) peak = std::max(peak, std::norm(st[k]));
    return peak;
}

VecC JipdMm::nsp_coeff(const VecC& u) const {
    VecC g = VecC::Zero(u.size());
    for (int m : init_.partition.data) g[m] = -u[m];
    return g;
}

VecC JipdMm::isl_linear_coeff(const VecC& u, StepData& step) const {
    const auto zeta = af_quadforms(cache_, u);
    const auto& cells = cache_.cells;
    const int n = cache_.n();

    double isl = 0.0;
    MatC m = MatC::Zero(n, n);
    for (std::size_t a = 0; a < cells.size(); ++a) {
        isl += cells[a].w * std::norm(zeta[a]);
        m.noalias() += (cells[a].w * std::conj(zeta[a])) * cache_.c_mats[a];
    }
    step.isl_value = isl;

    // Q0 = (M + M^H) - 2 lambda_J u u^H; the rank-one part is negative
    // semidefinite, so a Gershgorin bound on the accumulated part alone
    // already dominates lambda_max(Q0).
    const MatC qa = m + m.adjoint();
    step.lambda_q = gershgorin_max(qa);
    return qa * u - (2.0 * cache_.lambda_j * n) * u - step.lambda_q * u;
}

VecC JipdMm::papr_linear_coeff(const VecC& u, double t_p, StepData& step) const {
    const int n = cache_.n();
    const int nl = cache_.nl();
    const int ell = opt_.ell;

    const VecC st = cache_.phi_p * u;
    VecD p(nl);
    for (int k = 0; k < nl; ++k) p[k] = std::norm(st[k]);
    if (p.maxCoeff() >= t_p)
        throw std::runtime_error("papr surrogate: peak power reached the bound t_p");

    step.p = p;
    step.t_p = t_p;
    step.gamma_p = gamma_p_;
    step.gamma_ell = gamma_ell_;

    VecD alpha(nl), beta(nl), gamma_c(nl), q(nl), shift(nl), w2(nl);
    double sum_gamma = 0.0, sum_b2a = 0.0, sum_aq2 = 0.0, sum_bq = 0.0;
    for (int k = 0; k < nl; ++k) {
        const auto co = lemma2_coeffs(p[k], t_p, ell);
        alpha[k] = co.alpha;
        beta[k] = co.beta;
        gamma_c[k] = co.constant;
        q[k] = p[k] + co.beta / (2.0 * co.alpha);
        shift[k] = co.beta / (2.0 * n * co.alpha);
        w2[k] = 2.0 * co.alpha * q[k];  // = ell * p^{ell-1}
        sum_gamma += co.constant;
        sum_b2a += co.beta * co.beta / (4.0 * co.alpha);
        sum_aq2 += co.alpha * q[k] * q[k];
        sum_bq += co.beta * q[k];
    }
    step.alpha = alpha;
    step.beta = beta;
    step.gamma_c = gamma_c;

    step.e1 = gamma_ell_ - sum_gamma;
    step.e2 = step.e1 + sum_b2a;

    // lambda_L bounds lambda_max of L = sum_k alpha_k w_k w_k^H in the lifted
    // space, w_k = vec(G_k + shift_k I). lambda_max(L) equals lambda_max of
    // the (N L_P)-sized Gram matrix H_kl = sqrt(a_k a_l) <w_k, w_l>, estimated
    // by safeguarded power iteration and capped by the trace and Gershgorin
    // bounds computed from the cached row Grams.
    const VecD& rn = cache_.row_norms;
    double lam_trace = 0.0;
    for (int k = 0; k < nl; ++k) {
        lam_trace += alpha[k] * (rn[k] * rn[k] + 2.0 * shift[k] * rn[k] + shift[k] * shift[k] * n);
    }
    // H v = sa .* (inner (sa .* v)) with inner w = RG w + rn (shift.w) +
    // shift (rn.w) + n shift (shift.w); only the RG matvec is quadratic.
    const VecD sa = alpha.cwiseSqrt();
    const double lam_l = power_lambda_max<VecD>(
        [&](const VecD& v) -> VecD {
            const VecD w = sa.cwiseProduct(v);
            VecD out = cache_.row_gram * w;
            out += rn * shift.dot(w);
            out += shift * (rn.dot(w) + static_cast<double>(n) * shift.dot(w));
            return sa.cwiseProduct(out);
        },
        nl, lam_trace);
    step.lambda_l = lam_l;

    const double c0 = 2.0 * lam_l * static_cast<double>(n) * n - sum_aq2;
    step.e3 = step.e2 - c0 - sum_bq;

    // Q_P1 = X + a I + b u u^H with X = PhiP^H diag(w2) PhiP.
    const double a = -step.e3 / n;
    const double b = -2.0 * lam_l;
    const double tr_x = w2.dot(rn);
    const double uxu = w2.dot(p);
    const VecC xu = cache_.phi_p.adjoint() * (w2.array() * st.array()).matrix();
    const double xi = uxu + a * n + b * static_cast<double>(n) * n;
    step.xi = xi;

    if (opt_.papr_penalty == PaprPenaltyKind::moment) {
        // Linear moment penalty: one more quadratic majorization of
        // u^H Q_P0 u = u^H X u + b |u^H u_r|^2 gives the surrogate direction
        // c = (Q_P0 - lambda_X I) u_r. The rank-one part is NSD, so any bound
        // on the PSD factor X suffices: power iteration through PhiP, capped
        // by trace(X).
        const double lam_x = power_lambda_max<VecC>(
            [&](const VecC& v) -> VecC {
                const VecC sv = cache_.phi_p * v;
                return cache_.phi_p.adjoint() * (w2.array() * sv.array()).matrix();
            },
            n, tr_x);
        step.lambda_p2 = 0.0;
        step.lambda_p3 = lam_x;
        return xu + (b * n - lam_x) * u;
    }

    double lam_p2;
    double lam_p3;
    if (opt_.papr_bound == PaprBoundKind::frobenius) {
        const double tr_x2 = w2.dot(cache_.row_gram * w2);
        lam_p2 = tr_x2 + a * a * n + b * b * static_cast<double>(n) * n + 2.0 * a * tr_x +
                 2.0 * b * uxu + 2.0 * a * b * n;
        lam_p2 = std::max(lam_p2, 0.0);
        // ||Q_P2||_F^2 = 4 lambda_P2 (lambda_P2 N^2 - xi^2), a Frobenius bound
        // on lambda_max(Q_P2).
        lam_p3 = 2.0 * std::sqrt(std::max(lam_p2 * (lam_p2 * static_cast<double>(n) * n - xi * xi), 0.0));
    } else {
        MatC x = cache_.phi_p;
        x.array().colwise() *= w2.array().cast<cd>();
        MatC qp1 = cache_.phi_p.adjoint() * x;
        qp1.noalias() += b * (u * u.adjoint());
        qp1.diagonal().array() += a;
        lam_p2 = qp1.squaredNorm();
        // Gershgorin rows of 2 xi Q_P1 (the -2 lambda_P2 u u^H part is NSD).
        const double sgn = 2.0 * xi;
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double s = sgn * std::real(qp1(i, i));
            for (int j = 0; j < n; ++j) {
                if (j != i) s += std::abs(sgn) * std::abs(qp1(i, j));
            }
            best = std::max(best, s);
        }
        lam_p3 = best;
    }
    step.lambda_p2 = lam_p2;
    step.lambda_p3 = lam_p3;

    const VecC qp1_u = xu + (a + b * n) * u;
    return 2.0 * xi * qp1_u - (2.0 * lam_p2 * n) * u - lam_p3 * u;
}

VecC JipdMm::apply_update(const VecC& u_prev, const VecC& u_pre) const {
    const int n = cache_.n();
    VecC out(n);
    double sum_d = 0.0;
    if (opt_.variables == VariableSet::rcs_only) {
        for (int m : init_.partition.data) {
            out[m] = fixed_prechirp_[m];
            sum_d += std::norm(out[m]);
        }
    } else {
        std::size_t i = 0;
        for (int m : init_.partition.data) {
            out[m] = project_convex_hull(u_pre[m], alphabets_[i++]);
            sum_d += std::norm(out[m]);
        }
    }

    double deficit = n - sum_d;
    if (deficit < 0.0) {
        // Unreachable while hull points stay inside the unit disk; rescale the
        // projected entries toward the origin to restore feasibility.
        const double scale = std::sqrt(std::max(n * (1.0 - 1e-12), 0.0) / sum_d);
        for (int m : init_.partition.data) out[m] *= scale;
        sum_d *= scale * scale;
        deficit = n - sum_d;
    }

    double sum_r = 0.0;
    for (int m : init_.partition.reserved) sum_r += std::norm(u_pre[m]);
    if (sum_r < 1e-15 * n) {
        // Degenerate pre-projection energy on R: keep the previous direction.
        double prev_r = 0.0;
        for (int m : init_.partition.reserved) prev_r += std::norm(u_prev[m]);
        const double eps = std::sqrt(deficit / prev_r);
        for (int m : init_.partition.reserved) out[m] = eps * u_prev[m];
    } else {
        const double eps = std::sqrt(deficit / sum_r);
        for (int m : init_.partition.reserved) out[m] = eps * u_pre[m];
    }
    return out;
}

double JipdMm::merit_(const VecC& u) const {
    double isl = 0.0;
    if (use_isl_) {
        const auto zeta = af_quadforms(cache_, u);
        for (std::size_t a = 0; a < cache_.cells.size(); ++a)
            isl += cache_.cells[a].w * std::norm(zeta[a]);
    }
    if (!use_papr_) return isl;

    const VecC st = cache_.phi_p * u;
    double moment = 0.0, peak = 0.0, avg = 0.0;
    for (Eigen::Index k = 0; k < st.size(); ++k) {
        const double pk = std::norm(st[k]);
        moment += std::pow(pk, opt_.ell);
        peak = std::max(peak, pk);
        avg += pk;
    }
    if (opt_.mode == DesignMode::papr_min) return moment;
    // joint: drive feasibility first, then the ISL
    const double papr_db = db_from_linear(peak * st.size() / avg);
    if (papr_db > opt_.gamma_db + 0.05)
        return 1e12 * (papr_db - opt_.gamma_db) + isl;
    return isl;
}

VecC JipdMm::iterate(const VecC& u, int r, StepData& step) {
    const int n = cache_.n();
    double t_p = use_papr_ ? 1.1 * sample_peak(u) : 0.0;

    for (int attempt = 0; attempt < opt_.tp_max_retries; ++attempt) {
        step = StepData{};
        step.rho = rho_;
        step.t_p = t_p;

        VecC g = VecC::Zero(n);
        if (use_isl_) {
            step.d = isl_linear_coeff(u, step);
            g += step.d;
        }
        if (use_papr_) {
            step.c = papr_linear_coeff(u, t_p, step);
            if (opt_.mode == DesignMode::joint) {
                // rho is a dimensionless weight relative to the ISL direction;
                // the penalty coefficient scale varies by orders of magnitude
                // across iterations, so normalize it out each time.
                const double dinf = step.d.cwiseAbs().maxCoeff();
                const double cinf = std::max(step.c.cwiseAbs().maxCoeff(), 1e-300);
                g += (rho_ * dinf / cinf) * step.c;
            } else {
                g += rho_ * step.c;
            }
        }

        if (opt_.variables == VariableSet::rcs_plus_prechirp && r >= opt_.r_nsp) {
            if (!omega_initialized_) {
                omega0_ = opt_.omega_init_scale * g.cwiseAbs().maxCoeff();
                omega_initialized_ = true;
            }
            const double omega = std::min(
                omega0_ * std::pow(opt_.omega_growth, static_cast<double>(r - opt_.r_nsp)),
                opt_.omega_span * omega0_);
            step.omega = omega;
            step.g_nsp = nsp_coeff(u);
            g += omega * step.g_nsp;
        }

        step.g_total = g;
        step.u_pre = -g;

        // The exact MM step, plus a safeguarded step-size ladder along the
        // normalized direction. The majorizer's eigenvalue anchors make the
        // exact step very short (and park the hull projections on vertices);
        // longer steps are accepted only when the true objective improves, so
        // every descent guarantee of the base map is preserved.
        VecC next = apply_update(u, step.u_pre);
        const double beta = std::real(u.dot(step.u_pre)) / n;
        if (beta > 0.0) {
            double best_merit = merit_(next);
            const VecC dir = step.u_pre / beta - u;
            for (double kappa : {1.0, 3.0, 9.0, 27.0}) {
                const VecC cand = apply_update(u, u + kappa * dir);
                const double m = merit_(cand);
                if (m < best_merit) {
                    best_merit = m;
                    next = cand;
                }
            }
        }

        if (use_papr_ && sample_peak(next) > t_p) {
            t_p *= 1.1;
            continue;
        }
        step.objective = 2.0 * std::real(g.dot(next));
        return next;
    }
    throw std::runtime_error("optimizer: adaptive peak bound failed to stabilize after " +
                             std::to_string(opt_.tp_max_retries) + " retries");
}

DesignResult JipdMm::run() {
    DesignResult res;
    res.dv = init_;
    VecC u = init_.u;

    reset_schedule_();

    if (cache_.has_isl) res.isl_init = weighted_isl(u, cache_);
    res.papr_init_db = papr(u, cache_).papr_db;

    const bool gated_stop = opt_.variables == VariableSet::rcs_plus_prechirp;
    double prev_obj = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    int small_count = 0;  // consecutive iterations below the stop tolerance
    int r = 0;
    StepData step;

    // Tracked merit for the extrapolation safeguard.
    const auto merit = [&](const VecC& v) -> double { return merit_(v); };
    const bool can_accelerate = opt_.accelerate;

    while (r < opt_.r_max) {
        const PaprReport now = papr(u, cache_);
        VecC u_next = iterate(u, r, step);

        TraceRow row;
        row.iter = r;
        row.isl = use_isl_ ? step.isl_value : std::numeric_limits<double>::quiet_NaN();
        row.papr_db = now.papr_db;
        row.rho = step.rho;
        row.omega = step.omega;
        row.t_p = step.t_p;
        row.objective = step.objective;
        res.trace.push_back(row);

        // Squared-iterative extrapolation through two base steps:
        // u' = u - 2 gamma dr + gamma^2 v, with backtracking of the step
        // length toward the plain double step and a monotone merit safeguard.
        if (can_accelerate && r + 1 < opt_.r_max && r % 2 == 1 && res.trace.size() >= 2) {
            StepData s2;
            const VecC u_inner = u_next;
            const VecC u2 = iterate(u_inner, r + 1, s2);
            const VecC dr = u_next - u;
            const VecC v = u2 - u_next - dr;
            const double vn = v.norm();
            bool adopted = false;
            if (vn > 1e-14) {
                double gamma = std::min(-dr.norm() / vn, -1.0);
                double best_merit = merit(u2);
                VecC best = u2;
                // Backtrack toward the plain double step, then keep pushing
                // along the same extrapolation ray while the merit improves.
                for (int bt = 0; bt < 6 && gamma < -1.0 + 1e-12; ++bt) {
                    const VecC extrapolated = u - 2.0 * gamma * dr + gamma * gamma * v;
                    const VecC candidate = apply_update(u2, extrapolated);
                    if (merit(candidate) < best_merit) {
                        best_merit = merit(candidate);
                        best = candidate;
                        adopted = true;
                        break;
                    }
                    gamma = 0.5 * (gamma - 1.0);
                }
                for (int push = 0; adopted && push < 8; ++push) {
                    gamma *= 2.0;
                    const VecC extrapolated = u - 2.0 * gamma * dr + gamma * gamma * v;
                    const VecC candidate = apply_update(best, extrapolated);
                    const double m = merit(candidate);
                    if (m >= best_merit) break;
                    best_merit = m;
                    best = candidate;
                }
                if (adopted) u_next = best;
            }
            if (!adopted) u_next = u2;
            if (adopted) small_count = 0;  // objective jumped; restart the stop window
            TraceRow row2 = row;
            row2.iter = r + 1;
            row2.isl = use_isl_ ? s2.isl_value : std::numeric_limits<double>::quiet_NaN();
            row2.papr_db = papr(u_inner, cache_).papr_db;
            row2.objective = s2.objective;
            res.trace.push_back(row2);
            prev_obj = step.objective;
            step = s2;
            ++r;
        }

        const double obj = step.objective;
        u = u_next;
        ++r;

        PaprReport pr;
        if (opt_.mode == DesignMode::joint) pr = papr(u, cache_);

        if (!std::isnan(prev_obj)) {
            const double rel = std::abs(obj - prev_obj) / std::max(std::abs(prev_obj), 1e-30);
            small_count = rel < opt_.stop_tol ? small_count + 1 : 0;
            const bool gate_open = !gated_stop || r > opt_.r_nsp + 10;
            const bool target_met =
                opt_.mode != DesignMode::joint || pr.papr_db <= opt_.gamma_db + 0.05;
            if (small_count >= 3 && gate_open && target_met) {
                converged = true;
                break;
            }
        }
        prev_obj = obj;

        if (opt_.mode == DesignMode::joint) {
            const bool violated = pr.papr_db > opt_.gamma_db;
            if (violated) constraint_seen_ = true;
            // A frozen rho is re-armed if the iterate drifts back above the
            // target (with a small hysteresis margin).
            if (rho_frozen_ && pr.papr_db > opt_.gamma_db + 0.1) {
                rho_frozen_ = false;
                feasible_run_ = 0;
            }
            if (!rho_frozen_) {
                if (violated) {
                    rho_ = std::min(rho_ * opt_.rho_up, opt_.rho_span * rho0_);
                    feasible_run_ = 0;
                } else {
                    rho_ = std::max(rho_ / opt_.rho_down, rho0_ / opt_.rho_span);
                    // Freeze only once the constraint has actually been active;
                    // a run that starts feasible must keep rho responsive.
                    if (constraint_seen_ && ++feasible_run_ >= opt_.rho_freeze_count)
                        rho_frozen_ = true;
                }
            }
        }
    }

    res.iterations = r;
    res.converged = converged;

    if (opt_.variables == VariableSet::rcs_plus_prechirp) {
        const auto chosen = snap_discrete(u, cache_.cfg, init_.partition);
        res.dv.prechirp_index.assign(cache_.cfg.n, -1);
        for (std::size_t i = 0; i < init_.partition.data.size(); ++i)
            res.dv.prechirp_index[static_cast<std::size_t>(init_.partition.data[i])] =
                chosen[i];
    }
    res.dv.u = u;

    if (cache_.has_isl) res.isl_final = weighted_isl(u, cache_);
    res.papr_final_db = papr(u, cache_).papr_db;
    res.feasible =
        opt_.mode != DesignMode::joint || res.papr_final_db <= opt_.gamma_db + 0.05;

    TraceRow final_row;
    final_row.iter = r;
    final_row.isl = res.isl_final;
    final_row.papr_db = res.papr_final_db;
    final_row.rho = rho_;
    final_row.omega = step.omega;
    final_row.t_p = step.t_p;
    final_row.objective = step.objective;
    res.trace.push_back(final_row);
    return res;
}

DesignResult run_jipd_mm(const QuadFormCache& cache, const OptimizerOptions& opt,
                         DesignVector init) {
    JipdMm solver(cache, opt, std::move(init));
    return solver.run();
}

}  // namespace afdm
