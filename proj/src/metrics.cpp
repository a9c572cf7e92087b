#include "afdm/metrics.hpp"

#include <cmath>

namespace afdm {

std::vector<LazSpec::Cell> LazSpec::cells() const {
    validate();
    const double dmu = delta_mu();
    std::vector<Cell> out;
    out.reserve((2 * tau_max + 1) * l_mu);
    std::size_t idx = 0;
    for (int tau = -tau_max; tau <= tau_max; ++tau) {
        for (int q = 0; q < l_mu; ++q) {
            const double mu = mu_min + q * dmu;
            const std::size_t flat = idx++;
            if (tau == 0 && mu == 0.0) continue;
            Cell c;
            c.tau = tau;
            c.mu = mu;
            c.w = weights.empty() ? 1.0 : weights.at(flat);
            out.push_back(c);
        }
    }
    return out;
}

void LazSpec::validate() const {
    if (tau_max < 0) throw std::invalid_argument("laz: tau_max must be >= 0");
    if (l_mu < 1) throw std::invalid_argument("laz: l_mu must be >= 1");
    if (l_mu > 1 && mu_max < mu_min) throw std::invalid_argument("laz: mu_max < mu_min");
    const std::size_t grid = static_cast<std::size_t>(2 * tau_max + 1) * l_mu;
    if (!weights.empty() && weights.size() != grid)
        throw std::invalid_argument("laz: weights must cover the full tau/Doppler grid");
}

cd ambiguity(const VecC& s, int tau, double mu) {
    const int n = static_cast<int>(s.size());
    int shift = tau % n;
    if (shift < 0) shift += n;
    cd acc{0.0, 0.0};
    for (int k = 0; k < n; ++k) {
        const int ks = (k + shift) % n;
        acc += unit_phase(-mu * k / n) * s[k] * std::conj(s[ks]);
    }
    return acc;
}

AfGrid af_grid(const VecC& s, const LazSpec& laz) {
    AfGrid grid;
    grid.laz = laz;
    const auto cells = laz.cells();
    grid.values.reserve(cells.size());
    for (const auto& c : cells) grid.values.push_back(ambiguity(s, c.tau, c.mu));
    return grid;
}

double weighted_isl_of_samples(const VecC& s, const LazSpec& laz) {
    double acc = 0.0;
    for (const auto& c : laz.cells()) acc += c.w * std::norm(ambiguity(s, c.tau, c.mu));
    return acc;
}

PaprReport papr_of_samples(const VecC& oversampled) {
    if (oversampled.size() == 0) throw std::invalid_argument("papr: empty sample vector");
    double peak = 0.0, avg = 0.0;
    for (Eigen::Index k = 0; k < oversampled.size(); ++k) {
        const double p = std::norm(oversampled[k]);
        peak = std::max(peak, p);
        avg += p;
    }
    avg /= static_cast<double>(oversampled.size());
    if (avg <= 0.0) throw std::invalid_argument("papr: zero average power");
    return {db_from_linear(peak / avg), peak, avg};
}

std::vector<double> ccdf(const std::vector<double>& papr_samples_db,
                         const std::vector<double>& thresholds_db) {
    if (papr_samples_db.empty()) throw std::invalid_argument("ccdf: empty sample set");
    std::vector<double> sorted = papr_samples_db;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    out.reserve(thresholds_db.size());
    for (double g : thresholds_db) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), g);
        out.push_back(static_cast<double>(sorted.end() - it) / sorted.size());
    }
    return out;
}

VecC delay_doppler_apply(const VecC& s, int tau, double mu) {
    const int n = static_cast<int>(s.size());
    int shift = tau % n;
    if (shift < 0) shift += n;
    VecC out(n);
    for (int i = 0; i < n; ++i) {
        const int k = (i - shift + n) % n;
        out[i] = unit_phase(-mu * k / n) * s[k];
    }
    return out;
}

namespace {

void build_papr_block(const ChirpBasis& basis, const VecC& b, QuadFormCache& cache) {
    cache.cfg = basis.cfg();
    cache.b = b;
    cache.phi = basis.phi(b);
    cache.phi_p = basis.phi_oversampled(b);
    const int nl = cache.nl();
    cache.r_mat = (cache.phi_p.adjoint() * cache.phi_p) / static_cast<double>(nl);
    cache.row_norms = cache.phi_p.rowwise().squaredNorm();
    // Row Gram table |<row_k, row_l>|^2, used for the Frobenius-type bounds on
    // the lifted PAPR majorizer.
    MatC gram = cache.phi_p * cache.phi_p.adjoint();
    cache.row_gram = gram.cwiseAbs2();
}

}  // namespace

QuadFormCache build_papr_cache(const ChirpBasis& basis, const VecC& b) {
    QuadFormCache cache;
    build_papr_block(basis, b, cache);
    return cache;
}

QuadFormCache build_quadform_cache(const ChirpBasis& basis, const LazSpec& laz,
                                   const VecC& b, std::size_t mem_budget_bytes) {
    QuadFormCache cache;
    build_papr_block(basis, b, cache);
    cache.has_isl = true;
    cache.laz = laz;
    cache.cells = laz.cells();

    const auto& cells = cache.cells;
    const int n = cache.n();
    const std::size_t bytes = cells.size() * static_cast<std::size_t>(n) * n * sizeof(cd);
    if (bytes > mem_budget_bytes)
        throw std::length_error("quadform cache: C-matrix storage exceeds memory budget");

    cache.c_mats.reserve(cells.size());
    cache.c_frob2.resize(static_cast<Eigen::Index>(cells.size()));
    const MatC phi_h = cache.phi.adjoint();
    for (std::size_t a = 0; a < cells.size(); ++a) {
        // U Phi: scale rows of Phi by the Doppler phase, then cyclic row shift.
        MatC uphi(n, n);
        int shift = cells[a].tau % n;
        if (shift < 0) shift += n;
        for (int i = 0; i < n; ++i) {
            const int k = (i - shift + n) % n;
            uphi.row(i) = unit_phase(-cells[a].mu * k / n) * cache.phi.row(k);
        }
        cache.c_mats.push_back(phi_h * uphi);
        cache.c_frob2[static_cast<Eigen::Index>(a)] = cache.c_mats.back().squaredNorm();
    }

    cache.lambda_j_trace = 0.0;
    for (std::size_t a = 0; a < cells.size(); ++a)
        cache.lambda_j_trace += cells[a].w * cache.c_frob2[static_cast<Eigen::Index>(a)];

    // The lifted ISL matrix J = sum_a w_a v_a v_a^H with v_a = vec(C_a^H) has
    // lambda_max equal to that of the |A| x |A| Gram matrix
    // [sqrt(w_a w_b) tr(C_a C_b^H)]; at |A| of a few hundred the eigensolve is
    // cheap and much tighter than the trace bound.
    cache.lambda_j = cache.lambda_j_trace;
    if (cells.size() <= 4096) {
        const Eigen::Index na = static_cast<Eigen::Index>(cells.size());
        MatC gram(na, na);
        for (Eigen::Index a = 0; a < na; ++a) {
            for (Eigen::Index c = a; c < na; ++c) {
                const cd t = (cache.c_mats[a].adjoint() * cache.c_mats[c]).trace();
                const double w = std::sqrt(cells[a].w * cells[c].w);
                gram(a, c) = w * std::conj(t);
                gram(c, a) = w * t;
            }
        }
        Eigen::SelfAdjointEigenSolver<MatC> es(gram, Eigen::EigenvaluesOnly);
        if (es.info() == Eigen::Success) {
            const double lmax = es.eigenvalues().maxCoeff();
            cache.lambda_j = std::min(cache.lambda_j, std::max(lmax, 0.0));
        }
    }
    return cache;
}

void check_cache_compatible(const QuadFormCache& cache, const VecC& u) {
    if (u.size() != cache.cfg.n)
        throw std::invalid_argument("cache: design vector size does not match cached config");
}

double weighted_isl(const VecC& u, const QuadFormCache& cache) {
    check_cache_compatible(cache, u);
    if (!cache.has_isl) throw std::invalid_argument("cache: built without an ISL block");
    const auto& cells = cache.cells;
    double acc = 0.0;
    for (std::size_t a = 0; a < cells.size(); ++a) {
        const cd q = u.dot(cache.c_mats[a] * u);  // u^H C u
        acc += cells[a].w * std::norm(q);
    }
    return acc;
}

std::vector<cd> af_quadforms(const QuadFormCache& cache, const VecC& u) {
    check_cache_compatible(cache, u);
    if (!cache.has_isl) throw std::invalid_argument("cache: built without an ISL block");
    const VecC s = cache.phi * u;
    const auto& cells = cache.cells;
    std::vector<cd> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(ambiguity(s, c.tau, c.mu));
    return out;
}

PaprReport papr(const VecC& u, const QuadFormCache& cache) {
    check_cache_compatible(cache, u);
    const VecC st = cache.phi_p * u;
    double peak = 0.0;
    for (Eigen::Index k = 0; k < st.size(); ++k) peak = std::max(peak, std::norm(st[k]));
    const double avg = std::real(u.dot(cache.r_mat * u));
    if (avg <= 0.0) throw std::invalid_argument("papr: zero average power");
    return {db_from_linear(peak / avg), peak, avg};
}

}  // namespace afdm
