#include "afdm/cli.hpp"

#include "afdm/io.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cctype>
#include <sstream>

namespace afdm {

namespace fs = std::filesystem;
using nlohmann::json;

AfdmConfig RunConfig::afdm_config(double ratio) const {
    AfdmConfig cfg;
    cfg.n = n;
    cfg.c1 = c1;
    cfg.oversampling = oversampling;
    cfg.alphabet_size = alphabet_size;
    cfg.phi0 = phi0;
    cfg.delta = delta;
    cfg.partition = SubcarrierPartition::comb(n, ratio);
    cfg.carrier_ghz = carrier_ghz;
    cfg.bandwidth_mhz = bandwidth_mhz;
    cfg.validate();
    return cfg;
}

LazSpec RunConfig::laz() const {
    LazSpec l;
    l.tau_max = tau_max;
    l.mu_min = mu_min;
    l.mu_max = mu_max;
    l.l_mu = l_mu;
    l.validate();
    return l;
}

OptimizerOptions RunConfig::optimizer_options() const {
    OptimizerOptions opt;
    opt.mode = design_mode_from_string(mode);
    opt.variables = variable_set_from_string(vars);
    opt.gamma_db = gamma_db;
    opt.ell = ell;
    opt.r_max = r_max;
    opt.r_nsp = r_nsp;
    opt.stop_tol = stop_tol;
    opt.accelerate = accelerate;
    opt.validate();
    return opt;
}

std::string RunConfig::canonical_string() const {
    std::ostringstream os;
    os << "n=" << n << ";c1=" << format_double(c1) << ";lp=" << oversampling
       << ";q=" << alphabet_size << ";phi0=" << format_double(phi0)
       << ";delta=" << format_double(delta) << ";ratio=" << format_double(rcs_ratio)
       << ";psk=" << psk_order << ";tau=" << tau_max << ";mu=[" << format_double(mu_min)
       << "," << format_double(mu_max) << "];lmu=" << l_mu << ";mode=" << mode
       << ";vars=" << vars << ";gamma=" << format_double(gamma_db) << ";ell=" << ell
       << ";rmax=" << r_max << ";rnsp=" << r_nsp << ";tol=" << format_double(stop_tol)
       << ";accel=" << accelerate << ";ibo=" << format_double(ibo_db)
       << ";ideal=" << ideal_pa << ";chan=" << channel << ";cp=" << cp_len
       << ";guard=" << cfar_guard << ";train=" << cfar_train << ";pfa=" << format_double(pfa)
       << ";snr=" << snr_grid << ";trials=" << trials << ";bits=" << min_bits
       << ";pool=" << pool << ";seed=" << seed << ";seeds=" << seeds
       << ";sources=" << sources << ";baseline=" << baseline;
    return os.str();
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

std::vector<double> parse_grid(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) return parse_double_list(spec);
    const auto colon2 = spec.find(':', colon + 1);
    if (colon2 == std::string::npos)
        throw std::invalid_argument("grid spec must be lo:step:hi or a comma list");
    const double lo = std::stod(spec.substr(0, colon));
    const double step = std::stod(spec.substr(colon + 1, colon2 - colon - 1));
    const double hi = std::stod(spec.substr(colon2 + 1));
    if (step <= 0) throw std::invalid_argument("grid step must be positive");
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-9; v += step) out.push_back(v);
    return out;
}

SourceSpec parse_source(const std::string& token, const RunConfig& rc) {
    SourceSpec s;
    std::string name = token;
    const auto at = token.find('@');
    s.ratio = rc.rcs_ratio;
    if (at != std::string::npos) {
        name = token.substr(0, at);
        s.ratio = std::stod(token.substr(at + 1));
    }
    s.name = token;
    if (name == "conventional") {
        s.conventional = true;
        s.ratio = 0.0;
        return s;
    }
    if (name == "gps") {
        s.gps = true;
        s.ratio = 0.0;
        return s;
    }
    if (name == "af-shape-rcs") {
        s.mode = DesignMode::af_shape;
        s.variables = VariableSet::rcs_only;
    } else if (name == "af-shape-joint") {
        s.mode = DesignMode::af_shape;
        s.variables = VariableSet::rcs_plus_prechirp;
    } else if (name == "papr-min-rcs") {
        s.mode = DesignMode::papr_min;
        s.variables = VariableSet::rcs_only;
    } else if (name == "papr-min-joint") {
        s.mode = DesignMode::papr_min;
        s.variables = VariableSet::rcs_plus_prechirp;
    } else if (name == "joint") {
        s.mode = DesignMode::joint;
        s.variables = VariableSet::rcs_plus_prechirp;
    } else {
        throw std::invalid_argument("unknown waveform source: " + token);
    }
    return s;
}

std::vector<SourceSpec> parse_sources(const std::string& csv, const RunConfig& rc) {
    std::vector<SourceSpec> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_source(item, rc));
    }
    if (out.empty()) throw std::invalid_argument("no waveform sources given");
    return out;
}

DesignResult design_for_source(const ChirpBasis& basis, const SourceSpec& src,
                               const RunConfig& rc, std::uint64_t index) {
    AfdmConfig cfg = basis.cfg();
    cfg.partition = src.conventional || src.gps
                        ? SubcarrierPartition::full_data(cfg.n)
                        : SubcarrierPartition::comb(cfg.n, src.ratio);
    const std::uint64_t data_seed = derive_seed(rc.seed, kDataTag, index);
    DesignVector init = conventional_afdm(cfg, rc.constellation(), data_seed);

    DesignResult res;
    if (src.conventional) {
        res.dv = init;
        const QuadFormCache cache = build_papr_cache(basis, init.b());
        res.papr_init_db = res.papr_final_db = papr(init.u, cache).papr_db;
        res.converged = true;
        return res;
    }
    if (src.gps) {
        GpsResult gps = gps_sweep(basis, init);
        res.dv = gps.dv;
        res.papr_final_db = gps.papr_db;
        const QuadFormCache cache = build_papr_cache(basis, init.b());
        res.papr_init_db = papr(init.u, cache).papr_db;
        res.converged = true;
        return res;
    }

    OptimizerOptions opt = rc.optimizer_options();
    opt.mode = src.mode;
    opt.variables = src.variables;
    const QuadFormCache cache = opt.mode == DesignMode::papr_min
                                    ? build_papr_cache(basis, init.b())
                                    : build_quadform_cache(basis, rc.laz(), init.b());
    return run_jipd_mm(cache, opt, std::move(init));
}

WaveformPool build_pool(const ChirpBasis& basis, const SourceSpec& src, const RunConfig& rc,
                        int count) {
    WaveformPool pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const DesignResult res = design_for_source(basis, src, rc, static_cast<std::uint64_t>(i));
        pool.push_back(waveform_entry_from_design(basis, res.dv));
    }
    return pool;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& rc) {
    json j;
    j["version"] = version_string();
    j["command"] = command;
    j["seed"] = rc.seed;
    j["config_hash"] = fnv1a(rc.canonical_string());
    j["config"] = rc.canonical_string();
    j["carrier_ghz"] = rc.carrier_ghz;
    j["bandwidth_mhz"] = rc.bandwidth_mhz;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now).count();
    write_text_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

namespace {

std::string safe_name(const std::string& name) {
    std::string out;
    for (char c : name) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '+'
                          ? c
                          : '_');
    }
    return out;
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
    std::vector<std::string> rows;
    rows.reserve(trace.size());
    for (const auto& t : trace) {
        rows.push_back(std::to_string(t.iter) + "," + format_double(t.isl) + "," +
                       format_double(t.papr_db) + "," + format_double(t.rho) + "," +
                       format_double(t.omega) + "," + format_double(t.t_p) + "," +
                       format_double(t.objective));
    }
    write_csv(path, "iter,isl,papr_db,rho,omega,t_p,objective", rows);
}

void write_design_sidecar(const fs::path& path, const RunConfig& rc, const SourceSpec& src,
                          std::uint64_t index, const DesignResult& res) {
    json j;
    j["source"] = src.name;
    j["mode"] = src.conventional ? "conventional" : (src.gps ? "gps" : to_string(src.mode));
    j["variables"] = to_string(src.variables);
    j["seed_index"] = index;
    j["data_seed"] = derive_seed(rc.seed, kDataTag, index);
    j["gamma_db"] = rc.gamma_db;
    j["rcs_ratio"] = src.ratio;
    j["iterations"] = res.iterations;
    j["converged"] = res.converged;
    j["feasible"] = res.feasible;
    j["isl_init"] = res.isl_init;
    j["isl_final"] = res.isl_final;
    j["papr_init_db"] = res.papr_init_db;
    j["papr_final_db"] = res.papr_final_db;
    j["prechirp_index"] = res.dv.prechirp_index;
    std::vector<int> reserved = res.dv.partition.reserved;
    j["reserved"] = reserved;
    write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace

void run_design(const RunConfig& rc) {
    const fs::path dir(rc.out_dir);
    fs::create_directories(dir);

    SourceSpec src;
    if (!rc.baseline.empty()) {
        src = parse_source(rc.baseline, rc);
        if (!src.conventional && !src.gps)
            throw std::invalid_argument("design: --baseline must be conventional or gps");
    } else {
        std::string token = rc.mode;
        if (rc.mode == "af-shape" || rc.mode == "papr-min")
            token = rc.mode + (rc.vars == "rcs" ? "-rcs" : "-joint");
        src = parse_source(token, rc);
        src.ratio = rc.rcs_ratio;
    }

    ChirpBasis basis(rc.afdm_config(rc.rcs_ratio));

    std::vector<std::string> summary;
    double mean_reduction = 0.0;
    int reduction_count = 0;
    for (int i = 0; i < rc.seeds; ++i) {
        const DesignResult res = design_for_source(basis, src, rc, static_cast<std::uint64_t>(i));

        WaveformFile wf;
        wf.n = static_cast<std::uint32_t>(rc.n);
        wf.oversampling = static_cast<std::uint32_t>(rc.oversampling);
        wf.samples = synthesize_oversampled(basis, res.dv);
        const std::string stem = "wf_" + std::to_string(i);
        write_waveform(dir / (stem + ".afdm"), wf);
        write_design_sidecar(dir / (stem + ".meta.json"), rc, src, static_cast<std::uint64_t>(i), res);
        if (!res.trace.empty()) write_trace_csv(dir / ("trace_" + std::to_string(i) + ".csv"), res.trace);

        double reduction = std::numeric_limits<double>::quiet_NaN();
        if (std::isfinite(res.isl_init) && std::isfinite(res.isl_final) && res.isl_final > 0) {
            reduction = db_from_linear(res.isl_init / res.isl_final);
            mean_reduction += reduction;
            ++reduction_count;
        }
        summary.push_back(std::to_string(i) + "," + format_double(res.isl_init) + "," +
                          format_double(res.isl_final) + "," + format_double(reduction) + "," +
                          format_double(res.papr_init_db) + "," +
                          format_double(res.papr_final_db) + "," +
                          std::to_string(res.iterations) + "," +
                          (res.converged ? "1" : "0") + "," + (res.feasible ? "1" : "0"));
    }
    if (reduction_count > 0) {
        summary.push_back("mean,,," + format_double(mean_reduction / reduction_count) + ",,,,,");
    }
    write_csv(dir / "summary.csv",
              "seed,isl_init,isl_final,isl_reduction_db,papr_init_db,papr_final_db,"
              "iterations,converged,feasible",
              summary);
    write_manifest(dir, "design", rc);
}

void run_evaluate(const RunConfig& rc, const std::vector<std::string>& files) {
    if (files.empty()) throw std::invalid_argument("evaluate: no input files");
    const fs::path dir(rc.out_dir);
    fs::create_directories(dir);
    const LazSpec laz = rc.laz();

    struct Entry {
        std::string name;
        double isl = std::numeric_limits<double>::quiet_NaN();
        double papr_db = std::numeric_limits<double>::quiet_NaN();
        bool ok = false;
    };
    std::vector<Entry> entries;
    for (const auto& f : files) {
        Entry e;
        e.name = fs::path(f).stem().string();
        try {
            const WaveformFile wf = read_waveform(f);
            const VecC s = wf.symbol_rate();
            e.isl = weighted_isl_of_samples(s, laz);
            e.papr_db = papr_of_samples(wf.samples).papr_db;
            const AfGrid grid = af_grid(s, laz);
            std::vector<std::string> rows;
            const auto cells = laz.cells();
            for (std::size_t a = 0; a < cells.size(); ++a) {
                rows.push_back(std::to_string(cells[a].tau) + "," + format_double(cells[a].mu) +
                               "," + format_double(grid.values[a].real()) + "," +
                               format_double(grid.values[a].imag()) + "," +
                               format_double(std::norm(grid.values[a])));
            }
            write_csv(dir / (e.name + "_afgrid.csv"), "tau,mu,re,im,abs2", rows);
            e.ok = true;
        } catch (const std::exception& ex) {
            // Corrupt file: report and continue with the rest.
            e.ok = false;
            std::fprintf(stderr, "evaluate: %s: %s\n", f.c_str(), ex.what());
        }
        entries.push_back(std::move(e));
    }

    double baseline = rc.baseline_isl;
    if (baseline <= 0.0) {
        double acc = 0.0;
        int cnt = 0;
        for (const auto& e : entries)
            if (e.ok) {
                acc += e.isl;
                ++cnt;
            }
        baseline = cnt ? acc / cnt : 1.0;
    }

    std::vector<std::string> rows, metric_rows;
    for (const auto& e : entries) {
        if (!e.ok) {
            rows.push_back(e.name + ",nan,nan");
            metric_rows.push_back(e.name + ",nan,nan");
            continue;
        }
        rows.push_back(e.name + "," + format_double(e.isl) + "," +
                       format_double(db_from_linear(e.isl / baseline)));
        metric_rows.push_back(e.name + "," + format_double(e.isl) + "," +
                              format_double(e.papr_db));
    }
    write_csv(dir / "report.csv", "instance,isl_raw,isl_db_vs_baseline", rows);
    write_csv(dir / "metrics.csv", "instance,isl_raw,papr_db", metric_rows);
    write_manifest(dir, "evaluate", rc);
}

void run_ccdf(const RunConfig& rc) {
    const fs::path dir(rc.out_dir);
    fs::create_directories(dir);
    const auto sources = parse_sources(rc.sources, rc);
    ChirpBasis basis(rc.afdm_config(rc.rcs_ratio));

    std::vector<double> thresholds;
    for (double g = 0.0; g <= 14.0 + 1e-9; g += 0.25) thresholds.push_back(g);

    for (const auto& src : sources) {
        std::vector<double> samples;
        samples.reserve(static_cast<std::size_t>(rc.trials));
        for (int t = 0; t < rc.trials; ++t) {
            const DesignResult res =
                design_for_source(basis, src, rc, static_cast<std::uint64_t>(t));
            samples.push_back(res.papr_final_db);
        }
        const auto curve = ccdf(samples, thresholds);
        std::vector<std::string> rows;
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            rows.push_back(format_double(thresholds[i]) + "," + format_double(curve[i]));
        write_csv(dir / ("ccdf_" + safe_name(src.name) + ".csv"),
                  "gamma_db,ccdf", rows);
        std::vector<std::string> sample_rows;
        for (std::size_t i = 0; i < samples.size(); ++i)
            sample_rows.push_back(std::to_string(i) + "," + format_double(samples[i]));
        write_csv(dir / ("papr_" + safe_name(src.name) + ".csv"),
                  "instance,papr_db", sample_rows);
    }
    write_manifest(dir, "ccdf", rc);
}

void run_sense(const RunConfig& rc) {
    const fs::path dir(rc.out_dir);
    fs::create_directories(dir);
    const auto sources = parse_sources(rc.sources, rc);
    ChirpBasis basis(rc.afdm_config(rc.rcs_ratio));

    DetectionScenario sc;
    sc.snr_grid_db = parse_grid(rc.snr_grid);
    sc.trials = rc.trials;
    sc.cfar.guard = rc.cfar_guard;
    sc.cfar.train = rc.cfar_train;
    sc.cfar.pfa = rc.pfa;
    sc.seed = rc.seed;

    const auto pfa_grid = parse_double_list(rc.pfa_grid);
    for (const auto& src : sources) {
        const WaveformPool pool = build_pool(basis, src, rc, rc.pool);
        const auto pd = run_detection_mc(sc, pool);
        std::vector<std::string> rows;
        for (const auto& p : pd)
            rows.push_back(format_double(p.snr_db) + "," + format_double(p.pd) + "," +
                           format_double(p.ci_lo) + "," + format_double(p.ci_hi));
        write_csv(dir / ("pd_" + safe_name(src.name) + ".csv"), "snr_db,pd,ci_lo,ci_hi", rows);

        const auto roc = run_detection_roc(sc, pool, rc.roc_snr_db, pfa_grid);
        std::vector<std::string> roc_rows;
        for (const auto& p : roc)
            roc_rows.push_back(format_double(p.pfa) + "," + format_double(p.pd));
        write_csv(dir / ("roc_" + safe_name(src.name) + ".csv"), "pfa,pd", roc_rows);
    }
    write_manifest(dir, "sense", rc);
}

void run_ber(const RunConfig& rc) {
    const fs::path dir(rc.out_dir);
    fs::create_directories(dir);
    const auto sources = parse_sources(rc.sources, rc);
    ChirpBasis basis(rc.afdm_config(rc.rcs_ratio));

    BerScenario sc;
    sc.snr_grid_db = parse_grid(rc.snr_grid);
    sc.min_bits = rc.min_bits;
    sc.channel = rc.channel == "awgn" ? ChannelKind::awgn : ChannelKind::doubly_selective;
    sc.profile_db = rc.profile_db;
    sc.cp_len = rc.cp_len;
    sc.doppler_span = rc.doppler_span;
    sc.fixed_channel = rc.fixed_channel;
    sc.ibo_db = rc.ideal_pa ? std::optional<double>{} : std::optional<double>{rc.ibo_db};
    sc.constellation = rc.constellation();
    sc.seed = rc.seed;

    for (const auto& src : sources) {
        const WaveformPool pool = build_pool(basis, src, rc, rc.pool);
        const auto curve = run_ber_mc(sc, basis, pool);
        std::vector<std::string> rows;
        for (const auto& p : curve)
            rows.push_back(format_double(p.snr_db) + "," + format_double(p.ber) + "," +
                           std::to_string(p.bits) + "," + std::to_string(p.errors));
        write_csv(dir / ("ber_" + safe_name(src.name) + ".csv"), "snr_db,ber,bits,errors", rows);
    }
    write_manifest(dir, "ber", rc);
}

}  // namespace afdm
