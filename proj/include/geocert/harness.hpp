#pragma once

// Experiment harness: flat key=value configuration, metrics emission, and
// the subcommand implementations behind the CLI.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "geocert/certification.hpp"
#include "geocert/data.hpp"
#include "geocert/training.hpp"

namespace geocert::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 17 significant digits: enough to round-trip any double exactly.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct RunConfig {
    std::string dataset;  // CSV path; empty means synthetic
    std::string synth_kind = "mixture";
    std::size_t synth_d = 8;
    std::size_t synth_T = 2000;
    double synth_noise = 0.05;
    std::size_t L = 96, H = 96;
    std::size_t D = 32, N_e = 2, heads = 4, K = 4, n_modes = 0;
    bool use_hyperbolic = true;
    bool use_spectral = true;
    bool use_constraints = true;
    double eta_base = 1e-4;
    std::size_t epochs = 4, batch = 16;
    double lambda_start = 1.0, lambda_end = 0.3;
    double alpha_start = 0.5, alpha_end = 0.1;
    double epsilon = 0.1, delta = 0.02;
    double noise_std = 0.0;  // test-time lookback perturbation
    std::uint64_t seed = 0;
    std::string out_dir = ".";

    void set(const std::string& key, const std::string& value) {
        auto u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
        auto sz = [&] { return static_cast<std::size_t>(std::stoull(value)); };
        auto f64 = [&] { return std::stod(value); };
        auto b = [&] {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw ConfigError("config: bad boolean for " + key + ": " + value);
        };
        try {
            if (key == "dataset") dataset = value;
            else if (key == "synth_kind") synth_kind = value;
            else if (key == "synth_d") synth_d = sz();
            else if (key == "synth_T") synth_T = sz();
            else if (key == "synth_noise") synth_noise = f64();
            else if (key == "L") L = sz();
            else if (key == "H") H = sz();
            else if (key == "D") D = sz();
            else if (key == "N_e") N_e = sz();
            else if (key == "heads") heads = sz();
            else if (key == "K") K = sz();
            else if (key == "n_modes") n_modes = sz();
            else if (key == "use_hyperbolic") use_hyperbolic = b();
            else if (key == "use_spectral") use_spectral = b();
            else if (key == "use_constraints") use_constraints = b();
            else if (key == "eta_base") eta_base = f64();
            else if (key == "epochs") epochs = sz();
            else if (key == "batch") batch = sz();
            else if (key == "lambda_start") lambda_start = f64();
            else if (key == "lambda_end") lambda_end = f64();
            else if (key == "alpha_start") alpha_start = f64();
            else if (key == "alpha_end") alpha_end = f64();
            else if (key == "epsilon") epsilon = f64();
            else if (key == "delta") delta = f64();
            else if (key == "noise_std") noise_std = f64();
            else if (key == "seed") seed = u64();
            else if (key == "out_dir") out_dir = value;
            else throw ConfigError("config: unknown key " + key);
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            throw ConfigError("config: bad value for " + key + ": " + value);
        }
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw MissingFileError("config: cannot open " + path);
        std::string line;
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                // blank or comment-only lines are fine
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    throw ConfigError("config: malformed line: " + line);
                continue;
            }
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                const auto z = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, z - a + 1);
            };
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
};

struct MetricsRecord {
    double mse = 0.0;
    double mae = 0.0;
    double csr_hard = 0.0;
    double csr_soft = 0.0;
    double cert_rate = 0.0;
    double proof_len_mean = 0.0;
    double cert_time_ms_mean = 0.0;
    double rho_max_mean = 0.0;
    bool has_rho = false;
    double rho_hat = 0.0;  // contraction ratio estimate from training runs
    bool has_rho_hat = false;
    long epochs_to_converge = -1;

    void validate() const {
        for (double x : {mse, mae, csr_hard, csr_soft, cert_rate, proof_len_mean,
                         cert_time_ms_mean})
            if (!std::isfinite(x)) throw std::domain_error("metrics: non-finite field");
        for (double r : {csr_hard, csr_soft, cert_rate})
            if (r < 0.0 || r > 1.0) throw std::domain_error("metrics: rate outside [0,1]");
        if (has_rho && !std::isfinite(rho_max_mean))
            throw std::domain_error("metrics: non-finite rho_max_mean");
        if (has_rho_hat && !std::isfinite(rho_hat))
            throw std::domain_error("metrics: non-finite rho_hat");
    }

    std::string json_line() const {
        validate();
        std::string s = "{";
        s += "\"mse\":" + fmt17(mse);
        s += ",\"mae\":" + fmt17(mae);
        s += ",\"csr_hard\":" + fmt17(csr_hard);
        s += ",\"csr_soft\":" + fmt17(csr_soft);
        s += ",\"cert_rate\":" + fmt17(cert_rate);
        s += ",\"proof_len_mean\":" + fmt17(proof_len_mean);
        s += ",\"cert_time_ms_mean\":" + fmt17(cert_time_ms_mean);
        if (has_rho) s += ",\"rho_max_mean\":" + fmt17(rho_max_mean);
        if (has_rho_hat) s += ",\"rho_hat\":" + fmt17(rho_hat);
        s += ",\"epochs_to_converge\":" + std::to_string(epochs_to_converge);
        s += "}\n";
        return s;
    }

    static std::string csv_header() {
        return "mse,mae,csr_hard,csr_soft,cert_rate,proof_len_mean,cert_time_ms_mean,"
               "rho_max_mean,epochs_to_converge\n";
    }

    std::string csv_row() const {
        validate();
        std::string s = fmt17(mse) + "," + fmt17(mae) + "," + fmt17(csr_hard) + "," +
                        fmt17(csr_soft) + "," + fmt17(cert_rate) + "," + fmt17(proof_len_mean) +
                        "," + fmt17(cert_time_ms_mean) + ",";
        if (has_rho) s += fmt17(rho_max_mean);
        s += "," + std::to_string(epochs_to_converge) + "\n";
        return s;
    }
};

/// First epoch whose validation MSE is within 2% of the run's best.
inline long epochs_to_converge(const std::vector<training::EpochRecord>& history) {
    if (history.empty()) return -1;
    double best = history.front().val_mse;
    for (const auto& r : history) best = std::min(best, r.val_mse);
    for (const auto& r : history)
        if (r.val_mse <= 1.02 * best) return static_cast<long>(r.epoch);
    return -1;
}

inline std::size_t thread_count() {
    if (const char* env = std::getenv("GEOCERT_THREADS")) {
        const long n = std::atol(env);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    return 1;
}

/// Deterministic index-partitioned parallel map; results land in
/// caller-preallocated slots so ordering never depends on scheduling.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
    const std::size_t workers = std::min(thread_count(), n > 0 ? n : std::size_t(1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) body(i);
        });
    for (auto& t : pool) t.join();
}

namespace detail {

inline data::WindowedDataset make_dataset(const RunConfig& cfg) {
    data::RawSeries raw;
    if (!cfg.dataset.empty()) {
        if (!std::filesystem::exists(cfg.dataset))
            throw MissingFileError("dataset: missing file " + cfg.dataset);
        raw = data::load_csv(cfg.dataset);
    } else {
        raw = data::synth_generate(cfg.synth_kind, cfg.synth_d, cfg.synth_T, cfg.seed,
                                   cfg.synth_noise);
    }
    auto ds = data::window_split(raw, cfg.L, cfg.H);
    if (cfg.noise_std > 0.0) ds = data::add_noise(ds, cfg.noise_std, cfg.seed);
    return ds;
}

inline constraints::Calibration calibrate(const data::WindowedDataset& ds) {
    std::vector<std::vector<double>> Xs, Ys;
    for (const auto& w : ds.train) {
        Xs.push_back(w.X);
        Ys.push_back(w.Y);
    }
    return constraints::calibrate(Xs, Ys, ds.L, ds.H, ds.d);
}

inline ModelConfig model_config(const RunConfig& cfg, std::size_t d) {
    ModelConfig mc;
    mc.L = cfg.L;
    mc.H = cfg.H;
    mc.d = d;
    mc.enc.D = cfg.D;
    mc.enc.N_e = cfg.N_e;
    mc.enc.heads = cfg.heads;
    mc.K = cfg.K;
    mc.n_modes = cfg.n_modes;
    mc.use_hyperbolic = cfg.use_hyperbolic;
    mc.use_spectral = cfg.use_spectral;
    return mc;
}

inline training::OptimizerConfig optimizer_config(const RunConfig& cfg) {
    training::OptimizerConfig oc;
    oc.eta_base = cfg.eta_base;
    oc.epochs = cfg.epochs;
    oc.batch = cfg.batch;
    oc.epsilon_target = cfg.epsilon;
    oc.seed = cfg.seed;
    if (cfg.use_constraints) {
        oc.lambda_start = cfg.lambda_start;
        oc.lambda_end = cfg.lambda_end;
        oc.alpha_start = cfg.alpha_start;
        oc.alpha_end = cfg.alpha_end;
    } else {
        oc.lambda_start = oc.lambda_end = 0.0;
        oc.alpha_start = oc.alpha_end = 0.0;
    }
    return oc;
}

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("harness: cannot write " + path);
    out << body;
}

inline std::string history_line(const training::EpochRecord& r) {
    std::string s = "{";
    s += "\"epoch\":" + std::to_string(r.epoch);
    s += ",\"train_mse\":" + fmt17(r.train_mse);
    s += ",\"val_mse\":" + fmt17(r.val_mse);
    s += ",\"val_mae\":" + fmt17(r.val_mae);
    s += ",\"csr_hard\":" + fmt17(r.csr_hard);
    s += ",\"csr_soft\":" + fmt17(r.csr_soft);
    s += ",\"cert_rate\":" + fmt17(r.cert_rate);
    s += "}\n";
    return s;
}

inline certification::ForecastFn forecaster(const Model& model) {
    return [&model](const std::vector<double>& X) {
        auto t = Tensor::from({1, model.cfg.L, model.cfg.d}, X);
        return model.forward(t).data();
    };
}

inline MetricsRecord to_record(const training::EvalMetrics& m) {
    MetricsRecord rec;
    rec.mse = m.mse;
    rec.mae = m.mae;
    rec.csr_hard = m.csr_hard;
    rec.csr_soft = m.csr_soft;
    rec.cert_rate = m.cert_rate;
    rec.proof_len_mean = m.mean_proof_length;
    rec.cert_time_ms_mean = m.mean_cert_time_ms;
    return rec;
}

}  // namespace detail

struct RunArtifacts {
    MetricsRecord metrics;
    training::FitResult fit;
    double rho_hat = 0.0;  // contraction ratio estimate
};

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

/// Contraction ratio estimate: Riemannian descent on hyp_dist(theta,theta*)^2
/// over random instances; returns the max per-step distance ratio after the
/// first step.
inline double contraction_rho(std::size_t instances = 20, std::uint64_t seed = 0) {
    Rng rng(seed);
    double rho_hat = 0.0;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        const std::size_t n = 2 + rng.next_u64() % 6;
        manifold::Vec a(n), b(n);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        auto p = manifold::project_to_ball(a);
        const auto target = manifold::project_to_ball(b);
        double prev = manifold::hyp_dist(p, target);
        for (int step = 0; step < 12 && prev > 1e-12; ++step) {
            auto g = manifold::dist_sq_grad(p, target);
            p = manifold::geodesic_constraint_step(p, g, 0.2);
            const double cur = manifold::hyp_dist(p, target);
            if (step > 0 && prev > 1e-12) rho_hat = std::max(rho_hat, cur / prev);
            prev = cur;
        }
    }
    return rho_hat;
}

inline RunArtifacts run_train(const RunConfig& cfg) {
    auto ds = detail::make_dataset(cfg);
    auto cal = detail::calibrate(ds);

    auto model = Model::init(detail::model_config(cfg, ds.d), cfg.seed);
    RunArtifacts art;
    training::TrainState st(detail::optimizer_config(cfg));
    try {
        art.fit = training::fit(model, ds, cal, detail::optimizer_config(cfg), &st);
    } catch (const training::DivergenceError&) {
        throw;
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception& e) {
        // non-finite values tripped a numeric guard mid-graph
        throw training::DivergenceError(std::string("fit: divergence: ") + e.what());
    }

    cal.dbar = st.dbar;  // persisted so eval/certify reuse the trained tau_adapt
    cal.save(out_path(cfg, "calibration.txt"));

    std::string hist;
    for (const auto& r : art.fit.history) hist += detail::history_line(r);
    detail::write_text(out_path(cfg, "history.jsonl"), hist);
    model.save(out_path(cfg, "params.bin"));

    const auto& eval_windows = ds.test.empty() ? ds.train : ds.test;
    auto m = training::evaluate(model, eval_windows, cal, cal.dbar, cfg.epsilon, cfg.delta);
    art.metrics = detail::to_record(m);
    art.metrics.epochs_to_converge = epochs_to_converge(art.fit.history);
    art.rho_hat = contraction_rho(20, cfg.seed);
    art.metrics.rho_hat = art.rho_hat;
    art.metrics.has_rho_hat = true;
    detail::write_text(out_path(cfg, "metrics.json"), art.metrics.json_line());
    detail::write_text(out_path(cfg, "metrics.csv"),
                       MetricsRecord::csv_header() + art.metrics.csv_row());
    return art;
}

inline constraints::Calibration load_calibration(const RunConfig& cfg,
                                                 const data::WindowedDataset& ds) {
    const auto path = out_path(cfg, "calibration.txt");
    if (std::filesystem::exists(path)) return constraints::Calibration::load(path);
    return detail::calibrate(ds);
}

inline Model load_model(const RunConfig& cfg, std::size_t d) {
    const auto path = out_path(cfg, "params.bin");
    if (!std::filesystem::exists(path)) throw MissingFileError("eval: missing " + path);
    auto model = Model::init(detail::model_config(cfg, d), cfg.seed);
    model.load(path);
    return model;
}

inline MetricsRecord run_eval(const RunConfig& cfg) {
    auto ds = detail::make_dataset(cfg);
    auto cal = load_calibration(cfg, ds);
    auto model = load_model(cfg, ds.d);
    const auto& eval_windows = ds.test.empty() ? ds.train : ds.test;
    auto m = training::evaluate(model, eval_windows, cal, cal.dbar, cfg.epsilon, cfg.delta);
    auto rec = detail::to_record(m);
    detail::write_text(out_path(cfg, "metrics.json"), rec.json_line());
    detail::write_text(out_path(cfg, "metrics.csv"),
                       MetricsRecord::csv_header() + rec.csv_row());
    return rec;
}

inline MetricsRecord run_certify(const RunConfig& cfg) {
    auto ds = detail::make_dataset(cfg);
    auto cal = load_calibration(cfg, ds);
    auto model = load_model(cfg, ds.d);
    manifold::Geometry geo{cfg.use_hyperbolic};
    const auto& windows = ds.test.empty() ? ds.train : ds.test;

    std::vector<certification::Certificate> certs(windows.size());
    parallel_for(windows.size(), [&](std::size_t i) {
        const auto& w = windows[i];
        const auto t0 = std::chrono::steady_clock::now();
        auto X = Tensor::from({1, cfg.L, ds.d}, w.X);
        auto xhat = model.forward(X).data();
        auto proof = certification::build_proof(xhat.data(), w.X.data(), w.Y.data(), cfg.L,
                                                cfg.H, ds.d, cal, cal.dbar, cfg.epsilon, geo);
        certs[i] = certification::certify(proof, cfg.delta, cfg.epsilon);
        const auto t1 = std::chrono::steady_clock::now();
        certs[i].cert_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    });

    std::string lines;
    double rate = 0.0, len = 0.0, ms = 0.0;
    for (std::size_t i = 0; i < certs.size(); ++i) {
        const auto& c = certs[i];
        lines += "{\"index\":" + std::to_string(i) +
                 ",\"valid\":" + (c.valid ? std::string("true") : std::string("false")) +
                 ",\"proof_length\":" + std::to_string(c.proof_length) +
                 ",\"distance\":" + fmt17(c.distance) + ",\"violation\":" + fmt17(c.violation) +
                 ",\"cert_time_ms\":" + fmt17(c.cert_time_ms) + "}\n";
        rate += c.valid ? 1.0 : 0.0;
        len += static_cast<double>(c.proof_length);
        ms += c.cert_time_ms;
    }
    detail::write_text(out_path(cfg, "certificates.jsonl"), lines);

    auto m = training::evaluate(model, windows, cal, cal.dbar, cfg.epsilon, cfg.delta, false);
    auto rec = detail::to_record(m);
    const double n = static_cast<double>(certs.size());
    rec.cert_rate = rate / n;
    rec.proof_len_mean = len / n;
    rec.cert_time_ms_mean = ms / n;
    detail::write_text(out_path(cfg, "metrics.json"), rec.json_line());
    detail::write_text(out_path(cfg, "metrics.csv"),
                       MetricsRecord::csv_header() + rec.csv_row());
    return rec;
}

struct RobustnessRow {
    double noise_std = 0.0;
    MetricsRecord metrics;
};

inline std::vector<RobustnessRow> run_robustness(const RunConfig& cfg) {
    auto clean = detail::make_dataset(cfg);
    auto cal = load_calibration(cfg, clean);
    auto model = load_model(cfg, clean.d);

    std::vector<RobustnessRow> rows;
    std::string csv = "noise_std," + MetricsRecord::csv_header();
    for (double std_ : {0.0, 0.05, 0.10, 0.15}) {
        auto noisy = data::add_noise(clean, std_, cfg.seed);
        const auto& windows = noisy.test.empty() ? noisy.train : noisy.test;
        auto m = training::evaluate(model, windows, cal, cal.dbar, cfg.epsilon, cfg.delta);
        RobustnessRow row;
        row.noise_std = std_;
        row.metrics = detail::to_record(m);
        csv += fmt17(std_) + "," + row.metrics.csv_row();
        rows.push_back(row);
    }

    // per-window certified radii on a handful of clean test windows
    const auto& base = clean.test.empty() ? clean.train : clean.test;
    auto forecast = detail::forecaster(model);
    const std::size_t n_rad = std::min<std::size_t>(4, base.size());
    double rho_sum = 0.0;
    for (std::size_t i = 0; i < n_rad; ++i) {
        auto r = certification::certified_robustness(
            forecast, {base[i].X, base[i].Y}, cfg.L, cfg.H, clean.d, cal, 0.5, 32, cfg.seed,
            cal.dbar, cfg.epsilon, cfg.delta, manifold::Geometry{cfg.use_hyperbolic});
        rho_sum += r.rho_max;
    }
    auto rec = rows.front().metrics;
    rec.has_rho = true;
    rec.rho_max_mean = n_rad > 0 ? rho_sum / static_cast<double>(n_rad) : 0.0;
    detail::write_text(out_path(cfg, "robustness.csv"), csv);
    detail::write_text(out_path(cfg, "metrics.json"), rec.json_line());
    return rows;
}

struct AblateRow {
    std::string variant;
    std::uint64_t seed = 0;
    MetricsRecord metrics;
};

/// Four-variant grid {+-hyperbolic, +-spectral}; everything else, including
/// the seed, is shared.
inline std::vector<AblateRow> run_ablate(const RunConfig& cfg) {
    std::vector<AblateRow> rows;
    std::string jsonl;
    for (bool hyp : {true, false})
        for (bool spec : {true, false}) {
            RunConfig v = cfg;
            v.use_hyperbolic = hyp;
            v.use_spectral = spec;
            v.out_dir = (std::filesystem::path(cfg.out_dir) /
                         (std::string(hyp ? "hyp" : "euc") + (spec ? "_spec" : "_plain")))
                            .string();
            auto art = run_train(v);
            AblateRow row;
            row.variant = std::string(hyp ? "hyperbolic" : "euclidean") + "+" +
                          (spec ? "spectral" : "linear");
            row.seed = cfg.seed;
            row.metrics = art.metrics;
            auto line = row.metrics.json_line();
            line.pop_back();  // strip trailing newline, then append fields
            line.pop_back();  // strip closing brace
            jsonl += line + ",\"variant\":\"" + row.variant +
                     "\",\"seed\":" + std::to_string(row.seed) + "}\n";
            rows.push_back(std::move(row));
        }
    detail::write_text(out_path(cfg, "ablate.jsonl"), jsonl);
    return rows;
}

/// Finite-difference sweep over random small model configurations. Returns
/// the max relative error.
inline double run_gradcheck(const RunConfig& cfg, std::size_t configs = 8) {
    Rng rng(cfg.seed + 1);
    double worst = 0.0;
    for (std::size_t c = 0; c < configs; ++c) {
        ModelConfig mc;
        mc.L = 8 + 4 * (rng.next_u64() % 3);
        mc.H = 4 + 2 * (rng.next_u64() % 3);
        mc.d = 1 + rng.next_u64() % 2;
        mc.enc.D = 4 + 4 * (rng.next_u64() % 2);
        mc.enc.heads = 2;
        mc.enc.N_e = 1 + rng.next_u64() % 2;
        mc.K = 1 + rng.next_u64() % 3;
        mc.use_spectral = (c % 4) != 3;
        auto model = Model::init(mc, rng.next_u64());
        auto params = model.parameters();

        std::vector<double> xb(mc.L * mc.d), yb(mc.H * mc.d);
        for (auto& x : xb) x = rng.normal();
        for (auto& y : yb) y = rng.normal();
        auto X = Tensor::from({1, mc.L, mc.d}, xb);
        auto Y = Tensor::from({1, mc.H, mc.d}, yb);

        auto loss = [&] {
            auto err = model.forward(X) - Y;
            return reduce_all(err * err, Reduce::mean);
        };
        for (auto& p : params) p.zero_grad();
        auto l = loss();
        l.backward();
        std::vector<std::vector<double>> analytic;
        for (auto& p : params) analytic.push_back(p.grad());

        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            auto& v = params[pi].mutable_data();
            // probe a few coordinates per tensor to keep the sweep fast
            const std::size_t stride = std::max<std::size_t>(1, v.size() / 3);
            for (std::size_t j = 0; j < v.size(); j += stride) {
                const double x0 = v[j];
                const double h = 1e-5 * std::max(1.0, std::abs(x0));
                v[j] = x0 + h;
                const double lp = loss().item();
                v[j] = x0 - h;
                const double lm = loss().item();
                v[j] = x0;
                const double num = (lp - lm) / (2.0 * h);
                const double ana = analytic[pi][j];
                const double rel =
                    std::abs(ana - num) / std::max({1.0, std::abs(ana), std::abs(num)});
                worst = std::max(worst, rel);
            }
        }
    }
    return worst;
}

inline std::string run_synth(const RunConfig& cfg) {
    auto raw = data::synth_generate(cfg.synth_kind, cfg.synth_d, cfg.synth_T, cfg.seed,
                                    cfg.synth_noise);
    std::string body = "date";
    for (const auto& n : raw.names) body += "," + n;
    body += "\n";
    for (std::size_t t = 0; t < raw.T; ++t) {
        body += fmt17(raw.timestamps[t]);
        for (std::size_t v = 0; v < raw.d; ++v) body += "," + fmt17(raw.at(t, v));
        body += "\n";
    }
    const auto path = out_path(cfg, "synth.csv");
    detail::write_text(path, body);
    return path;
}

}  // namespace geocert::harness
