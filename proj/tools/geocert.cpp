// geocert: certified hyperbolic forecasting experiment runner.
//
// Usage: geocert <train|eval|certify|robustness|ablate|gradcheck|synth>
//                [--config FILE] [--key value | --key=value ...]
//
// Exit codes: 0 ok, 1 usage, 2 unknown config key, 3 missing file,
// 4 divergence, 5 invariant-suite failure.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "geocert/harness.hpp"

namespace {

using geocert::harness::ConfigError;
using geocert::harness::MissingFileError;
using geocert::harness::RunConfig;

int usage() {
    std::fprintf(stderr,
                 "usage: geocert <train|eval|certify|robustness|ablate|gradcheck|synth>"
                 " [--config FILE] [--key value ...]\n");
    return 1;
}

RunConfig parse_args(const std::vector<std::string>& args) {
    RunConfig cfg;
    // first pass: config file, so flags override it
    for (std::size_t i = 0; i < args.size(); ++i)
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("config: --config needs a path");
            cfg.load_file(args[i + 1]);
        }
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string a = args[i];
        if (a.rfind("--", 0) != 0) throw ConfigError("config: expected flag, got " + a);
        a.erase(0, 2);
        std::string key = a, value;
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            key = a.substr(0, eq);
            value = a.substr(eq + 1);
        } else {
            if (i + 1 >= args.size()) throw ConfigError("config: flag --" + key + " needs a value");
            value = args[++i];
        }
        if (key == "config") continue;
        cfg.set(key, value);
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) return usage();
    const std::string cmd = argv[1];
    std::vector<std::string> args(argv + 2, argv + argc);

    try {
        RunConfig cfg = parse_args(args);

        if (cmd == "train") {
            auto art = geocert::harness::run_train(cfg);
            std::printf("train: %zu epochs, final val_mse=%s, cert_rate=%s, rho_hat=%s\n",
                        art.fit.history.size(),
                        geocert::harness::fmt17(art.fit.history.back().val_mse).c_str(),
                        geocert::harness::fmt17(art.metrics.cert_rate).c_str(),
                        geocert::harness::fmt17(art.rho_hat).c_str());
            if (art.rho_hat >= 1.0) {
                std::fprintf(stderr, "train: contraction ratio >= 1\n");
                return 5;
            }
        } else if (cmd == "eval") {
            auto rec = geocert::harness::run_eval(cfg);
            std::printf("eval: mse=%s mae=%s csr_hard=%s cert_rate=%s\n",
                        geocert::harness::fmt17(rec.mse).c_str(),
                        geocert::harness::fmt17(rec.mae).c_str(),
                        geocert::harness::fmt17(rec.csr_hard).c_str(),
                        geocert::harness::fmt17(rec.cert_rate).c_str());
        } else if (cmd == "certify") {
            auto rec = geocert::harness::run_certify(cfg);
            std::printf("certify: cert_rate=%s proof_len_mean=%s\n",
                        geocert::harness::fmt17(rec.cert_rate).c_str(),
                        geocert::harness::fmt17(rec.proof_len_mean).c_str());
        } else if (cmd == "robustness") {
            auto rows = geocert::harness::run_robustness(cfg);
            for (const auto& r : rows)
                std::printf("robustness: std=%s cert_rate=%s mse=%s\n",
                            geocert::harness::fmt17(r.noise_std).c_str(),
                            geocert::harness::fmt17(r.metrics.cert_rate).c_str(),
                            geocert::harness::fmt17(r.metrics.mse).c_str());
        } else if (cmd == "ablate") {
            auto rows = geocert::harness::run_ablate(cfg);
            for (const auto& r : rows)
                std::printf("ablate: %s seed=%llu val_mse=%s epochs_to_converge=%ld\n",
                            r.variant.c_str(),
                            static_cast<unsigned long long>(r.seed),
                            geocert::harness::fmt17(r.metrics.mse).c_str(),
                            r.metrics.epochs_to_converge);
        } else if (cmd == "gradcheck") {
            const double worst = geocert::harness::run_gradcheck(cfg);
            std::printf("gradcheck: max rel err %s\n",
                        geocert::harness::fmt17(worst).c_str());
            if (!(worst < 1e-4)) {
                std::fprintf(stderr, "gradcheck: tolerance exceeded\n");
                return 5;
            }
        } else if (cmd == "synth") {
            auto path = geocert::harness::run_synth(cfg);
            std::printf("synth: wrote %s\n", path.c_str());
        } else {
            return usage();
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const MissingFileError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const geocert::training::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const geocert::harness::InvariantError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
