#pragma once

// Dataset ingestion, chronological windowing with z-score normalization,
// synthetic generators, and the noise-robustness perturbation.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geocert/io.hpp"
#include "geocert/rng.hpp"

namespace geocert::data {

inline constexpr double kStdFloor = 1e-8;

struct RawSeries {
    std::vector<std::string> names;
    std::vector<double> values;  // T x d, row-major
    std::vector<double> timestamps;
    std::size_t T = 0, d = 0;
    std::size_t rejected_rows = 0;  // rows dropped for gaps/non-numeric cells

    double at(std::size_t t, std::size_t v) const { return values[t * d + v]; }
};

inline RawSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);

    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.push_back("");
        return cells;
    };

    RawSeries out;
    auto header = split(line);
    if (header.empty()) throw std::runtime_error("load_csv: empty header in " + path);
    const bool has_date = header[0] == "date";
    const std::size_t first = has_date ? 1 : 0;
    for (std::size_t i = first; i < header.size(); ++i) out.names.push_back(header[i]);
    out.d = out.names.size();
    if (out.d == 0) throw std::runtime_error("load_csv: no value columns in " + path);

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size())
            throw std::runtime_error("load_csv: ragged row " + std::to_string(lineno) + " in " +
                                     path);
        std::vector<double> row(out.d);
        bool ok = true;
        for (std::size_t i = 0; i < out.d; ++i) {
            const std::string& c = cells[first + i];
            try {
                std::size_t used = 0;
                row[i] = std::stod(c, &used);
                if (used != c.size() || c.empty()) ok = false;
            } catch (...) {
                ok = false;
            }
        }
        if (!ok) {
            ++out.rejected_rows;
            continue;
        }
        double ts = static_cast<double>(out.T);
        if (has_date) {
            try {
                ts = std::stod(cells[0]);
            } catch (...) {
                // non-numeric dates keep the row index as timestamp
            }
        }
        out.timestamps.push_back(ts);
        out.values.insert(out.values.end(), row.begin(), row.end());
        ++out.T;
    }
    if (out.T == 0) throw std::runtime_error("load_csv: no data rows in " + path);
    return out;
}

struct NormStats {
    std::vector<double> mean, std;  // per variate, train split only
    std::vector<bool> floored;

    double normalize(double x, std::size_t v) const { return (x - mean[v]) / std[v]; }
    double denormalize(double z, std::size_t v) const { return z * std[v] + mean[v]; }
};

struct Window {
    std::vector<double> X;  // L x d
    std::vector<double> Y;  // H x d
    double time_start = 0.0;  // window start index normalized by series length
    double time_gap = 1.0;    // mean timestamp gap
};

struct WindowedDataset {
    std::size_t L = 0, H = 0, d = 0;
    NormStats stats;
    std::vector<Window> train, val, test;

    void save(const std::string& path) const {
        std::vector<io::Blob> blobs;
        blobs.push_back({{3}, {static_cast<double>(L), static_cast<double>(H),
                               static_cast<double>(d)}});
        blobs.push_back({{static_cast<std::uint64_t>(d)}, stats.mean});
        blobs.push_back({{static_cast<std::uint64_t>(d)}, stats.std});
        auto pack = [&](const std::vector<Window>& ws) {
            std::vector<double> flat;
            for (const auto& w : ws) {
                flat.insert(flat.end(), w.X.begin(), w.X.end());
                flat.insert(flat.end(), w.Y.begin(), w.Y.end());
                flat.push_back(w.time_start);
                flat.push_back(w.time_gap);
            }
            blobs.push_back({{static_cast<std::uint64_t>(ws.size()),
                              static_cast<std::uint64_t>((L + H) * d + 2)},
                             std::move(flat)});
        };
        pack(train);
        pack(val);
        pack(test);
        io::write_blobs(path, io::kCacheMagic, blobs);
    }

    static WindowedDataset load(const std::string& path) {
        auto blobs = io::read_blobs(path, io::kCacheMagic);
        if (blobs.size() != 6) throw std::runtime_error("dataset cache: bad layout in " + path);
        WindowedDataset out;
        out.L = static_cast<std::size_t>(blobs[0].data[0]);
        out.H = static_cast<std::size_t>(blobs[0].data[1]);
        out.d = static_cast<std::size_t>(blobs[0].data[2]);
        out.stats.mean = blobs[1].data;
        out.stats.std = blobs[2].data;
        out.stats.floored.assign(out.d, false);
        auto unpack = [&](const io::Blob& b, std::vector<Window>& ws) {
            const std::size_t n = b.shape[0];
            const std::size_t stride = (out.L + out.H) * out.d + 2;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = b.data.data() + i * stride;
                Window w;
                w.X.assign(p, p + out.L * out.d);
                w.Y.assign(p + out.L * out.d, p + (out.L + out.H) * out.d);
                w.time_start = p[stride - 2];
                w.time_gap = p[stride - 1];
                ws.push_back(std::move(w));
            }
        };
        unpack(blobs[3], out.train);
        unpack(blobs[4], out.val);
        unpack(blobs[5], out.test);
        return out;
    }
};

/// Chronological 0.7/0.1/0.2 split with stride-1 windows inside each split
/// and z-score normalization from train-split statistics.
inline WindowedDataset window_split(const RawSeries& s, std::size_t L = 96, std::size_t H = 96,
                                    double train_ratio = 0.7, double val_ratio = 0.1) {
    if (s.T < L + H) throw std::invalid_argument("window_split: series too short");
    WindowedDataset out;
    out.L = L;
    out.H = H;
    out.d = s.d;

    const std::size_t n_train = static_cast<std::size_t>(train_ratio * static_cast<double>(s.T));
    const std::size_t n_val = static_cast<std::size_t>(val_ratio * static_cast<double>(s.T));
    const std::size_t t_train_end = n_train;
    const std::size_t t_val_end = n_train + n_val;

    out.stats.mean.resize(s.d);
    out.stats.std.resize(s.d);
    out.stats.floored.resize(s.d);
    const std::size_t stats_rows = t_train_end > 0 ? t_train_end : s.T;
    for (std::size_t v = 0; v < s.d; ++v) {
        double mu = 0.0;
        for (std::size_t t = 0; t < stats_rows; ++t) mu += s.at(t, v);
        mu /= static_cast<double>(stats_rows);
        double var = 0.0;
        for (std::size_t t = 0; t < stats_rows; ++t)
            var += (s.at(t, v) - mu) * (s.at(t, v) - mu);
        var /= static_cast<double>(stats_rows);
        out.stats.mean[v] = mu;
        out.stats.std[v] = std::max(std::sqrt(var), kStdFloor);
        out.stats.floored[v] = std::sqrt(var) < kStdFloor;
    }

    double gap = 1.0;
    if (s.timestamps.size() >= 2)
        gap = (s.timestamps.back() - s.timestamps.front()) /
              static_cast<double>(s.timestamps.size() - 1);

    auto emit = [&](std::size_t lo, std::size_t hi, std::vector<Window>& dst) {
        if (hi < lo || hi - lo < L + H) return;
        for (std::size_t start = lo; start + L + H <= hi; ++start) {
            Window w;
            w.X.resize(L * s.d);
            w.Y.resize(H * s.d);
            for (std::size_t t = 0; t < L; ++t)
                for (std::size_t v = 0; v < s.d; ++v)
                    w.X[t * s.d + v] = out.stats.normalize(s.at(start + t, v), v);
            for (std::size_t t = 0; t < H; ++t)
                for (std::size_t v = 0; v < s.d; ++v)
                    w.Y[t * s.d + v] = out.stats.normalize(s.at(start + L + t, v), v);
            w.time_start = static_cast<double>(start) / static_cast<double>(s.T);
            w.time_gap = gap;
            dst.push_back(std::move(w));
        }
    };
    emit(0, t_train_end, out.train);
    emit(t_train_end, t_val_end, out.val);
    emit(t_val_end, s.T, out.test);
    if (out.train.empty()) emit(0, s.T, out.train);  // tiny-series fallback
    return out;
}

/// Seeded synthetic generators. kinds: sine, trend, damped, mixture.
inline RawSeries synth_generate(const std::string& kind, std::size_t d, std::size_t T,
                                std::uint64_t seed, double noise_std = 0.05) {
    if (T < 64) throw std::invalid_argument("synth_generate: T must be >= 64");
    if (kind != "sine" && kind != "trend" && kind != "damped" && kind != "mixture")
        throw std::invalid_argument("synth_generate: unknown kind " + kind);
    Rng rng(seed);
    RawSeries out;
    out.T = T;
    out.d = d;
    out.values.resize(T * d);
    out.timestamps.resize(T);
    for (std::size_t t = 0; t < T; ++t) out.timestamps[t] = static_cast<double>(t);

    for (std::size_t v = 0; v < d; ++v) {
        out.names.push_back("v" + std::to_string(v));
        const double amp = 0.7 + 0.6 * rng.uniform();
        const double freq = (2.0 + 6.0 * rng.uniform()) / static_cast<double>(T);
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        const double slope = 0.5 + rng.uniform();           // per unit of t/T
        const double decay = -(1.0 + 2.0 * rng.uniform());  // per unit of t/T
        const double omega = 2.0 * std::numbers::pi * (3.0 + 5.0 * rng.uniform());
        auto noise = rng.fork(v + 1);
        for (std::size_t t = 0; t < T; ++t) {
            const double tt = static_cast<double>(t);
            const double tn = tt / static_cast<double>(T);
            double x = 0.0;
            if (kind == "sine") {
                x = amp * std::sin(2.0 * std::numbers::pi * freq * tt + phase);
            } else if (kind == "trend") {
                x = slope * tn + 0.3 * amp * std::sin(2.0 * std::numbers::pi * freq * tt + phase);
            } else if (kind == "damped") {
                x = amp * std::exp(decay * tn) * std::cos(omega * tn + phase);
            } else {  // mixture
                x = 0.5 * amp * std::sin(2.0 * std::numbers::pi * freq * tt + phase) +
                    0.3 * slope * tn + 0.4 * amp * std::exp(decay * tn) * std::cos(omega * tn);
            }
            if (noise_std > 0.0) x += noise_std * noise.normal();
            out.values[t * d + v] = x;
        }
    }
    return out;
}

/// Gaussian perturbation of the lookback inputs only; the noise field is a
/// fixed unit draw per seed, scaled by std, so sweeps over std are nested.
inline WindowedDataset add_noise(const WindowedDataset& ds, double std, std::uint64_t seed) {
    if (std < 0.0) throw std::invalid_argument("add_noise: negative std");
    WindowedDataset out = ds;
    if (std == 0.0) return out;
    auto perturb = [&](std::vector<Window>& ws, std::uint64_t stream) {
        Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        for (auto& w : ws)
            for (auto& x : w.X) x += std * rng.normal();
    };
    perturb(out.train, 0);
    perturb(out.val, 1);
    perturb(out.test, 2);
    return out;
}

}  // namespace geocert::data
