#pragma once

/*
 * Onset Strength Signal (OSS) extraction.
 *
 * Each 1024-sample analysis frame (hop 128, 87.5% overlap) becomes one
 * OSS value through:
 *
 *   1. Hamming-windowed magnitude FFT (one-sided, 513 bins).
 *   2. Normalization by a reference maximum estimated over the first
 *      ~1 s of frames and frozen afterwards, plus a noise gate that
 *      zeroes bins more than 74 dB below that reference.
 *   3. Log compression x -> log(1 + gamma x) / log(1 + gamma).
 *   4. Half-wave-rectified spectral flux between consecutive
 *      compressed spectra.
 *   5. Causal smoothing with a 15-tap unit-sum Hamming FIR
 *      (group delay ~7 hops, about 20 ms).
 *
 * The OSS rate equals the hop rate, 44100/128 = 344.53 Hz.
 */

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "obtain/audio.hpp"
#include "obtain/errors.hpp"
#include "obtain/fft.hpp"

namespace obtain {

/// One-sided magnitude spectrum; window_len/2 + 1 bins.
using SpectralFrame = std::vector<double>;

struct CompressionConfig {
    double gamma = 100.0;
    double noise_floor_db = 74.0;
    int ref_span_frames = 344; // ~1 s of hops

    bool valid() const noexcept {
        return gamma > 0.0 && noise_floor_db > 0.0 && ref_span_frames >= 1;
    }
};

/// 15 taps of a unit-sum Hamming window.
struct SmootherConfig {
    static constexpr int kTaps = 15;
    std::array<double, kTaps> taps{};

    static SmootherConfig normalized_hamming() {
        SmootherConfig cfg;
        const auto w = hamming_window(kTaps);
        double sum = 0.0;
        for (double v : w) {
            sum += v;
        }
        for (int i = 0; i < kTaps; ++i) {
            cfg.taps[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / sum;
        }
        return cfg;
    }
};

struct OssSample {
    double value = 0.0;
    std::int64_t frame_index = 0;
    double time_sec = 0.0;
};

/// Hamming-windowed one-sided magnitude spectrum of one analysis frame.
inline SpectralFrame magnitude_spectrum(std::span<const double> frame,
                                        std::span<const double> analysis_window) {
    if (frame.size() != analysis_window.size()) {
        throw InputError("frame length does not match analysis window");
    }
    std::vector<std::complex<double>> buf(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        if (!std::isfinite(frame[i])) {
            throw InputError("non-finite sample in analysis frame");
        }
        buf[i] = frame[i] * analysis_window[i];
    }
    fft_inplace(buf);
    SpectralFrame mags(frame.size() / 2 + 1);
    for (std::size_t k = 0; k < mags.size(); ++k) {
        mags[k] = std::abs(buf[k]);
    }
    return mags;
}

/// Running reference maximum: tracks the raw-magnitude max over the first
/// ref_span_frames frames, then freezes.
struct ReferenceMax {
    double value = 0.0;
    int frames_seen = 0;

    void observe(const SpectralFrame& spec, const CompressionConfig& cfg) {
        if (frames_seen < cfg.ref_span_frames) {
            for (double m : spec) {
                if (m > value) {
                    value = m;
                }
            }
        }
        ++frames_seen;
    }
};

/// Divide by the reference max (all-zero output when the reference is 0)
/// and zero every bin below the noise floor.
inline SpectralFrame normalize_and_gate(const SpectralFrame& spec, ReferenceMax& state,
                                        const CompressionConfig& cfg) {
    state.observe(spec, cfg);
    SpectralFrame out(spec.size(), 0.0);
    if (state.value <= 0.0) {
        return out;
    }
    const double gate = std::pow(10.0, -cfg.noise_floor_db / 20.0);
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double v = spec[k] / state.value;
        out[k] = v < gate ? 0.0 : v;
    }
    return out;
}

/// log(1 + gamma x) / log(1 + gamma), with x clamped to [0, 1] first so the
/// compressed maximum is pinned at 1.
inline SpectralFrame log_compress(const SpectralFrame& spec, const CompressionConfig& cfg) {
    SpectralFrame out(spec.size());
    const double denom = std::log1p(cfg.gamma);
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double x = std::min(spec[k], 1.0);
        out[k] = std::log1p(cfg.gamma * x) / denom;
    }
    return out;
}

/// Half-wave-rectified spectral flux between consecutive compressed spectra.
inline double flux(const SpectralFrame& prev, const SpectralFrame& curr) {
    if (prev.size() != curr.size()) {
        throw InputError("flux: spectra differ in length");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < curr.size(); ++k) {
        const double d = curr[k] - prev[k];
        if (d > 0.0) {
            sum += d;
        }
    }
    return sum;
}

/// Causal 15-tap FIR; history before the stream start reads as zero.
class FluxSmoother {
public:
    explicit FluxSmoother(const SmootherConfig& cfg) : cfg_(cfg) {}

    double push(double flux_value) {
        history_[write_ % SmootherConfig::kTaps] = flux_value;
        ++write_;
        double acc = 0.0;
        const int available = static_cast<int>(
            std::min<std::int64_t>(write_, SmootherConfig::kTaps));
        for (int k = 0; k < available; ++k) {
            const std::int64_t idx = write_ - 1 - k;
            acc += cfg_.taps[static_cast<std::size_t>(k)] *
                   history_[idx % SmootherConfig::kTaps];
        }
        return acc;
    }

private:
    SmootherConfig cfg_;
    std::array<double, SmootherConfig::kTaps> history_{};
    std::int64_t write_ = 0;
};

/// Convenience wrapper: smooth a whole flux sequence.
inline std::vector<double> smooth(std::span<const double> flux_stream,
                                  const SmootherConfig& cfg) {
    FluxSmoother smoother(cfg);
    std::vector<double> out;
    out.reserve(flux_stream.size());
    for (double f : flux_stream) {
        out.push_back(smoother.push(f));
    }
    return out;
}

/// Per-stream OSS chain; feed whole analysis frames, get one OssSample each.
class OnsetExtractor {
public:
    OnsetExtractor(const FrameConfig& frame_cfg, const CompressionConfig& comp_cfg,
                   const SmootherConfig& smoother_cfg)
        : frame_cfg_(frame_cfg),
          comp_cfg_(comp_cfg),
          window_(hamming_window_periodic(static_cast<std::size_t>(frame_cfg.window_len))),
          prev_spectrum_(static_cast<std::size_t>(frame_cfg.window_len) / 2 + 1, 0.0),
          smoother_(smoother_cfg) {
        if (!frame_cfg.valid() || !comp_cfg.valid()) {
            throw InputError("invalid OSS configuration");
        }
    }

    OssSample process_frame(std::span<const double> frame) {
        auto spec = magnitude_spectrum(frame, window_);
        auto gated = normalize_and_gate(spec, ref_max_, comp_cfg_);
        auto compressed = log_compress(gated, comp_cfg_);
        last_flux_ = flux(prev_spectrum_, compressed);
        prev_spectrum_ = std::move(compressed);

        OssSample sample;
        sample.value = smoother_.push(last_flux_);
        sample.frame_index = frame_index_;
        sample.time_sec = static_cast<double>(frame_index_) * frame_cfg_.hop / kPipelineRate;
        ++frame_index_;
        return sample;
    }

    double oss_rate() const {
        return static_cast<double>(kPipelineRate) / frame_cfg_.hop;
    }
    double last_flux() const { return last_flux_; }

private:
    FrameConfig frame_cfg_;
    CompressionConfig comp_cfg_;
    std::vector<double> window_;
    ReferenceMax ref_max_;
    SpectralFrame prev_spectrum_;
    FluxSmoother smoother_;
    std::int64_t frame_index_ = 0;
    double last_flux_ = 0.0;
};

} // namespace obtain
