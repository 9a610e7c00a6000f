#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "obtain/errors.hpp"

namespace obtain {

inline constexpr int kPipelineRate = 44100;

/// Mono sample stream. After ingestion the rate is always 44100 Hz and
/// samples lie in [-1, 1].
struct AudioStream {
    int sample_rate = kPipelineRate;
    std::vector<double> samples;

    double duration_sec() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

/// Analysis framing: 1024-sample windows advanced by 128 samples
/// (87.5% overlap) at the defaults.
struct FrameConfig {
    int window_len = 1024;
    int hop = 128;

    bool valid() const noexcept {
        return window_len > 0 && hop > 0 && hop <= window_len;
    }
};

/// Number of whole frames in a stream of n samples; a trailing partial
/// frame is never emitted.
inline std::size_t frame_count(std::size_t n, const FrameConfig& cfg) {
    if (!cfg.valid()) {
        throw InputError("invalid frame config");
    }
    const auto window = static_cast<std::size_t>(cfg.window_len);
    if (n < window) {
        return 0;
    }
    return (n - window) / static_cast<std::size_t>(cfg.hop) + 1;
}

/// Frame i as a view over samples [i*hop, i*hop + window_len).
inline std::span<const double> frame_at(const AudioStream& stream,
                                        const FrameConfig& cfg, std::size_t i) {
    return std::span<const double>(stream.samples)
        .subspan(i * static_cast<std::size_t>(cfg.hop),
                 static_cast<std::size_t>(cfg.window_len));
}

/// All whole frames of a stream, in order.
inline std::vector<std::span<const double>> frame_stream(const AudioStream& stream,
                                                         const FrameConfig& cfg) {
    std::vector<std::span<const double>> frames;
    const std::size_t count = frame_count(stream.samples.size(), cfg);
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        frames.push_back(frame_at(stream, cfg, i));
    }
    return frames;
}

/// Linear-interpolation resampler. Quality is adequate here because the
/// chain consumes magnitude flux only; see the README notes on ingestion.
inline std::vector<double> resample_linear(const std::vector<double>& in,
                                           int from_rate, int to_rate) {
    if (from_rate <= 0 || to_rate <= 0) {
        throw InputError("sample rates must be positive");
    }
    if (from_rate == to_rate || in.empty()) {
        return in;
    }
    const double step = static_cast<double>(from_rate) / to_rate;
    const std::size_t out_len =
        static_cast<std::size_t>(std::floor(static_cast<double>(in.size() - 1) / step)) + 1;
    std::vector<double> out(out_len);
    for (std::size_t j = 0; j < out_len; ++j) {
        const double pos = static_cast<double>(j) * step;
        const auto i0 = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i0);
        const std::size_t i1 = std::min(i0 + 1, in.size() - 1);
        out[j] = in[i0] + frac * (in[i1] - in[i0]);
    }
    return out;
}

/// Incremental linear resampler for the raw PCM stream mode. Output
/// position j maps to input position j * from/to, computed from j directly
/// so there is no accumulated phase drift on long streams.
class StreamingResampler {
public:
    StreamingResampler(int from_rate, int to_rate)
        : step_(static_cast<double>(from_rate) / to_rate), passthrough_(from_rate == to_rate) {
        if (from_rate <= 0 || to_rate <= 0) {
            throw InputError("sample rates must be positive");
        }
    }

    /// Feed input samples; appends converted output to `out`.
    void push(std::span<const double> in, std::vector<double>& out) {
        if (passthrough_) {
            out.insert(out.end(), in.begin(), in.end());
            return;
        }
        for (double s : in) {
            if (seen_ == 0) {
                while (next_out_pos() <= 0.0) {
                    out.push_back(s);
                    ++out_index_;
                }
            } else {
                const double base = static_cast<double>(seen_ - 1);
                while (next_out_pos() <= static_cast<double>(seen_)) {
                    const double frac = next_out_pos() - base;
                    out.push_back(prev_ + frac * (s - prev_));
                    ++out_index_;
                }
            }
            prev_ = s;
            ++seen_;
        }
    }

private:
    double next_out_pos() const { return static_cast<double>(out_index_) * step_; }

    double step_;
    bool passthrough_;
    double prev_ = 0.0;
    std::int64_t seen_ = 0;
    std::int64_t out_index_ = 0;
};

} // namespace obtain
