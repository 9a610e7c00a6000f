#pragma once

/*
 * Per-hop pipeline: framing -> OSS -> tempo -> CBSS -> beat detection.
 *
 * One call to process_hop consumes exactly `hop` new samples, emits at
 * most one beat event, and never looks at audio beyond the samples it was
 * handed. Wall time per hop is recorded against the real-time budget
 * (hop / 44100 s, about 2.9 ms at the defaults); overruns are counted,
 * not fatal.
 */

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obtain/audio.hpp"
#include "obtain/cbss.hpp"
#include "obtain/detector.hpp"
#include "obtain/errors.hpp"
#include "obtain/metrics.hpp"
#include "obtain/onset.hpp"
#include "obtain/tempo.hpp"
#include "obtain/wav.hpp"

namespace obtain {

struct PipelineConfig {
    FrameConfig frame;
    CompressionConfig compression;
    SmootherConfig smoother = SmootherConfig::normalized_hamming();
    TempoConfig tempo;
    CbssConfig cbss;
    DetectorConfig detector;
    EvalConfig eval;

    bool valid() const noexcept {
        return frame.valid() && compression.valid() && tempo.valid() && cbss.valid() &&
               detector.valid() && frame.window_len % frame.hop == 0 &&
               (frame.window_len & (frame.window_len - 1)) == 0;
    }
};

struct OssTraceRow {
    std::int64_t frame_index = 0;
    double time_sec = 0.0;
    double flux = 0.0;
    double oss = 0.0;
};

struct CbssTraceRow {
    std::int64_t frame_index = 0;
    double time_sec = 0.0;
    double oss = 0.0;
    double cbss = 0.0;
};

struct DebugTraces {
    std::vector<OssTraceRow> oss;
    std::vector<CbssTraceRow> cbss;
    std::vector<TempoTraceRow> tempo;
};

struct LatencyStats {
    std::size_t hops = 0;
    std::size_t overruns = 0;
    double budget_ms = 0.0;
    double mean_ms = 0.0;
    double p99_ms = 0.0;
    double max_ms = 0.0;
};

class Pipeline {
public:
    explicit Pipeline(const PipelineConfig& cfg, bool collect_traces = false)
        : cfg_(cfg),
          window_(static_cast<std::size_t>(cfg.frame.window_len), 0.0),
          onset_(cfg.frame, cfg.compression, cfg.smoother),
          tempo_(cfg.tempo, onset_.oss_rate()),
          cbss_(cfg.cbss, onset_.oss_rate(), cfg.tempo.min_bpm,
                static_cast<std::size_t>(2 * cfg.detector.frame_len)),
          detector_(cfg.detector, static_cast<double>(cfg.frame.hop) / kPipelineRate),
          collect_traces_(collect_traces) {
        if (!cfg.valid()) {
            throw InputError("invalid pipeline config (window must be a power of two "
                             "and a multiple of the hop)");
        }
        tempo_.enable_trace(collect_traces);
    }

    /// Feed exactly `hop` new samples; returns a beat event when one fires.
    std::optional<BeatEvent> process_hop(std::span<const double> samples) {
        if (samples.size() != static_cast<std::size_t>(cfg_.frame.hop)) {
            throw InputError("process_hop requires exactly hop samples");
        }
        const auto start = std::chrono::steady_clock::now();

        const auto window_len = static_cast<std::size_t>(cfg_.frame.window_len);
        const auto hop = static_cast<std::size_t>(cfg_.frame.hop);
        std::copy(samples.begin(), samples.end(), window_.begin() + write_pos_);
        write_pos_ = (write_pos_ + hop) % window_len;
        total_samples_ += static_cast<std::int64_t>(hop);
        ++hop_counter_;

        std::optional<BeatEvent> event;
        if (total_samples_ >= static_cast<std::int64_t>(window_len)) {
            // Linearize the newest window_len samples (oldest first).
            std::vector<double> frame(window_len);
            for (std::size_t i = 0; i < window_len; ++i) {
                frame[i] = window_[(write_pos_ + i) % window_len];
            }
            const OssSample oss = onset_.process_frame(frame);
            tempo_.push(oss.value, oss.time_sec);
            const auto estimate = tempo_.current();
            const int tau = estimate ? estimate->period : 0;
            const double cbss_value = cbss_.push(oss.value, tau);
            event = detector_.step(cbss_.buffer(), tau);

            if (collect_traces_) {
                traces_.oss.push_back(
                    {oss.frame_index, oss.time_sec, onset_.last_flux(), oss.value});
                traces_.cbss.push_back(
                    {oss.frame_index, oss.time_sec, oss.value, cbss_value});
            }
        }

        const auto stop = std::chrono::steady_clock::now();
        hop_times_ms_.push_back(
            std::chrono::duration<double, std::milli>(stop - start).count());
        return event;
    }

    double stream_time_sec() const {
        return static_cast<double>(total_samples_) / kPipelineRate;
    }

    std::int64_t hop_counter() const noexcept { return hop_counter_; }

    DebugTraces take_traces() {
        traces_.tempo = tempo_.trace();
        return std::move(traces_);
    }

    LatencyStats latency() const {
        LatencyStats stats;
        stats.hops = hop_times_ms_.size();
        stats.budget_ms = 1000.0 * cfg_.frame.hop / kPipelineRate;
        if (hop_times_ms_.empty()) {
            return stats;
        }
        std::vector<double> sorted = hop_times_ms_;
        std::sort(sorted.begin(), sorted.end());
        double sum = 0.0;
        for (double t : sorted) {
            sum += t;
            if (t > stats.budget_ms) {
                ++stats.overruns;
            }
        }
        stats.mean_ms = sum / static_cast<double>(sorted.size());
        const auto p99_idx = static_cast<std::size_t>(
            std::min<double>(static_cast<double>(sorted.size()) - 1.0,
                             std::ceil(0.99 * static_cast<double>(sorted.size())) - 1.0));
        stats.p99_ms = sorted[p99_idx];
        stats.max_ms = sorted.back();
        return stats;
    }

private:
    PipelineConfig cfg_;
    std::vector<double> window_;
    std::size_t write_pos_ = 0;
    std::int64_t total_samples_ = 0;
    std::int64_t hop_counter_ = 0;
    OnsetExtractor onset_;
    TempoEstimator tempo_;
    CbssTracker cbss_;
    BeatDetector detector_;
    bool collect_traces_ = false;
    DebugTraces traces_;
    std::vector<double> hop_times_ms_;
};

struct RunResult {
    std::vector<BeatEvent> events;
    DebugTraces traces;
    LatencyStats latency;
    double wall_sec = 0.0;
    double audio_sec = 0.0;
};

/// Run the pipeline over a whole in-memory stream.
inline RunResult run_stream_samples(const AudioStream& stream, const PipelineConfig& cfg,
                                    bool collect_traces = false) {
    Pipeline pipeline(cfg, collect_traces);
    RunResult result;
    result.audio_sec = stream.duration_sec();
    const auto start = std::chrono::steady_clock::now();
    const auto hop = static_cast<std::size_t>(cfg.frame.hop);
    for (std::size_t pos = 0; pos + hop <= stream.samples.size(); pos += hop) {
        auto event = pipeline.process_hop(
            std::span<const double>(stream.samples).subspan(pos, hop));
        if (event) {
            result.events.push_back(*event);
        }
    }
    const auto stop = std::chrono::steady_clock::now();
    result.wall_sec = std::chrono::duration<double>(stop - start).count();
    result.latency = pipeline.latency();
    result.traces = pipeline.take_traces();
    return result;
}

/// Decode an audio file and track it.
inline RunResult run_file(const std::string& path, const PipelineConfig& cfg,
                          bool collect_traces = false) {
    return run_stream_samples(decode_wav_file(path), cfg, collect_traces);
}

/// Raw PCM streaming entry point: signed 16-bit little-endian interleaved
/// samples; events are pushed to the sink as soon as they fire. Returns 0
/// on a clean end of stream, 1 when the sink refused an event.
inline int run_stream(std::istream& pcm, int sample_rate, int channels,
                      const std::function<bool(const BeatEvent&)>& sink,
                      const PipelineConfig& cfg, LatencyStats* latency_out = nullptr) {
    if (sample_rate <= 0 || channels < 1 || channels > 2) {
        throw InputError("stream mode supports 1-2 channels at a positive rate");
    }
    Pipeline pipeline(cfg, false);
    StreamingResampler resampler(sample_rate, kPipelineRate);
    const auto hop = static_cast<std::size_t>(cfg.frame.hop);

    std::vector<double> pending;
    std::vector<double> mono;
    std::vector<char> raw(4096 * static_cast<std::size_t>(channels) * 2);

    int status = 0;
    for (;;) {
        pcm.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        const auto got = static_cast<std::size_t>(pcm.gcount());
        if (got == 0) {
            break;
        }
        const std::size_t n_frames = got / (2 * static_cast<std::size_t>(channels));
        mono.clear();
        mono.reserve(n_frames);
        for (std::size_t i = 0; i < n_frames; ++i) {
            double acc = 0.0;
            for (int c = 0; c < channels; ++c) {
                const std::size_t p = (i * static_cast<std::size_t>(channels) +
                                       static_cast<std::size_t>(c)) *
                                      2;
                const auto lo = static_cast<unsigned char>(raw[p]);
                const auto hi = static_cast<unsigned char>(raw[p + 1]);
                const auto s = static_cast<std::int16_t>(
                    static_cast<std::uint16_t>(lo) |
                    (static_cast<std::uint16_t>(hi) << 8));
                acc += static_cast<double>(s) / 32768.0;
            }
            mono.push_back(acc / channels);
        }
        resampler.push(mono, pending);

        std::size_t consumed = 0;
        while (pending.size() - consumed >= hop) {
            auto event = pipeline.process_hop(
                std::span<const double>(pending).subspan(consumed, hop));
            consumed += hop;
            if (event && !sink(*event)) {
                status = 1;
                break;
            }
        }
        pending.erase(pending.begin(),
                      pending.begin() + static_cast<std::ptrdiff_t>(consumed));
        if (status != 0 || !pcm) {
            break;
        }
    }
    if (latency_out) {
        *latency_out = pipeline.latency();
    }
    return status;
}

/// Debug-trace CSV writers (9 significant digits).
inline std::string format_oss_csv(const std::vector<OssTraceRow>& rows) {
    std::string out = "frame_index,time_sec,flux,oss\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(r.frame_index), r.time_sec, r.flux, r.oss);
        out += buf;
    }
    return out;
}

inline std::string format_cbss_csv(const std::vector<CbssTraceRow>& rows) {
    std::string out = "frame_index,time_sec,oss,cbss\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(r.frame_index), r.time_sec, r.oss, r.cbss);
        out += buf;
    }
    return out;
}

inline std::string format_tempo_csv(const std::vector<TempoTraceRow>& rows) {
    std::string out = "time_sec,instant_bpm,accumulated_bpm,adopted_bpm\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", r.time_sec,
                      r.instant_bpm, r.accumulated_bpm, r.adopted_bpm);
        out += buf;
    }
    return out;
}

} // namespace obtain
