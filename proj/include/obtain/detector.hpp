#pragma once

/*
 * Real-time beat detection on the CBSS.
 *
 * Two systems run over sliding 512-sample frames (consecutive frames share
 * 511 samples):
 *
 *  System 1 - multiscale local-maxima detection. The frame is detrended,
 *  then a scale/position matrix is formed: entry (k, i) is 0 when sample i
 *  dominates both neighbors at distance k, else 1 + r with r uniform in
 *  [0, 1]. The scale whose row sum is smallest (lambda) caps the scales
 *  that matter; a sample is a peak when it dominates at every scale up to
 *  lambda. The system is gated to the span (BP-10, BP+7) samples after the
 *  last beat and fires when the newest completed sample is confirmed as a
 *  peak; if the span ends without a detection a beat is forced at BP+7 to
 *  keep the output periodic.
 *
 *  System 2 - pulse-train phase matching. Halfway between beats, unit
 *  impulses at period BP are cross-correlated with the CBSS frame at every
 *  phase; the best phase's pulse positions and their mean CBSS are kept
 *  until the next System 1 emission, which is replaced by the stored
 *  sequence's final peak whenever that sequence has the higher mean
 *  (the correction path).
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obtain/errors.hpp"
#include "obtain/ring_buffer.hpp"
#include "obtain/rng.hpp"

namespace obtain {

struct DetectorConfig {
    int frame_len = 512;
    int early_margin = 10;
    int late_margin = 7;
    std::uint64_t rng_seed = 0x0b7a1aULL;

    bool valid() const noexcept {
        return frame_len >= 4 && early_margin >= 0 && late_margin >= 0;
    }
};

struct BeatEvent {
    enum class Source { system1, forced, system2_correction };

    std::int64_t frame_index = 0; // global CBSS index
    double time_sec = 0.0;
    Source source = Source::system1;
};

inline const char* to_string(BeatEvent::Source source) {
    switch (source) {
        case BeatEvent::Source::system1: return "system1";
        case BeatEvent::Source::forced: return "forced";
        case BeatEvent::Source::system2_correction: return "system2-correction";
    }
    return "unknown";
}

/// Subtract the least-squares straight-line fit; the result has zero mean
/// and zero linear trend.
inline std::vector<double> detrend(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) {
        throw InputError("detrend requires at least 2 samples");
    }
    const double t_mean = static_cast<double>(n - 1) / 2.0;
    double x_mean = 0.0;
    for (double v : x) {
        x_mean += v;
    }
    x_mean /= static_cast<double>(n);

    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = static_cast<double>(i) - t_mean;
        num += dt * (x[i] - x_mean);
        den += dt * dt;
    }
    const double slope = den > 0.0 ? num / den : 0.0;

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] - (x_mean + slope * (static_cast<double>(i) - t_mean));
    }
    return out;
}

namespace detector_detail {

/// Scale count for a frame of n samples: rows k = 1 .. ceil(n/2) - 1.
inline int lms_scale_count(std::size_t n) {
    return static_cast<int>((n + 1) / 2) - 1;
}

/// Row sums of the scaled local-maxima matrix; the argmin row index is
/// lambda. Non-dominant entries draw 1 + r from the rng, so the draw
/// sequence (and therefore lambda) is reproducible for a fixed seed.
inline int compute_lambda(std::span<const double> x, Xoshiro256& rng) {
    const std::size_t n = x.size();
    const int scales = lms_scale_count(n);
    int lambda = 1;
    double best = 0.0;
    for (int k = 1; k <= scales; ++k) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const bool dominant = j >= static_cast<std::size_t>(k) &&
                                  j + static_cast<std::size_t>(k) < n &&
                                  x[j] > x[j - static_cast<std::size_t>(k)] &&
                                  x[j] > x[j + static_cast<std::size_t>(k)];
            if (!dominant) {
                row_sum += 1.0 + rng.uniform();
            }
        }
        if (k == 1 || row_sum < best) {
            best = row_sum;
            lambda = k;
        }
    }
    return std::max(lambda, 1);
}

} // namespace detector_detail

struct LmsResult {
    std::vector<int> peaks; // sample indices, ascending
    int lambda = 1;
};

/// Multiscale peak detection. A sample is a peak iff it dominates both
/// k-distant neighbors for every scale k = 1..lambda; comparisons against
/// indices outside the frame count as failures, so peaks can only occur at
/// interior positions.
inline LmsResult detect_peaks_lms(std::span<const double> x, Xoshiro256& rng) {
    const std::size_t n = x.size();
    if (n < 4) {
        throw InputError("detect_peaks_lms requires at least 4 samples");
    }
    LmsResult result;
    result.lambda = detector_detail::compute_lambda(x, rng);
    const auto lambda = static_cast<std::size_t>(result.lambda);
    for (std::size_t j = 0; j < n; ++j) {
        bool peak = true;
        for (std::size_t k = 1; k <= lambda; ++k) {
            if (j < k || j + k >= n || x[j] <= x[j - k] || x[j] <= x[j + k]) {
                peak = false;
                break;
            }
        }
        if (peak) {
            result.peaks.push_back(static_cast<int>(j));
        }
    }
    return result;
}

/// One System 2 scan: pulse positions at the best phase, their mean CBSS
/// and the final (most recent) peak.
struct System2Result {
    std::vector<std::int64_t> positions;
    double mean_cbss = 0.0;
    std::int64_t final_peak = 0;
};

/// Cross-correlate a unit pulse train of period bp against the CBSS frame
/// ending at index n, over every phase in [0, bp). Ties break toward the
/// smallest phase.
inline System2Result system2_scan(const RingBuffer<double>& cbss, std::int64_t n, int bp,
                                  int frame_len) {
    if (bp < 1 || frame_len < 1) {
        throw InputError("system2_scan requires bp >= 1 and a nonempty frame");
    }
    const std::int64_t w0 = n - (frame_len - 1);
    int best_phase = 0;
    double best_cc = -1.0;
    for (int phase = 0; phase < bp; ++phase) {
        double cc = 0.0;
        for (std::int64_t pos = phase; pos < frame_len; pos += bp) {
            cc += cbss.at_or_zero(w0 + pos);
        }
        if (cc > best_cc) {
            best_cc = cc;
            best_phase = phase;
        }
    }
    System2Result result;
    double sum = 0.0;
    for (std::int64_t pos = best_phase; pos < frame_len; pos += bp) {
        result.positions.push_back(w0 + pos);
        sum += cbss.at_or_zero(w0 + pos);
    }
    result.mean_cbss = sum / static_cast<double>(result.positions.size());
    result.final_peak = result.positions.back();
    return result;
}

/// Streaming dual-system detector.
class BeatDetector {
public:
    BeatDetector(const DetectorConfig& cfg, double seconds_per_sample)
        : cfg_(cfg), seconds_per_sample_(seconds_per_sample), rng_(cfg.rng_seed) {
        if (!cfg.valid()) {
            throw InputError("invalid detector config");
        }
    }

    /// Advance by one CBSS sample (call once per push to the ring).
    /// bp is the current beat period in CBSS samples; < 2 disables the
    /// detector (no tempo estimate yet).
    std::optional<BeatEvent> step(const RingBuffer<double>& cbss, int bp) {
        const std::int64_t n = cbss.head() - 1; // newest sample index
        if (bp < 2 || n + 1 < cfg_.frame_len) {
            return std::nullopt;
        }

        if (!has_beat_) {
            // Bootstrap: no span gate until the first beat exists.
            if (causal_peak_at_end(cbss, n)) {
                return commit(make_event(n - 1, BeatEvent::Source::system1), n);
            }
            return std::nullopt;
        }

        const std::int64_t elapsed = n - last_beat_;

        if (!system2_fired_ && elapsed == std::max<std::int64_t>(1, bp / 2)) {
            system2_fired_ = true;
            pending_ = system2_scan(cbss, n, bp, cfg_.frame_len);
        }

        std::optional<BeatEvent> event;
        const std::int64_t peak_elapsed = elapsed - 1; // slot under test
        if (peak_elapsed > bp - cfg_.early_margin && peak_elapsed < bp + cfg_.late_margin &&
            causal_peak_at_end(cbss, n)) {
            event = make_event(n - 1, BeatEvent::Source::system1);
        }
        if (!event && elapsed >= bp + cfg_.late_margin) {
            event = make_event(n, BeatEvent::Source::forced);
        }
        if (!event) {
            return std::nullopt;
        }
        event = arbitrate(*event, cbss, n);
        return commit(*event, n);
    }

    bool has_beat() const noexcept { return has_beat_; }
    std::int64_t last_beat_index() const noexcept { return last_beat_; }

private:
    BeatEvent make_event(std::int64_t index, BeatEvent::Source source) const {
        return {index, static_cast<double>(index) * seconds_per_sample_, source};
    }

    /// Detrend the current frame and decide whether the newest completed
    /// sample (index n-1) is a confirmed peak: it must exceed the newest
    /// sample (its only available right neighbor) and every in-range left
    /// neighbor up to scale lambda.
    bool causal_peak_at_end(const RingBuffer<double>& cbss, std::int64_t n) {
        const auto len = static_cast<std::size_t>(cfg_.frame_len);
        std::vector<double> frame(len);
        for (std::size_t i = 0; i < len; ++i) {
            frame[i] = cbss.at_or_zero(n - static_cast<std::int64_t>(len - 1 - i));
        }
        const auto x = detrend(frame);
        const int lambda = detector_detail::compute_lambda(x, rng_);

        const std::size_t j = len - 2;
        if (!(x[j] > x[j + 1])) {
            return false;
        }
        for (std::size_t k = 1; k <= static_cast<std::size_t>(lambda); ++k) {
            if (j >= k && !(x[j] > x[j - k])) {
                return false;
            }
        }
        return true;
    }

    /// Compare the stored System 2 sequence against System 1's beats in the
    /// current frame; replace the event when System 2's mean is strictly
    /// higher and its final peak still advances the beat sequence.
    BeatEvent arbitrate(BeatEvent event, const RingBuffer<double>& cbss, std::int64_t n) {
        if (!pending_) {
            return event;
        }
        const std::int64_t w0 = n - (cfg_.frame_len - 1);
        double sum = cbss.at_or_zero(event.frame_index);
        int count = 1;
        for (std::int64_t beat : recent_beats_) {
            if (beat >= w0 && beat <= n) {
                sum += cbss.at_or_zero(beat);
                ++count;
            }
        }
        const double system1_mean = sum / count;
        if (pending_->mean_cbss > system1_mean && pending_->final_peak > last_beat_) {
            event = make_event(pending_->final_peak, BeatEvent::Source::system2_correction);
        }
        pending_.reset();
        return event;
    }

    std::optional<BeatEvent> commit(const BeatEvent& event, std::int64_t /*n*/) {
        has_beat_ = true;
        last_beat_ = event.frame_index;
        recent_beats_.push_back(event.frame_index);
        while (recent_beats_.size() > 16) {
            recent_beats_.pop_front();
        }
        system2_fired_ = false;
        return event;
    }

    DetectorConfig cfg_;
    double seconds_per_sample_;
    Xoshiro256 rng_;
    bool has_beat_ = false;
    std::int64_t last_beat_ = -1;
    std::deque<std::int64_t> recent_beats_;
    std::optional<System2Result> pending_;
    bool system2_fired_ = false;
};

} // namespace obtain
