#pragma once

/*
 * Causal tempo estimation.
 *
 * A sliding buffer of OSS samples is analyzed every buffer_hop samples:
 * mean-removed autocorrelation, harmonic enhancement (ACF stretched by 2x
 * and 4x and summed), peak picking inside the lag range implied by the
 * BPM limits, then scoring of up to 10 candidate periods by
 * cross-correlating ideal four-impulse pulse trains against the buffer at
 * every phase. The per-candidate score combines the best phase response
 * and its variance across phases, each z-normalized over the candidate
 * set.
 *
 * Instant estimates feed a decayed accumulator on a 1-BPM grid. The
 * adopted tempo follows the accumulator argmax, guarded by a 7-second
 * history: jumps of more than 5 BPM from the history mean are rejected
 * when they look like a harmonic of the mean, and otherwise adopted only
 * after persisting for about one second.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "obtain/errors.hpp"

namespace obtain {

struct TempoConfig {
    int buffer_len = 1024;  // OSS samples (~3 s at the 344.53 Hz hop rate)
    int buffer_hop = 128;
    double min_bpm = 50.0;
    double max_bpm = 210.0;
    int n_candidates = 10;
    double history_sec = 7.0;
    double change_threshold_bpm = 5.0;
    double change_delay_sec = 1.0;
    double accumulator_kernel_bpm = 5.0;
    // Recency decay applied to the accumulator before each new estimate;
    // without it a long-established tempo could never be displaced.
    double accumulator_decay = 0.5;

    bool valid() const noexcept {
        return buffer_len > 0 && buffer_hop > 0 && buffer_hop <= buffer_len &&
               min_bpm > 0.0 && min_bpm < max_bpm && n_candidates >= 1 &&
               history_sec > 0.0 && change_delay_sec >= 0.0 &&
               accumulator_kernel_bpm > 0.0 && accumulator_decay > 0.0 &&
               accumulator_decay <= 1.0;
    }
};

struct TempoEstimate {
    double bpm = 0.0;
    int period = 0; // beat period in OSS samples
};

/// Mean-removed autocorrelation over lags [0, len/2), normalized so that
/// ACF[0] == 1; all zeros for constant input.
inline std::vector<double> autocorrelation(std::span<const double> buf) {
    const std::size_t n = buf.size();
    const std::size_t n_lags = n / 2;
    std::vector<double> acf(n_lags, 0.0);
    if (n == 0) {
        return acf;
    }
    double mean = 0.0;
    for (double v : buf) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = buf[i] - mean;
    }
    for (std::size_t lag = 0; lag < n_lags; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) {
            acc += centered[i] * centered[i + lag];
        }
        acf[lag] = acc;
    }
    if (acf[0] > 0.0) {
        const double inv = 1.0 / acf[0];
        for (double& v : acf) {
            v *= inv;
        }
    } else {
        std::fill(acf.begin(), acf.end(), 0.0);
    }
    return acf;
}

/// EACF[l] = ACF[l] + ACF[2l] + ACF[4l], out-of-range terms reading as zero.
inline std::vector<double> enhance_harmonics(const std::vector<double>& acf) {
    std::vector<double> eacf(acf.size());
    for (std::size_t lag = 0; lag < acf.size(); ++lag) {
        double v = acf[lag];
        if (2 * lag < acf.size()) {
            v += acf[2 * lag];
        }
        if (4 * lag < acf.size()) {
            v += acf[4 * lag];
        }
        eacf[lag] = v;
    }
    return eacf;
}

struct TempoCandidate {
    int lag = 0;      // period in OSS samples
    double eacf = 0.0;
};

/// Lag range corresponding to [min_bpm, max_bpm] at the given OSS rate.
inline std::pair<int, int> tempo_lag_bounds(const TempoConfig& cfg, double oss_rate) {
    const int lo = static_cast<int>(std::lround(60.0 * oss_rate / cfg.max_bpm));
    const int hi = static_cast<int>(std::lround(60.0 * oss_rate / cfg.min_bpm));
    return {lo, hi};
}

/// Local maxima of the enhanced ACF inside the tempo lag range, strongest
/// first, at most n_candidates entries.
inline std::vector<TempoCandidate> pick_candidates(const std::vector<double>& eacf,
                                                   const TempoConfig& cfg,
                                                   double oss_rate) {
    auto [lag_min, lag_max] = tempo_lag_bounds(cfg, oss_rate);
    lag_min = std::max(lag_min, 1);
    lag_max = std::min<int>(lag_max, static_cast<int>(eacf.size()) - 2);

    std::vector<TempoCandidate> found;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
        const auto l = static_cast<std::size_t>(lag);
        if (eacf[l] > eacf[l - 1] && eacf[l] >= eacf[l + 1] && eacf[l] > 0.0) {
            found.push_back({lag, eacf[l]});
        }
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const TempoCandidate& a, const TempoCandidate& b) {
                         if (a.eacf != b.eacf) {
                             return a.eacf > b.eacf;
                         }
                         return a.lag < b.lag;
                     });
    if (found.size() > static_cast<std::size_t>(cfg.n_candidates)) {
        found.resize(static_cast<std::size_t>(cfg.n_candidates));
    }
    return found;
}

/// Score candidates by pulse-train cross-correlation and return the
/// winner's instant tempo in BPM. Each candidate period P is tested at
/// every phase in [0, P) with four unit impulses one period apart, minus
/// half-weight impulses halfway between them: a period that lands pulses
/// on beats has empty mid positions, while its double-period alias puts
/// real beats there, so the contrast separates a tempo from its
/// subharmonics. Phases are measured backwards from the newest sample so
/// the score tracks the freshest content; pulses past the buffer edge are
/// dropped. The score combines the max and the variance of the phase
/// response, each z-normalized over the candidate set. Ties break toward
/// the larger EACF value, then the smaller period.
inline double score_candidates(std::span<const double> buf,
                               const std::vector<TempoCandidate>& candidates,
                               double oss_rate) {
    if (candidates.empty()) {
        throw InputError("score_candidates: empty candidate list");
    }
    const auto n = static_cast<std::int64_t>(buf.size());
    std::vector<double> best(candidates.size(), 0.0);
    std::vector<double> variance(candidates.size(), 0.0);

    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const int period = candidates[c].lag;
        double max_cc = -1e300;
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int phase = 0; phase < period; ++phase) {
            double cc = 0.0;
            for (int pulse = 0; pulse < 4; ++pulse) {
                const std::int64_t pos =
                    n - 1 - phase - static_cast<std::int64_t>(pulse) * period;
                if (pos >= 0) {
                    cc += buf[static_cast<std::size_t>(pos)];
                }
                const std::int64_t mid = pos - period / 2;
                if (mid >= 0) {
                    cc -= 0.5 * buf[static_cast<std::size_t>(mid)];
                }
            }
            max_cc = std::max(max_cc, cc);
            sum += cc;
            sum_sq += cc * cc;
        }
        const double inv_p = 1.0 / period;
        const double mean = sum * inv_p;
        best[c] = max_cc;
        variance[c] = std::max(sum_sq * inv_p - mean * mean, 0.0);
    }

    auto z_normalize = [](std::vector<double>& v) {
        const auto n_items = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) {
            mean += x;
        }
        mean /= n_items;
        double var = 0.0;
        for (double x : v) {
            var += (x - mean) * (x - mean);
        }
        const double sd = std::sqrt(var / n_items);
        for (double& x : v) {
            x = sd > 0.0 ? (x - mean) / sd : 0.0;
        }
    };
    z_normalize(best);
    z_normalize(variance);

    std::size_t winner = 0;
    double winner_score = -1e300;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double score = best[c] + variance[c];
        const bool better =
            score > winner_score ||
            (score == winner_score &&
             (candidates[c].eacf > candidates[winner].eacf ||
              (candidates[c].eacf == candidates[winner].eacf &&
               candidates[c].lag < candidates[winner].lag)));
        if (c == 0 || better) {
            winner = c;
            winner_score = score;
        }
    }
    return 60.0 * oss_rate / candidates[winner].lag;
}

/// Accumulator, tempo history and pending-change bookkeeping.
struct TempoState {
    std::vector<double> accumulator;              // 1-BPM grid from min_bpm
    std::deque<std::pair<double, double>> history; // (time_sec, adopted bpm)
    double current_bpm = 0.0;
    int current_period = 0;
    std::optional<std::pair<double, double>> pending_change; // (bpm, first_seen)
    bool has_estimate = false;
};

namespace tempo_detail {

inline bool is_harmonic_ratio(double a, double b) {
    if (a <= 0.0 || b <= 0.0) {
        return false;
    }
    const double r = a / b;
    for (double h : {2.0, 3.0, 0.5, 1.0 / 3.0}) {
        if (std::abs(r / h - 1.0) <= 0.05) {
            return true;
        }
    }
    return false;
}

} // namespace tempo_detail

/// Fold one instant estimate into the accumulator and decide the adopted
/// tempo. Returns (current_bpm, current_period).
inline std::pair<double, int> accumulate_and_decide(double instant_bpm, TempoState& state,
                                                    const TempoConfig& cfg, double now_sec,
                                                    double oss_rate) {
    const int grid_len = static_cast<int>(std::floor(cfg.max_bpm - cfg.min_bpm)) + 1;
    if (state.accumulator.empty()) {
        state.accumulator.assign(static_cast<std::size_t>(grid_len), 0.0);
    }
    instant_bpm = std::clamp(instant_bpm, cfg.min_bpm, cfg.max_bpm);

    const double sigma = cfg.accumulator_kernel_bpm;
    for (int i = 0; i < grid_len; ++i) {
        const double bpm = cfg.min_bpm + i;
        const double d = (bpm - instant_bpm) / sigma;
        auto& cell = state.accumulator[static_cast<std::size_t>(i)];
        cell = cell * cfg.accumulator_decay + std::exp(-0.5 * d * d);
    }
    int argmax = 0;
    for (int i = 1; i < grid_len; ++i) {
        if (state.accumulator[static_cast<std::size_t>(i)] >
            state.accumulator[static_cast<std::size_t>(argmax)]) {
            argmax = i;
        }
    }
    const double accumulated = cfg.min_bpm + argmax;

    double adopted;
    if (now_sec < cfg.history_sec || state.history.empty()) {
        adopted = accumulated;
        state.pending_change.reset();
    } else {
        double mean = 0.0;
        for (const auto& [t, bpm] : state.history) {
            mean += bpm;
        }
        mean /= static_cast<double>(state.history.size());

        if (std::abs(accumulated - mean) <= cfg.change_threshold_bpm) {
            adopted = accumulated;
            state.pending_change.reset();
        } else if (tempo_detail::is_harmonic_ratio(accumulated, mean)) {
            adopted = mean;
            state.pending_change.reset();
        } else {
            if (state.pending_change &&
                std::abs(state.pending_change->first - accumulated) <=
                    cfg.change_threshold_bpm) {
                state.pending_change->first = accumulated;
            } else {
                state.pending_change = {accumulated, now_sec};
            }
            if (now_sec - state.pending_change->second >= cfg.change_delay_sec) {
                adopted = accumulated;
                state.pending_change.reset();
            } else {
                adopted = state.current_bpm > 0.0 ? state.current_bpm : accumulated;
            }
        }
    }

    adopted = std::clamp(adopted, cfg.min_bpm, cfg.max_bpm);
    state.current_bpm = adopted;
    state.current_period =
        std::max(1, static_cast<int>(std::lround(60.0 / adopted * oss_rate)));
    state.has_estimate = true;

    state.history.emplace_back(now_sec, adopted);
    while (!state.history.empty() &&
           state.history.front().first < now_sec - cfg.history_sec) {
        state.history.pop_front();
    }
    return {state.current_bpm, state.current_period};
}

/// One row of the tempo debug trace.
struct TempoTraceRow {
    double time_sec = 0.0;
    double instant_bpm = 0.0;
    double accumulated_bpm = 0.0;
    double adopted_bpm = 0.0;
};

/// Streaming wrapper: feed OSS samples, re-estimates every buffer_hop
/// samples once the buffer is full.
class TempoEstimator {
public:
    TempoEstimator(const TempoConfig& cfg, double oss_rate)
        : cfg_(cfg), oss_rate_(oss_rate) {
        if (!cfg.valid()) {
            throw InputError("invalid tempo config");
        }
        buffer_.reserve(static_cast<std::size_t>(cfg.buffer_len));
    }

    /// Returns the refreshed estimate when this sample triggered a
    /// re-estimation, nullopt otherwise.
    std::optional<TempoEstimate> push(double oss_value, double now_sec) {
        if (buffer_.size() < static_cast<std::size_t>(cfg_.buffer_len)) {
            buffer_.push_back(oss_value);
        } else {
            buffer_[static_cast<std::size_t>(write_ % cfg_.buffer_len)] = oss_value;
        }
        ++write_;
        if (buffer_.size() < static_cast<std::size_t>(cfg_.buffer_len) ||
            (write_ - cfg_.buffer_len) % cfg_.buffer_hop != 0) {
            return std::nullopt;
        }
        return estimate(now_sec);
    }

    const TempoState& state() const noexcept { return state_; }
    std::optional<TempoEstimate> current() const {
        if (!state_.has_estimate) {
            return std::nullopt;
        }
        return TempoEstimate{state_.current_bpm, state_.current_period};
    }
    const std::vector<TempoTraceRow>& trace() const noexcept { return trace_; }
    void enable_trace(bool on) noexcept { trace_enabled_ = on; }

private:
    std::optional<TempoEstimate> estimate(double now_sec) {
        // Linearize the ring: oldest sample first.
        std::vector<double> chrono(buffer_.size());
        const std::int64_t len = cfg_.buffer_len;
        for (std::int64_t i = 0; i < len; ++i) {
            chrono[static_cast<std::size_t>(i)] =
                buffer_[static_cast<std::size_t>((write_ + i) % len)];
        }

        const auto acf = autocorrelation(chrono);
        const auto eacf = enhance_harmonics(acf);
        const auto candidates = pick_candidates(eacf, cfg_, oss_rate_);
        if (candidates.empty()) {
            // Nothing periodic in range; hold the previous tempo.
            if (trace_enabled_ && state_.has_estimate) {
                trace_.push_back({now_sec, 0.0, state_.current_bpm, state_.current_bpm});
            }
            return current();
        }
        const double instant = score_candidates(chrono, candidates, oss_rate_);
        const auto [bpm, period] =
            accumulate_and_decide(instant, state_, cfg_, now_sec, oss_rate_);
        if (trace_enabled_) {
            int argmax = 0;
            for (std::size_t i = 1; i < state_.accumulator.size(); ++i) {
                if (state_.accumulator[i] >
                    state_.accumulator[static_cast<std::size_t>(argmax)]) {
                    argmax = static_cast<int>(i);
                }
            }
            trace_.push_back({now_sec, instant, cfg_.min_bpm + argmax, bpm});
        }
        return TempoEstimate{bpm, period};
    }

    TempoConfig cfg_;
    double oss_rate_;
    std::vector<double> buffer_;
    std::int64_t write_ = 0;
    TempoState state_;
    std::vector<TempoTraceRow> trace_;
    bool trace_enabled_ = false;
};

} // namespace obtain
