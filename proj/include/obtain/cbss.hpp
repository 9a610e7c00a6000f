#pragma once

/*
 * Cumulative Beat Strength Signal.
 *
 * Each new OSS sample is blended with the best log-Gaussian-weighted
 * score of a hypothesized previous beat:
 *
 *   W[v]    = exp(-(eta * ln(-v / tau))^2),  v in [-2 tau, -tau/2]
 *   Phi[n]  = max_v W[v] * CBSS[n + v]
 *   CBSS[n] = (1 - alpha) * OSS[n] + alpha * Phi[n]
 *
 * The recursion makes the signal quasi-periodic at the beat period and
 * keeps peaking for a while after the input goes quiet. Until the first
 * tempo estimate exists there is no tau, so alpha is forced to zero and
 * CBSS follows the OSS.
 */

#include <cmath>
#include <cstdint>
#include <vector>

#include "obtain/errors.hpp"
#include "obtain/ring_buffer.hpp"

namespace obtain {

struct CbssConfig {
    double alpha = 0.9;
    double eta = 5.0;

    bool valid() const noexcept { return alpha >= 0.0 && alpha <= 1.0 && eta > 0.0; }
};

/// Log-Gaussian lookback window for beat period tau_b (in OSS samples).
/// weight(v) is defined for integer v in [-2 tau_b, -tau_b/2]; the peak
/// weight is exactly 1 at v == -tau_b.
class LogGaussianWindow {
public:
    LogGaussianWindow() = default;

    LogGaussianWindow(int tau_b, double eta) : tau_(tau_b) {
        if (tau_b < 2) {
            throw InputError("log-Gaussian window requires tau_b >= 2");
        }
        v_min_ = -2 * tau_b;
        v_max_ = -((tau_b + 1) / 2); // largest integer <= -tau_b/2
        weights_.reserve(static_cast<std::size_t>(v_max_ - v_min_ + 1));
        for (int v = v_min_; v <= v_max_; ++v) {
            const double r = std::log(static_cast<double>(-v) / tau_b);
            weights_.push_back(std::exp(-(eta * r) * (eta * r)));
        }
    }

    int tau() const noexcept { return tau_; }
    int v_min() const noexcept { return v_min_; }
    int v_max() const noexcept { return v_max_; }

    double weight(int v) const {
        if (v < v_min_ || v > v_max_) {
            throw InputError("log-Gaussian window: v outside domain");
        }
        return weights_[static_cast<std::size_t>(v - v_min_)];
    }

private:
    int tau_ = 0;
    int v_min_ = 0;
    int v_max_ = -1;
    std::vector<double> weights_;
};

/// Phi[n]: best weighted previous-beat score. History before the stream
/// start reads as zero.
inline double phi(const RingBuffer<double>& cbss, std::int64_t n,
                  const LogGaussianWindow& window) {
    double best = 0.0;
    for (int v = window.v_min(); v <= window.v_max(); ++v) {
        const double w = window.weight(v);
        const double value = w * cbss.at_or_zero(n + v);
        if (value > best) {
            best = value;
        }
    }
    return best;
}

/// Single CBSS update; appends the new value to the buffer.
inline double cbss_update(double oss_value, RingBuffer<double>& buf,
                          const CbssConfig& cfg, const LogGaussianWindow& window) {
    const double score = phi(buf, buf.head(), window);
    const double value = (1.0 - cfg.alpha) * oss_value + cfg.alpha * score;
    buf.push(value);
    return value;
}

/// Per-stream CBSS state. Capacity covers the deepest lookback (twice the
/// slowest beat period) and the 512-sample frames the detector reads.
class CbssTracker {
public:
    CbssTracker(const CbssConfig& cfg, double oss_rate, double min_bpm,
                std::size_t min_capacity = 1024)
        : cfg_(cfg),
          buf_(std::max<std::size_t>(
              2 * static_cast<std::size_t>(std::lround(60.0 * oss_rate / min_bpm)) + 1,
              min_capacity)) {
        if (!cfg.valid()) {
            throw InputError("invalid CBSS config");
        }
    }

    /// Append one sample; tau_b <= 0 means no tempo estimate yet.
    double push(double oss_value, int tau_b) {
        if (tau_b < 2) {
            buf_.push(oss_value); // alpha forced to 0 until a tempo exists
            return oss_value;
        }
        if (window_.tau() != tau_b) {
            window_ = LogGaussianWindow(tau_b, cfg_.eta);
        }
        return cbss_update(oss_value, buf_, cfg_, window_);
    }

    const RingBuffer<double>& buffer() const noexcept { return buf_; }

private:
    CbssConfig cfg_;
    RingBuffer<double> buf_;
    LogGaussianWindow window_;
};

} // namespace obtain
