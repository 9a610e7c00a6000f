#pragma once

// Synthetic fixtures shared by the unit and acceptance suites.

#include <cmath>
#include <numbers>
#include <vector>

#include "obtain/audio.hpp"

namespace synth {

/// Beat times of a constant-tempo grid over [0, duration).
inline std::vector<double> beat_grid(double bpm, double duration_sec) {
    std::vector<double> grid;
    const double period = 60.0 / bpm;
    for (double t = 0.0; t < duration_sec; t += period) {
        grid.push_back(t);
    }
    return grid;
}

/// Short decaying sine burst at each beat over silence.
inline obtain::AudioStream click_track(double bpm, double duration_sec,
                                       double click_hz = 1500.0,
                                       double click_sec = 0.012, double amp = 0.8) {
    obtain::AudioStream stream;
    const auto rate = static_cast<double>(obtain::kPipelineRate);
    stream.samples.assign(static_cast<std::size_t>(duration_sec * rate), 0.0);
    const auto click_len = static_cast<std::size_t>(click_sec * rate);
    for (double beat : beat_grid(bpm, duration_sec)) {
        const auto start = static_cast<std::size_t>(beat * rate);
        for (std::size_t i = 0; i < click_len && start + i < stream.samples.size(); ++i) {
            const double t = static_cast<double>(i) / rate;
            const double envelope = std::exp(-t / (click_sec / 4.0));
            stream.samples[start + i] +=
                amp * envelope * std::sin(2.0 * std::numbers::pi * click_hz * t);
        }
    }
    return stream;
}

/// Click track that changes tempo at switch_sec; the first post-switch beat
/// lands exactly at the switch point.
inline obtain::AudioStream tempo_change_track(double bpm_a, double bpm_b,
                                              double switch_sec, double duration_sec) {
    obtain::AudioStream stream;
    const auto rate = static_cast<double>(obtain::kPipelineRate);
    stream.samples.assign(static_cast<std::size_t>(duration_sec * rate), 0.0);

    auto add_clicks = [&](double bpm, double from, double to) {
        const double period = 60.0 / bpm;
        const auto click_len = static_cast<std::size_t>(0.012 * rate);
        for (double t = from; t < to; t += period) {
            const auto start = static_cast<std::size_t>(t * rate);
            for (std::size_t i = 0; i < click_len && start + i < stream.samples.size();
                 ++i) {
                const double tau = static_cast<double>(i) / rate;
                stream.samples[start + i] +=
                    0.8 * std::exp(-tau / 0.003) *
                    std::sin(2.0 * std::numbers::pi * 1500.0 * tau);
            }
        }
    };
    add_clicks(bpm_a, 0.0, switch_sec);
    add_clicks(bpm_b, switch_sec, duration_sec);
    return stream;
}

/// Pure sine stream.
inline obtain::AudioStream sine(double freq_hz, double duration_sec, int rate,
                                double amp = 0.5) {
    obtain::AudioStream stream;
    stream.sample_rate = rate;
    const auto n = static_cast<std::size_t>(duration_sec * rate);
    stream.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        stream.samples.push_back(
            amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate));
    }
    return stream;
}

} // namespace synth
