#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "obtain/audio.hpp"
#include "obtain/onset.hpp"
#include "obtain/tempo.hpp"
#include "synth.hpp"

using namespace obtain;

namespace {

constexpr double kOssRate = 44100.0 / 128.0; // 344.53125

/// Impulse train of the given period, n samples long.
std::vector<double> impulse_train(int period, std::size_t n, double height = 1.0) {
    std::vector<double> v(n, 0.0);
    for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(period)) {
        v[i] = height;
    }
    return v;
}

/// OSS stream of a click track, via the real extraction chain.
std::vector<std::pair<double, double>> click_oss(double bpm, double seconds) {
    const FrameConfig frame_cfg;
    OnsetExtractor chain(frame_cfg, CompressionConfig{},
                         SmootherConfig::normalized_hamming());
    const auto audio = synth::click_track(bpm, seconds);
    std::vector<std::pair<double, double>> oss;
    for (const auto& frame : frame_stream(audio, frame_cfg)) {
        const auto s = chain.process_frame(frame);
        oss.emplace_back(s.time_sec, s.value);
    }
    return oss;
}

} // namespace

TEST_CASE("autocorrelation") {
    SECTION("constant input has zero ACF after mean removal") {
        const std::vector<double> buf(1024, 2.5);
        const auto acf = autocorrelation(buf);
        for (double v : acf) {
            REQUIRE(v == 0.0);
        }
    }
    SECTION("ACF[0] is 1 for non-constant input") {
        const auto buf = impulse_train(100, 1024);
        const auto acf = autocorrelation(buf);
        REQUIRE(acf[0] == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("impulse train yields local maxima at multiples of the period") {
        const int period = 100;
        const auto acf = autocorrelation(impulse_train(period, 1024));
        for (int lag : {period, 2 * period, 3 * period}) {
            const auto l = static_cast<std::size_t>(lag);
            REQUIRE(acf[l] > acf[l - 1]);
            REQUIRE(acf[l] > acf[l + 1]);
        }
    }
}

TEST_CASE("enhance_harmonics") {
    SECTION("zero in, zero out") {
        const auto eacf = enhance_harmonics(std::vector<double>(512, 0.0));
        for (double v : eacf) {
            REQUIRE(v == 0.0);
        }
    }
    SECTION("a single nonzero lag spreads to its subharmonics") {
        std::vector<double> acf(512, 0.0);
        acf[100] = 1.0;
        const auto eacf = enhance_harmonics(acf);
        REQUIRE(eacf[100] == 1.0);
        REQUIRE(eacf[50] == 1.0);
        REQUIRE(eacf[25] == 1.0);
        REQUIRE(eacf[75] == 0.0);
    }
    SECTION("EACF dominates a non-negative ACF pointwise") {
        std::vector<double> acf(512);
        for (std::size_t i = 0; i < acf.size(); ++i) {
            acf[i] = 0.5 + 0.5 * std::cos(static_cast<double>(i) / 7.0);
        }
        const auto eacf = enhance_harmonics(acf);
        for (std::size_t i = 0; i < acf.size(); ++i) {
            REQUIRE(eacf[i] >= acf[i]);
        }
    }
}

TEST_CASE("pick_candidates") {
    const TempoConfig cfg;

    SECTION("lag bounds at the defaults are [98, 413]") {
        const auto [lo, hi] = tempo_lag_bounds(cfg, kOssRate);
        REQUIRE(lo == 98);
        REQUIRE(hi == 413);
    }
    SECTION("all-zero EACF yields no candidates") {
        REQUIRE(pick_candidates(std::vector<double>(512, 0.0), cfg, kOssRate).empty());
    }
    SECTION("120 BPM impulse train puts the top candidate near lag 172") {
        // 60/120 * 344.53 = 172.27
        const auto buf = impulse_train(172, 1024);
        const auto eacf = enhance_harmonics(autocorrelation(buf));
        const auto candidates = pick_candidates(eacf, cfg, kOssRate);
        REQUIRE_FALSE(candidates.empty());
        REQUIRE(std::abs(candidates.front().lag - 172) <= 1);
    }
    SECTION("at most n_candidates survive, sorted by EACF") {
        std::vector<double> eacf(512, 0.0);
        for (int lag = 100; lag <= 400; lag += 20) {
            eacf[static_cast<std::size_t>(lag)] = 1.0 + lag / 1000.0;
        }
        const auto candidates = pick_candidates(eacf, cfg, kOssRate);
        REQUIRE(candidates.size() == 10);
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            REQUIRE(candidates[i - 1].eacf >= candidates[i].eacf);
        }
    }
}

TEST_CASE("score_candidates") {
    SECTION("a single candidate always wins") {
        const std::vector<double> buf(1024, 0.0);
        const std::vector<TempoCandidate> one = {{200, 1.0}};
        REQUIRE(score_candidates(buf, one, kOssRate) ==
                Catch::Approx(60.0 * kOssRate / 200.0));
    }
    SECTION("the true period beats a mistuned rival") {
        const int period = 140;
        const auto buf = impulse_train(period, 1024);
        const std::vector<TempoCandidate> candidates = {
            {static_cast<int>(period * 1.3), 1.0}, {period, 1.0}};
        const double bpm = score_candidates(buf, candidates, kOssRate);
        REQUIRE(bpm == Catch::Approx(60.0 * kOssRate / period).epsilon(1e-9));
    }
    SECTION("all-zero buffer breaks ties toward the larger EACF value") {
        const std::vector<double> buf(1024, 0.0);
        const std::vector<TempoCandidate> candidates = {{150, 0.4}, {200, 0.9}};
        REQUIRE(score_candidates(buf, candidates, kOssRate) ==
                Catch::Approx(60.0 * kOssRate / 200.0));
    }
}

TEST_CASE("accumulate_and_decide") {
    // Wider BPM range so the 240-BPM harmonic case is representable.
    TempoConfig cfg;
    cfg.min_bpm = 40.0;
    cfg.max_bpm = 300.0;

    auto seeded_state = [&](double bpm) {
        TempoState state;
        for (int i = 0; i < 10; ++i) {
            state.history.emplace_back(8.0 + 0.1 * i, bpm);
        }
        state.current_bpm = bpm;
        state.current_period = static_cast<int>(std::lround(60.0 / bpm * kOssRate));
        state.has_estimate = true;
        return state;
    };

    SECTION("a harmonic of the history mean is suppressed") {
        auto state = seeded_state(120.0);
        const auto [bpm, period] = accumulate_and_decide(240.0, state, cfg, 10.0, kOssRate);
        REQUIRE(bpm == Catch::Approx(120.0));
        REQUIRE(period == 172);
    }
    SECTION("small deviations are adopted immediately") {
        auto state = seeded_state(120.0);
        const auto [bpm, period] = accumulate_and_decide(123.0, state, cfg, 10.0, kOssRate);
        REQUIRE(bpm == Catch::Approx(123.0));
        REQUIRE(period == 168);
    }
    SECTION("a genuine change is adopted only after persisting one second") {
        auto state = seeded_state(120.0);
        double t = 10.0;
        auto r1 = accumulate_and_decide(97.0, state, cfg, t, kOssRate);
        REQUIRE(r1.first == Catch::Approx(120.0)); // pending, not yet adopted
        t += 0.4;
        auto r2 = accumulate_and_decide(97.0, state, cfg, t, kOssRate);
        REQUIRE(r2.first == Catch::Approx(120.0));
        t += 0.7; // 1.1 s since first seen
        auto r3 = accumulate_and_decide(97.0, state, cfg, t, kOssRate);
        REQUIRE(r3.first == Catch::Approx(97.0));
    }
    SECTION("during the first history window the accumulator rules") {
        TempoState state;
        const auto [bpm, period] =
            accumulate_and_decide(133.0, state, cfg, 3.0, kOssRate);
        REQUIRE(bpm == Catch::Approx(133.0));
        REQUIRE(period == static_cast<int>(std::lround(60.0 / 133.0 * kOssRate)));
    }
}

TEST_CASE("TempoEstimator converges on synthetic click tracks") {
    const double bpm_target = GENERATE(90.0, 120.0);
    TempoConfig cfg;
    TempoEstimator estimator(cfg, kOssRate);

    double adopted = 0.0;
    for (const auto& [t, v] : click_oss(bpm_target, 8.0)) {
        const auto est = estimator.push(v, t);
        if (est && t >= 6.0) {
            adopted = est->bpm;
            REQUIRE(std::abs(adopted - bpm_target) <= 2.0);
        }
    }
    REQUIRE(adopted != 0.0); // estimates actually happened after 6 s
}

TEST_CASE("tempo trajectory is deterministic") {
    TempoConfig cfg;
    const auto oss = click_oss(120.0, 6.0);
    std::vector<double> run1;
    std::vector<double> run2;
    for (auto* out : {&run1, &run2}) {
        TempoEstimator estimator(cfg, kOssRate);
        for (const auto& [t, v] : oss) {
            if (auto est = estimator.push(v, t)) {
                out->push_back(est->bpm);
            }
        }
    }
    REQUIRE(run1 == run2);
}
