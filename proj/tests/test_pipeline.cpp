#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

#include "obtain/pipeline.hpp"
#include "synth.hpp"

using namespace obtain;

namespace {

std::vector<double> event_times(const std::vector<BeatEvent>& events) {
    std::vector<double> t;
    t.reserve(events.size());
    for (const auto& e : events) {
        t.push_back(e.time_sec);
    }
    return t;
}

double median_interval(const std::vector<double>& times, double from_sec) {
    std::vector<double> intervals;
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i - 1] >= from_sec) {
            intervals.push_back(times[i] - times[i - 1]);
        }
    }
    REQUIRE_FALSE(intervals.empty());
    std::sort(intervals.begin(), intervals.end());
    return intervals[intervals.size() / 2];
}

} // namespace

TEST_CASE("silence produces no beat events") {
    AudioStream silence;
    silence.samples.assign(44100 * 10, 0.0);
    const auto result = run_stream_samples(silence, PipelineConfig{});
    REQUIRE(result.events.empty());
}

TEST_CASE("a stream shorter than one window produces nothing") {
    AudioStream tiny;
    tiny.samples.assign(700, 0.1);
    const auto result = run_stream_samples(tiny, PipelineConfig{});
    REQUIRE(result.events.empty());
}

TEST_CASE("120 BPM click track is tracked at half-second intervals") {
    const auto click = synth::click_track(120.0, 20.0);
    const auto result = run_stream_samples(click, PipelineConfig{}, true);

    REQUIRE(result.events.size() >= 20);
    const auto times = event_times(result.events);
    REQUIRE(median_interval(times, 5.0) == Catch::Approx(0.5).margin(0.03));

    SECTION("every event is causal") {
        for (const auto& event : result.events) {
            REQUIRE(event.time_sec <= click.duration_sec());
        }
    }
    SECTION("debug traces cover every processed frame") {
        REQUIRE_FALSE(result.traces.oss.empty());
        REQUIRE(result.traces.oss.size() == result.traces.cbss.size());
        REQUIRE_FALSE(result.traces.tempo.empty());
        // Adopted tempo settles near 120 BPM.
        const auto& last = result.traces.tempo.back();
        REQUIRE(last.adopted_bpm == Catch::Approx(120.0).margin(2.0));
    }
}

TEST_CASE("identical input and seed give identical event streams") {
    const auto click = synth::click_track(97.0, 12.0);
    const auto a = run_stream_samples(click, PipelineConfig{});
    const auto b = run_stream_samples(click, PipelineConfig{});
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        REQUIRE(a.events[i].frame_index == b.events[i].frame_index);
        REQUIRE(a.events[i].source == b.events[i].source);
    }
}

TEST_CASE("process_hop validates its chunk size") {
    Pipeline pipeline(PipelineConfig{});
    std::vector<double> wrong(100, 0.0);
    REQUIRE_THROWS_AS(pipeline.process_hop(wrong), InputError);
}

TEST_CASE("invalid pipeline configs are rejected") {
    PipelineConfig bad;
    bad.frame.window_len = 1000; // not a power of two
    REQUIRE_THROWS_AS(Pipeline{bad}, InputError);
}

TEST_CASE("raw PCM streaming matches file-mode results") {
    const auto click = synth::click_track(120.0, 12.0);

    // Serialize as s16le mono.
    std::string pcm;
    pcm.reserve(click.samples.size() * 2);
    for (double s : click.samples) {
        const auto q = static_cast<std::int16_t>(
            std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
        pcm.push_back(static_cast<char>(q & 0xff));
        pcm.push_back(static_cast<char>((q >> 8) & 0xff));
    }
    std::istringstream in(pcm, std::ios::binary);

    std::vector<BeatEvent> streamed;
    const int status = run_stream(
        in, 44100, 1,
        [&](const BeatEvent& e) {
            streamed.push_back(e);
            return true;
        },
        PipelineConfig{});
    REQUIRE(status == 0);

    // File mode on the quantized samples gives the same events.
    const auto decoded = decode_wav(encode_wav16(click));
    const auto direct = run_stream_samples(decoded, PipelineConfig{});
    REQUIRE(streamed.size() == direct.events.size());
    for (std::size_t i = 0; i < streamed.size(); ++i) {
        REQUIRE(streamed[i].frame_index == direct.events[i].frame_index);
    }
    REQUIRE_FALSE(streamed.empty());
}

TEST_CASE("latency stats are populated") {
    const auto click = synth::click_track(120.0, 5.0);
    const auto result = run_stream_samples(click, PipelineConfig{});
    REQUIRE(result.latency.hops > 1000);
    REQUIRE(result.latency.budget_ms == Catch::Approx(1000.0 * 128.0 / 44100.0));
    REQUIRE(result.latency.p99_ms > 0.0);
    REQUIRE(result.latency.max_ms >= result.latency.p99_ms);
}

TEST_CASE("trace CSV formats") {
    DebugTraces traces;
    traces.oss.push_back({3, 0.00870748299, 0.5, 0.25});
    traces.cbss.push_back({3, 0.00870748299, 0.25, 0.125});
    traces.tempo.push_back({2.97, 120.2, 120.0, 120.0});

    const auto oss_csv = format_oss_csv(traces.oss);
    REQUIRE(oss_csv.find("frame_index,time_sec,flux,oss\n") == 0);
    REQUIRE(oss_csv.find("3,0.00870748299,0.5,0.25\n") != std::string::npos);

    const auto tempo_csv = format_tempo_csv(traces.tempo);
    REQUIRE(tempo_csv.find("time_sec,instant_bpm,accumulated_bpm,adopted_bpm\n") == 0);
    REQUIRE(tempo_csv.find("2.97,120.2,120,120\n") != std::string::npos);
}
