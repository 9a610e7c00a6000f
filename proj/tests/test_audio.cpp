#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <cstring>

#include "obtain/audio.hpp"
#include "obtain/fft.hpp"
#include "obtain/wav.hpp"
#include "synth.hpp"

using namespace obtain;

namespace {

AudioStream silence(double sec, int rate = kPipelineRate) {
    AudioStream s;
    s.sample_rate = rate;
    s.samples.assign(static_cast<std::size_t>(sec * rate), 0.0);
    return s;
}

/// Dominant frequency via a zero-padded 65536-point FFT.
double dominant_frequency(const AudioStream& stream) {
    const std::size_t n = 65536;
    std::vector<std::complex<double>> buf(n, {0.0, 0.0});
    for (std::size_t i = 0; i < std::min(stream.samples.size(), n); ++i) {
        buf[i] = stream.samples[i];
    }
    fft_inplace(buf);
    std::size_t argmax = 1;
    for (std::size_t k = 1; k < n / 2; ++k) {
        if (std::abs(buf[k]) > std::abs(buf[argmax])) {
            argmax = k;
        }
    }
    return static_cast<double>(argmax) * stream.sample_rate / static_cast<double>(n);
}

} // namespace

TEST_CASE("decode_wav: digital silence decodes to zeros") {
    const auto bytes = encode_wav16(silence(1.0));
    const auto decoded = decode_wav(bytes);
    REQUIRE(decoded.sample_rate == 44100);
    REQUIRE(decoded.samples.size() == 44100);
    for (double s : decoded.samples) {
        REQUIRE(s == 0.0);
    }
}

TEST_CASE("decode_wav: full-scale 16-bit sample maps to 32767/32768") {
    AudioStream one;
    one.samples = {32767.0 / 32767.0}; // quantizes to 32767
    const auto bytes = encode_wav16(one);
    const auto decoded = decode_wav(bytes);
    REQUIRE(decoded.samples.size() == 1);
    REQUIRE(decoded.samples[0] == Catch::Approx(32767.0 / 32768.0).epsilon(1e-12));
}

TEST_CASE("decode_wav: 22050 Hz sine resamples to 44100 with pitch preserved") {
    const auto src = synth::sine(440.0, 1.0, 22050);
    const auto bytes = encode_wav16(src);
    const auto decoded = decode_wav(bytes);
    REQUIRE(decoded.sample_rate == 44100);
    REQUIRE(decoded.samples.size() >= 44000);
    REQUIRE(dominant_frequency(decoded) == Catch::Approx(440.0).margin(1.0));
}

TEST_CASE("decode_wav: stereo downmix is the channel mean") {
    // Hand-built stereo WAV: L = 16384, R = -16384 -> mean 0.
    AudioStream left;
    left.samples = {0.5, 0.5};
    auto bytes = encode_wav16(left);
    bytes[22] = 2; // channels
    // Rebuild the data chunk as interleaved L/R.
    std::vector<std::uint8_t> stereo(bytes.begin(), bytes.begin() + 44);
    stereo[22] = 2;
    auto put16 = [&stereo](std::int16_t v) {
        stereo.push_back(static_cast<std::uint8_t>(v & 0xff));
        stereo.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    };
    put16(16384);
    put16(-16384);
    put16(8192);
    put16(8192);
    stereo[40] = 8; // data length
    stereo[41] = stereo[42] = stereo[43] = 0;
    const std::uint32_t riff_len = static_cast<std::uint32_t>(stereo.size()) - 8;
    std::memcpy(&stereo[4], &riff_len, 4);

    const auto decoded = decode_wav(stereo);
    REQUIRE(decoded.samples.size() == 2);
    REQUIRE(decoded.samples[0] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(decoded.samples[1] == Catch::Approx(0.25).margin(1e-4));
}

TEST_CASE("decode_wav: malformed and unsupported inputs") {
    SECTION("missing RIFF magic reports the byte offset") {
        std::vector<std::uint8_t> junk = {'J', 'U', 'N', 'K', 0, 0, 0, 0};
        try {
            decode_wav(junk);
            FAIL("expected DecodeError");
        } catch (const DecodeError& e) {
            REQUIRE(e.byte_offset() == 0);
        }
    }
    SECTION("unsupported codec names the format tag") {
        auto bytes = encode_wav16(silence(0.01));
        bytes[20] = 85; // MP3 format tag
        try {
            decode_wav(bytes);
            FAIL("expected UnsupportedFormatError");
        } catch (const UnsupportedFormatError& e) {
            REQUIRE(std::string(e.what()).find("85") != std::string::npos);
        }
    }
    SECTION("truncated data chunk") {
        auto bytes = encode_wav16(silence(0.01));
        bytes.resize(bytes.size() / 2);
        bytes[40] = static_cast<std::uint8_t>(0xff); // data length now lies
        REQUIRE_THROWS_AS(decode_wav(bytes), DecodeError);
    }
}

TEST_CASE("decode_wav is deterministic") {
    const auto bytes = encode_wav16(synth::click_track(120.0, 0.5));
    const auto a = decode_wav(bytes);
    const auto b = decode_wav(bytes);
    REQUIRE(a.samples == b.samples);
}

TEST_CASE("WAV round-trip is exact to 1 LSB") {
    auto stream = synth::sine(440.0, 0.05, 44100, 0.9);
    const auto decoded = decode_wav(encode_wav16(stream));
    REQUIRE(decoded.samples.size() == stream.samples.size());
    for (std::size_t i = 0; i < stream.samples.size(); ++i) {
        REQUIRE(std::abs(decoded.samples[i] - stream.samples[i]) <= 1.0 / 32768.0);
    }
}

TEST_CASE("frame_count matches the closed form") {
    const FrameConfig cfg;
    REQUIRE(frame_count(1024, cfg) == 1);
    REQUIRE(frame_count(1152, cfg) == 2);
    REQUIRE(frame_count(44100, cfg) == 337);
    REQUIRE(frame_count(1023, cfg) == 0);
    REQUIRE(frame_count(0, cfg) == 0);
}

TEST_CASE("frames are stride-hop views of the input") {
    AudioStream stream;
    stream.samples.resize(1152);
    for (std::size_t i = 0; i < stream.samples.size(); ++i) {
        stream.samples[i] = static_cast<double>(i);
    }
    const FrameConfig cfg;
    const auto frames = frame_stream(stream, cfg);
    REQUIRE(frames.size() == 2);
    REQUIRE(frames[0][0] == 0.0);
    REQUIRE(frames[1][0] == 128.0); // second frame starts at sample 128
    for (std::size_t i = 0; i < 1024; ++i) {
        REQUIRE(frames[1][i] == static_cast<double>(128 + i));
    }
}

TEST_CASE("streaming resampler matches the whole-buffer resampler") {
    const auto src = synth::sine(440.0, 0.2, 22050);
    const auto whole = resample_linear(src.samples, 22050, 44100);

    StreamingResampler rs(22050, 44100);
    std::vector<double> streamed;
    std::size_t pos = 0;
    while (pos < src.samples.size()) {
        const std::size_t chunk = std::min<std::size_t>(137, src.samples.size() - pos);
        rs.push(std::span<const double>(src.samples).subspan(pos, chunk), streamed);
        pos += chunk;
    }
    REQUIRE(streamed.size() >= whole.size());
    for (std::size_t i = 0; i < whole.size(); ++i) {
        REQUIRE(streamed[i] == Catch::Approx(whole[i]).margin(1e-12));
    }
}
