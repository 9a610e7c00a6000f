#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "obtain/audio.hpp"
#include "obtain/errors.hpp"

namespace obtain {

namespace wav_detail {

inline std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t off) {
    if (off + 4 > bytes.size()) {
        throw DecodeError("truncated WAV data", off);
    }
    return static_cast<std::uint32_t>(bytes[off]) |
           static_cast<std::uint32_t>(bytes[off + 1]) << 8 |
           static_cast<std::uint32_t>(bytes[off + 2]) << 16 |
           static_cast<std::uint32_t>(bytes[off + 3]) << 24;
}

inline std::uint16_t read_u16(std::span<const std::uint8_t> bytes, std::size_t off) {
    if (off + 2 > bytes.size()) {
        throw DecodeError("truncated WAV data", off);
    }
    return static_cast<std::uint16_t>(bytes[off] |
                                      static_cast<std::uint16_t>(bytes[off + 1]) << 8);
}

inline bool tag_is(std::span<const std::uint8_t> bytes, std::size_t off, const char* tag) {
    return off + 4 <= bytes.size() && std::memcmp(bytes.data() + off, tag, 4) == 0;
}

} // namespace wav_detail

/// Decode a RIFF/WAVE container: PCM 16-bit or IEEE float 32-bit, mono or
/// stereo. Stereo is downmixed by channel mean; rates other than 44100 Hz
/// are linearly resampled. Integer samples are scaled by 1/32768.
inline AudioStream decode_wav(std::span<const std::uint8_t> bytes) {
    using namespace wav_detail;

    if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF")) {
        throw DecodeError("missing RIFF header", 0);
    }
    if (!tag_is(bytes, 8, "WAVE")) {
        throw DecodeError("RIFF form is not WAVE", 8);
    }

    std::uint16_t format_tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;

    std::size_t data_off = 0;
    std::size_t data_len = 0;
    bool have_data = false;

    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const std::size_t chunk_len = read_u32(bytes, off + 4);
        const std::size_t body = off + 8;
        if (body + chunk_len > bytes.size()) {
            throw DecodeError("chunk extends past end of file", off);
        }
        if (tag_is(bytes, off, "fmt ")) {
            if (chunk_len < 16) {
                throw DecodeError("fmt chunk too short", off);
            }
            format_tag = read_u16(bytes, body);
            channels = read_u16(bytes, body + 2);
            rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            have_fmt = true;
        } else if (tag_is(bytes, off, "data")) {
            data_off = body;
            data_len = chunk_len;
            have_data = true;
        }
        off = body + chunk_len + (chunk_len & 1); // chunks are word-aligned
    }

    if (!have_fmt) {
        throw DecodeError("no fmt chunk", off);
    }
    if (!have_data) {
        throw DecodeError("no data chunk", off);
    }

    const bool pcm16 = format_tag == 1 && bits == 16;
    const bool float32 = format_tag == 3 && bits == 32;
    if (!pcm16 && !float32) {
        throw UnsupportedFormatError("unsupported WAV codec: format tag " +
                                     std::to_string(format_tag) + ", " +
                                     std::to_string(bits) + " bits");
    }
    if (channels < 1 || channels > 2) {
        throw UnsupportedFormatError("unsupported channel count: " +
                                     std::to_string(channels));
    }
    if (rate == 0) {
        throw DecodeError("zero sample rate", data_off);
    }

    const std::size_t bytes_per_sample = bits / 8u;
    const std::size_t stride = bytes_per_sample * channels;
    const std::size_t n_frames = data_len / stride;

    std::vector<double> mono(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const std::size_t p = data_off + i * stride + c * bytes_per_sample;
            if (pcm16) {
                const auto raw = static_cast<std::int16_t>(read_u16(bytes, p));
                acc += static_cast<double>(raw) / 32768.0;
            } else {
                const std::uint32_t raw = read_u32(bytes, p);
                acc += static_cast<double>(std::bit_cast<float>(raw));
            }
        }
        mono[i] = std::clamp(acc / channels, -1.0, 1.0);
    }

    AudioStream stream;
    stream.sample_rate = kPipelineRate;
    stream.samples = rate == kPipelineRate
                         ? std::move(mono)
                         : resample_linear(mono, static_cast<int>(rate), kPipelineRate);
    return stream;
}

inline AudioStream decode_wav_file(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw InputError("cannot open file: " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                    std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

/// Serialize a stream as 16-bit PCM WAV. Used by the tests and by tooling
/// that generates fixture audio.
inline std::vector<std::uint8_t> encode_wav16(const AudioStream& stream) {
    const std::size_t n = stream.samples.size();
    const std::uint32_t data_len = static_cast<std::uint32_t>(n * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);

    auto put_u32 = [&out](std::uint32_t v) {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        out.push_back(static_cast<std::uint8_t>(v >> 24));
    };
    auto put_u16 = [&out](std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    auto put_tag = [&out](const char* tag) {
        out.insert(out.end(), tag, tag + 4);
    };

    put_tag("RIFF");
    put_u32(36 + data_len);
    put_tag("WAVE");
    put_tag("fmt ");
    put_u32(16);
    put_u16(1); // PCM
    put_u16(1); // mono
    put_u32(static_cast<std::uint32_t>(stream.sample_rate));
    put_u32(static_cast<std::uint32_t>(stream.sample_rate) * 2);
    put_u16(2);
    put_u16(16);
    put_tag("data");
    put_u32(data_len);
    for (double s : stream.samples) {
        const double clamped = std::clamp(s, -1.0, 1.0);
        const auto q = static_cast<int>(
            std::clamp<long>(std::lround(clamped * 32768.0), -32768, 32767));
        put_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

inline void write_wav16_file(const std::string& path, const AudioStream& stream) {
    const auto bytes = encode_wav16(stream);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw InputError("cannot open file for writing: " + path);
    }
    file.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
}

} // namespace obtain
