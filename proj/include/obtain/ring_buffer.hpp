#pragma once

#include <cstdint>
#include <vector>

namespace obtain {

/// Fixed-capacity ring addressed by the global (monotone) sample index.
/// Reads before the stream start, or older than the retained window,
/// return zero; the scoring recursions treat missing history as silence.
template <typename T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity) : data_(capacity, T{}) {}

    void push(T value) {
        data_[static_cast<std::size_t>(head_ % capacity())] = value;
        ++head_;
    }

    /// Value at global index i, or zero when i is outside the retained range.
    T at_or_zero(std::int64_t i) const {
        if (i < 0 || i >= head_ || head_ - i > static_cast<std::int64_t>(capacity())) {
            return T{};
        }
        return data_[static_cast<std::size_t>(i % capacity())];
    }

    /// Number of values pushed so far; valid indices are
    /// [head() - capacity(), head()).
    std::int64_t head() const noexcept { return head_; }
    std::size_t capacity() const noexcept { return data_.size(); }

private:
    std::vector<T> data_;
    std::int64_t head_ = 0;
};

} // namespace obtain
