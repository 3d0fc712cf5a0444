#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace railscope {

/// Fixed-capacity overwrite-oldest ring. Models the pre-trigger buffer: the
/// sampler pushes every completed block, and once full each push evicts
/// exactly the oldest entry.
template <typename T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity) : slots_(capacity)
    {
        if (capacity == 0) throw std::invalid_argument("ring buffer capacity must be > 0");
    }

    /// Returns the evicted element, if any.
    std::optional<T> push(T value)
    {
        std::optional<T> evicted;
        if (size_ == slots_.size()) {
            evicted = std::move(slots_[write_]);
        } else {
            ++size_;
        }
        slots_[write_] = std::move(value);
        write_ = (write_ + 1) % slots_.size();
        return evicted;
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return slots_.size(); }
    [[nodiscard]] bool full() const noexcept { return size_ == slots_.size(); }

    /// i = 0 is the oldest element.
    [[nodiscard]] const T& operator[](std::size_t i) const
    {
        return slots_[(oldest() + i) % slots_.size()];
    }

    /// Moves all elements out, oldest first, leaving the ring empty.
    std::vector<T> drain()
    {
        std::vector<T> out;
        out.reserve(size_);
        const std::size_t start = oldest();
        for (std::size_t i = 0; i < size_; ++i) {
            out.push_back(std::move(slots_[(start + i) % slots_.size()]));
        }
        size_ = 0;
        write_ = 0;
        return out;
    }

private:
    [[nodiscard]] std::size_t oldest() const noexcept
    {
        return (write_ + slots_.size() - size_) % slots_.size();
    }

    std::vector<T> slots_;
    std::size_t write_ = 0;
    std::size_t size_ = 0;
};

}  // namespace railscope
