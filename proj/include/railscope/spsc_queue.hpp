#pragma once

#include <atomic>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace railscope {

/// Bounded single-producer/single-consumer queue. Indices are monotonically
/// increasing counters; blocking uses C++20 atomic wait/notify.
template <typename T>
class SpscQueue {
public:
    explicit SpscQueue(std::size_t capacity) : slots_(capacity)
    {
        if (capacity == 0) throw std::invalid_argument("queue capacity must be > 0");
    }

    SpscQueue(const SpscQueue&) = delete;
    SpscQueue& operator=(const SpscQueue&) = delete;

    /// Producer side. Blocks while the queue is full.
    void push(T value)
    {
        const std::size_t tail = tail_.load(std::memory_order_relaxed);
        for (;;) {
            const std::size_t head = head_.load(std::memory_order_acquire);
            if (tail - head < slots_.size()) break;
            head_.wait(head, std::memory_order_acquire);
        }
        slots_[tail % slots_.size()] = std::move(value);
        tail_.store(tail + 1, std::memory_order_release);
        tail_.notify_one();
    }

    /// Consumer side. Blocks while the queue is empty.
    T pop()
    {
        const std::size_t head = head_.load(std::memory_order_relaxed);
        for (;;) {
            const std::size_t tail = tail_.load(std::memory_order_acquire);
            if (tail != head) break;
            tail_.wait(tail, std::memory_order_acquire);
        }
        T value = std::move(*slots_[head % slots_.size()]);
        slots_[head % slots_.size()].reset();
        head_.store(head + 1, std::memory_order_release);
        head_.notify_one();
        return value;
    }

private:
    std::vector<std::optional<T>> slots_;
    std::atomic<std::size_t> head_{0};
    std::atomic<std::size_t> tail_{0};
};

}  // namespace railscope
