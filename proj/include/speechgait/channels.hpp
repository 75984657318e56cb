#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace speechgait {

/// Bounded multi-producer queue (Vyukov's per-cell sequence scheme). Push
/// and pop never block: push fails when full, pop returns nullopt when
/// empty. The control loop is the single consumer.
template <typename T>
class BoundedQueue {
public:
  explicit BoundedQueue(std::size_t capacity) : mask_(round_up(capacity) - 1), cells_(mask_ + 1) {
    for (std::size_t i = 0; i < cells_.size(); ++i)
      cells_[i].sequence.store(i, std::memory_order_relaxed);
  }

  BoundedQueue(const BoundedQueue&) = delete;
  BoundedQueue& operator=(const BoundedQueue&) = delete;

  std::size_t capacity() const noexcept { return cells_.size(); }

  bool try_push(T value) {
    std::size_t pos = tail_.load(std::memory_order_relaxed);
    for (;;) {
      Cell& cell = cells_[pos & mask_];
      const std::size_t seq = cell.sequence.load(std::memory_order_acquire);
      const auto diff = static_cast<std::intptr_t>(seq) - static_cast<std::intptr_t>(pos);
      if (diff == 0) {
        if (tail_.compare_exchange_weak(pos, pos + 1, std::memory_order_relaxed)) {
          cell.value = std::move(value);
          cell.sequence.store(pos + 1, std::memory_order_release);
          return true;
        }
      } else if (diff < 0) {
        rejected_.fetch_add(1, std::memory_order_relaxed);
        return false;
      } else {
        pos = tail_.load(std::memory_order_relaxed);
      }
    }
  }

  std::optional<T> try_pop() {
    std::size_t pos = head_.load(std::memory_order_relaxed);
    for (;;) {
      Cell& cell = cells_[pos & mask_];
      const std::size_t seq = cell.sequence.load(std::memory_order_acquire);
      const auto diff = static_cast<std::intptr_t>(seq) - static_cast<std::intptr_t>(pos + 1);
      if (diff == 0) {
        if (head_.compare_exchange_weak(pos, pos + 1, std::memory_order_relaxed)) {
          std::optional<T> out(std::move(cell.value));
          cell.sequence.store(pos + mask_ + 1, std::memory_order_release);
          return out;
        }
      } else if (diff < 0) {
        return std::nullopt;
      } else {
        pos = head_.load(std::memory_order_relaxed);
      }
    }
  }

  /// Pushes refused because the queue was full.
  std::uint64_t rejected() const noexcept { return rejected_.load(std::memory_order_relaxed); }

private:
  struct Cell {
    std::atomic<std::size_t> sequence{0};
    T value{};
  };

  static std::size_t round_up(std::size_t n) {
    if (n < 2)
      throw std::invalid_argument("queue capacity must be at least 2");
    std::size_t p = 1;
    while (p < n)
      p <<= 1;
    return p;
  }

  const std::size_t mask_;
  std::vector<Cell> cells_;
  alignas(64) std::atomic<std::size_t> head_{0};
  alignas(64) std::atomic<std::size_t> tail_{0};
  std::atomic<std::uint64_t> rejected_{0};
};

/// Single-producer fan-out of values to any number of subscribers. The
/// producer never waits: a subscriber whose mailbox is busy or full loses
/// samples (oldest first), and the loss is counted.
template <typename T>
class Broadcast {
public:
  class Subscription {
  public:
    /// Removes and returns everything queued so far.
    std::vector<T> drain() {
      std::lock_guard lock(mutex_);
      std::vector<T> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
      items_.clear();
      return out;
    }

    std::optional<T> pop() {
      std::lock_guard lock(mutex_);
      if (items_.empty())
        return std::nullopt;
      T front = std::move(items_.front());
      items_.pop_front();
      return front;
    }

    std::uint64_t dropped() const noexcept { return dropped_.load(std::memory_order_relaxed); }

  private:
    friend class Broadcast;
    explicit Subscription(std::size_t depth) : depth_(depth) {}

    void offer(const T& value) {
      std::unique_lock lock(mutex_, std::try_to_lock);
      if (!lock.owns_lock()) {
        dropped_.fetch_add(1, std::memory_order_relaxed);
        return;
      }
      if (items_.size() >= depth_) {
        items_.pop_front();
        dropped_.fetch_add(1, std::memory_order_relaxed);
      }
      items_.push_back(value);
    }

    const std::size_t depth_;
    std::mutex mutex_;
    std::deque<T> items_;
    std::atomic<std::uint64_t> dropped_{0};
  };

  explicit Broadcast(std::size_t depth = 64) : depth_(std::max<std::size_t>(depth, 1)) {}

  std::shared_ptr<Subscription> subscribe() {
    auto sub = std::shared_ptr<Subscription>(new Subscription(depth_));
    std::lock_guard lock(registry_);
    pending_.push_back(sub);
    return sub;
  }

  /// Producer side. Expired subscriptions are pruned here.
  void publish(const T& value) {
    {
      std::unique_lock lock(registry_, std::try_to_lock);
      if (lock.owns_lock()) {
        for (auto& sub : pending_)
          active_.push_back(std::move(sub));
        pending_.clear();
      }
    }
    bool expired = false;
    for (auto& weak : active_) {
      if (auto sub = weak.lock())
        sub->offer(value);
      else
        expired = true;
    }
    if (expired)
      std::erase_if(active_, [](const std::weak_ptr<Subscription>& w) { return w.expired(); });
  }

  std::size_t subscribers() const noexcept { return active_.size(); }

private:
  const std::size_t depth_;
  std::mutex registry_;
  std::vector<std::weak_ptr<Subscription>> pending_;
  std::vector<std::weak_ptr<Subscription>> active_; ///< producer-owned
};

} // namespace speechgait
