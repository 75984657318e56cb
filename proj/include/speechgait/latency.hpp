#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "speechgait/config.hpp"

namespace speechgait {

/// Defers command delivery by a seeded uniform draw in [min_ms, max_ms],
/// quantized up to whole control ticks. Disabled, an item is due on the tick
/// it arrives. Arrival order is preserved unless allow_reorder is set.
template <typename T>
class LatencyLine {
public:
  LatencyLine(const LatencyConfig& config, double dt)
      : config_(config), tick_ms_(dt * 1000.0), rng_(config.seed) {}

  /// Returns the tick at which `item` becomes deliverable.
  std::int64_t schedule(T item, std::int64_t now_tick) {
    std::int64_t due = now_tick;
    if (config_.enabled) {
      std::uniform_int_distribution<int> draw(config_.min_ms, config_.max_ms);
      last_delay_ms_ = draw(rng_);
      due += delay_ticks(last_delay_ms_);
    }
    if (!config_.allow_reorder)
      due = std::max(due, last_due_);
    last_due_ = due;
    pending_.push_back({due, next_order_++, std::move(item)});
    return due;
  }

  /// Removes the items due at or before `now_tick`, in delivery order.
  std::vector<T> release(std::int64_t now_tick) {
    std::stable_sort(pending_.begin(), pending_.end(), [](const Pending& a, const Pending& b) {
      return a.due != b.due ? a.due < b.due : a.order < b.order;
    });
    std::vector<T> out;
    auto it = pending_.begin();
    while (it != pending_.end() && it->due <= now_tick) {
      out.push_back(std::move(it->item));
      ++it;
    }
    pending_.erase(pending_.begin(), it);
    return out;
  }

  std::size_t pending() const noexcept { return pending_.size(); }
  int last_delay_ms() const noexcept { return last_delay_ms_; }

  std::int64_t delay_ticks(int delay_ms) const {
    return static_cast<std::int64_t>(std::ceil(static_cast<double>(delay_ms) / tick_ms_ - 1e-9));
  }

private:
  struct Pending {
    std::int64_t due;
    std::uint64_t order;
    T item;
  };

  LatencyConfig config_;
  double tick_ms_;
  std::mt19937_64 rng_;
  std::vector<Pending> pending_;
  std::int64_t last_due_ = 0;
  std::uint64_t next_order_ = 0;
  int last_delay_ms_ = 0;
};

} // namespace speechgait
