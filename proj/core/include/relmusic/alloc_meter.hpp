// SPDX-License-Identifier: Apache-2.0
//
// Byte accounting for tensor buffers. A MeterRegion makes a meter active on
// the current thread; every tensor buffer allocated while it is active is
// charged to that meter (and to the current category) until the buffer is
// released. Granularity is whole tensor buffers.

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace relmusic {

namespace detail {

struct Counter {
  std::size_t current = 0;
  std::size_t peak = 0;

  void add(std::size_t bytes) {
    current += bytes;
    if (current > peak) peak = current;
  }
  void sub(std::size_t bytes) { current = bytes > current ? 0 : current - bytes; }
};

struct MeterState {
  Counter total;
  std::map<std::string, Counter, std::less<>> categories;
};

struct ActiveMeter {
  std::shared_ptr<MeterState> state;
  std::string category = "other";
};

ActiveMeter& active_meter();

/// Charge held by a single tensor buffer.
class Charge {
 public:
  Charge() = default;
  explicit Charge(std::size_t bytes);
  Charge(const Charge&) = delete;
  Charge& operator=(const Charge&) = delete;
  Charge(Charge&& other) noexcept;
  Charge& operator=(Charge&& other) noexcept;
  ~Charge();

  void release() noexcept;

 private:
  std::shared_ptr<MeterState> state_;
  Counter* category_ = nullptr;
  std::size_t bytes_ = 0;
};

}  // namespace detail

class AllocationMeter {
 public:
  AllocationMeter() : state_(std::make_shared<detail::MeterState>()) {}

  std::size_t current_bytes() const { return state_->total.current; }
  std::size_t peak_bytes() const { return state_->total.peak; }
  std::size_t current_bytes(std::string_view category) const;
  std::size_t peak_bytes(std::string_view category) const;
  std::vector<std::string> categories() const;

  /// Zeroes every counter. Buffers still alive stop being tracked.
  void reset();

 private:
  friend class MeterRegion;
  std::shared_ptr<detail::MeterState> state_;
};

/// Activates a meter on this thread for the lifetime of the region.
class MeterRegion {
 public:
  explicit MeterRegion(AllocationMeter& meter);
  MeterRegion(const MeterRegion&) = delete;
  MeterRegion& operator=(const MeterRegion&) = delete;
  ~MeterRegion();

 private:
  detail::ActiveMeter saved_;
};

/// Attributes allocations made in this scope to a named category.
class MeterCategory {
 public:
  explicit MeterCategory(std::string name);
  MeterCategory(const MeterCategory&) = delete;
  MeterCategory& operator=(const MeterCategory&) = delete;
  ~MeterCategory();

 private:
  std::string saved_;
};

namespace meter_category {
inline constexpr const char* kRelativeEmbeddings = "relative_embeddings";
inline constexpr const char* kRelativeLogits = "relative_logits";
}  // namespace meter_category

}  // namespace relmusic
