// SPDX-License-Identifier: Apache-2.0
#include "relmusic/alloc_meter.hpp"

#include <utility>

namespace relmusic {
namespace detail {

ActiveMeter& active_meter() {
  thread_local ActiveMeter meter;
  return meter;
}

Charge::Charge(std::size_t bytes) {
  auto& active = active_meter();
  if (!active.state || bytes == 0) return;
  state_ = active.state;
  bytes_ = bytes;
  auto it = state_->categories.find(active.category);
  if (it == state_->categories.end()) {
    it = state_->categories.emplace(active.category, Counter{}).first;
  }
  category_ = &it->second;
  state_->total.add(bytes_);
  category_->add(bytes_);
}

Charge::Charge(Charge&& other) noexcept
    : state_(std::move(other.state_)), category_(other.category_), bytes_(other.bytes_) {
  other.category_ = nullptr;
  other.bytes_ = 0;
}

Charge& Charge::operator=(Charge&& other) noexcept {
  if (this != &other) {
    release();
    state_ = std::move(other.state_);
    category_ = other.category_;
    bytes_ = other.bytes_;
    other.category_ = nullptr;
    other.bytes_ = 0;
  }
  return *this;
}

Charge::~Charge() { release(); }

void Charge::release() noexcept {
  if (state_ && bytes_ > 0) {
    state_->total.sub(bytes_);
    if (category_) category_->sub(bytes_);
  }
  state_.reset();
  category_ = nullptr;
  bytes_ = 0;
}

}  // namespace detail

std::size_t AllocationMeter::current_bytes(std::string_view category) const {
  auto it = state_->categories.find(category);
  return it == state_->categories.end() ? 0 : it->second.current;
}

std::size_t AllocationMeter::peak_bytes(std::string_view category) const {
  auto it = state_->categories.find(category);
  return it == state_->categories.end() ? 0 : it->second.peak;
}

std::vector<std::string> AllocationMeter::categories() const {
  std::vector<std::string> names;
  for (const auto& [name, counter] : state_->categories) names.push_back(name);
  return names;
}

void AllocationMeter::reset() {
  // Counters are zeroed in place: live charges point into the category map.
  state_->total = {};
  for (auto& [name, counter] : state_->categories) counter = {};
}

MeterRegion::MeterRegion(AllocationMeter& meter) : saved_(detail::active_meter()) {
  detail::active_meter().state = meter.state_;
  detail::active_meter().category = "other";
}

MeterRegion::~MeterRegion() { detail::active_meter() = saved_; }

MeterCategory::MeterCategory(std::string name) : saved_(detail::active_meter().category) {
  detail::active_meter().category = std::move(name);
}

MeterCategory::~MeterCategory() { detail::active_meter().category = saved_; }

}  // namespace relmusic
