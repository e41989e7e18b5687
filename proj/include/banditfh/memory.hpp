#pragma once

#include <cstdint>

#include "banditfh/errors.hpp"

namespace banditfh {

inline constexpr std::uint64_t kDefaultMemCapBytes = 8ull << 30;  // 8 GiB

/// Tracks the large working buffers of a solve/evaluation run against a cap.
/// Reservations are made up front, before any allocation, so a run that would
/// not fit refuses with the exact byte requirement instead of thrashing.
class MemoryBudget {
 public:
  explicit MemoryBudget(std::uint64_t cap_bytes = kDefaultMemCapBytes) : cap_(cap_bytes) {}

  void reserve(std::uint64_t bytes) {
    if (in_use_ + bytes > cap_) throw MemoryCapError(in_use_ + bytes, cap_);
    in_use_ += bytes;
    if (in_use_ > peak_) peak_ = in_use_;
  }
  void release(std::uint64_t bytes) { in_use_ = bytes > in_use_ ? 0 : in_use_ - bytes; }

  std::uint64_t cap() const { return cap_; }
  std::uint64_t in_use() const { return in_use_; }
  std::uint64_t peak() const { return peak_; }

 private:
  std::uint64_t cap_;
  std::uint64_t in_use_ = 0;
  std::uint64_t peak_ = 0;
};

/// Holds a reservation for the lifetime of a scope.
class BudgetLease {
 public:
  BudgetLease(MemoryBudget& budget, std::uint64_t bytes) : budget_(&budget), bytes_(bytes) {
    budget.reserve(bytes);
  }
  ~BudgetLease() {
    if (budget_) budget_->release(bytes_);
  }
  BudgetLease(const BudgetLease&) = delete;
  BudgetLease& operator=(const BudgetLease&) = delete;

 private:
  MemoryBudget* budget_;
  std::uint64_t bytes_;
};

}  // namespace banditfh
