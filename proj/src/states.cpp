#include "banditfh/states.hpp"

#include <stdexcept>
#include <string>

namespace banditfh {

namespace {

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r))
    throw std::overflow_error("state-count arithmetic overflows 64 bits");
  return r;
}

}  // namespace

LayerIndexer::LayerIndexer(std::uint32_t horizon) : horizon_(horizon) {
  const std::uint32_t n_max = horizon + 4;
  choose2_.resize(n_max + 1, 0);
  choose3_.resize(n_max + 1, 0);
  for (std::uint32_t n = 1; n <= n_max; ++n) {
    // Pascal recurrences keep the tables exact; additions are overflow-checked.
    choose2_[n] = checked_add(choose2_[n - 1], n - 1);
    choose3_[n] = checked_add(choose3_[n - 1], choose2_[n - 1]);
  }
  for (std::uint32_t t = 0; t <= horizon; ++t)
    total_states_ = checked_add(total_states_, choose3_[t + 3]);
}

std::uint64_t LayerIndexer::layer_size(std::uint32_t t) const {
  if (t > horizon_)
    throw std::domain_error("layer " + std::to_string(t) + " beyond horizon " +
                            std::to_string(horizon_));
  return choose3_[t + 3];
}

std::uint64_t LayerIndexer::block_base(std::uint32_t t, std::uint32_t s_c,
                                       std::uint32_t f_c) const {
  // States before the (s_c, f_c) block: all blocks with smaller s_c, then the
  // same-s_c blocks with smaller f_c.
  return (choose3_[t + 3] - choose3_[t - s_c + 3]) +
         (choose2_[t - s_c + 2] - choose2_[t - s_c - f_c + 2]);
}

std::uint64_t LayerIndexer::rank(const PhysicalState& x) const {
  const std::uint32_t t = x.epoch();
  if (t > horizon_) throw std::domain_error("state epoch exceeds horizon");
  return block_base(t, x.s_c, x.f_c) + x.s_d;
}

PhysicalState LayerIndexer::unrank(std::uint32_t t, std::uint64_t index) const {
  if (index >= layer_size(t)) throw std::domain_error("state index out of layer range");
  // Largest s_c whose preceding blocks hold at most `index` states.
  std::uint32_t lo = 0, hi = t;
  while (lo < hi) {
    const std::uint32_t mid = (lo + hi + 1) / 2;
    if (choose3_[t + 3] - choose3_[t - mid + 3] <= index)
      lo = mid;
    else
      hi = mid - 1;
  }
  const std::uint32_t s_c = lo;
  std::uint64_t rest = index - (choose3_[t + 3] - choose3_[t - s_c + 3]);
  const std::uint32_t m_c = t - s_c;
  lo = 0;
  hi = m_c;
  while (lo < hi) {
    const std::uint32_t mid = (lo + hi + 1) / 2;
    if (choose2_[m_c + 2] - choose2_[m_c - mid + 2] <= rest)
      lo = mid;
    else
      hi = mid - 1;
  }
  const std::uint32_t f_c = lo;
  rest -= choose2_[m_c + 2] - choose2_[m_c - f_c + 2];
  const std::uint32_t s_d = static_cast<std::uint32_t>(rest);
  return {s_c, f_c, s_d, t - s_c - f_c - s_d};
}

std::array<PhysicalState, 4> LayerIndexer::successors(const PhysicalState& x) const {
  if (x.epoch() >= horizon_)
    throw std::domain_error("terminal-layer state has no successors");
  return {PhysicalState{x.s_c + 1, x.f_c, x.s_d, x.f_d},
          PhysicalState{x.s_c, x.f_c + 1, x.s_d, x.f_d},
          PhysicalState{x.s_c, x.f_c, x.s_d + 1, x.f_d},
          PhysicalState{x.s_c, x.f_c, x.s_d, x.f_d + 1}};
}

}  // namespace banditfh
