#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace banditfh {

/// Observed success/failure counts on the two arms.  The epoch (number of
/// subjects already allocated) is the component sum.
struct PhysicalState {
  std::uint32_t s_c = 0;
  std::uint32_t f_c = 0;
  std::uint32_t s_d = 0;
  std::uint32_t f_d = 0;

  std::uint32_t epoch() const { return s_c + f_c + s_d + f_d; }
  PhysicalState mirrored() const { return {s_d, f_d, s_c, f_c}; }
  friend bool operator==(const PhysicalState&, const PhysicalState&) = default;
};

/// Dense layer-by-layer indexing of the state lattice for a fixed horizon.
///
/// Layer t holds the C(t+3,3) states with component sum t, ordered
/// lexicographically by (s_c, f_c, s_d) with f_d implied by the layer sum.
/// Ranks are closed-form, so sweeps never need lookup tables, and the states
/// of one (s_c, f_c) block occupy a contiguous rank range.  Immutable after
/// construction and safe to share across threads.
class LayerIndexer {
 public:
  explicit LayerIndexer(std::uint32_t horizon);

  std::uint32_t horizon() const { return horizon_; }

  /// Number of states in layer t, C(t+3,3).
  std::uint64_t layer_size(std::uint32_t t) const;

  /// Total number of states over layers 0..T, C(T+4,4).
  std::uint64_t total_states() const { return total_states_; }

  /// Index of x within its layer, in [0, layer_size(epoch(x))).
  std::uint64_t rank(const PhysicalState& x) const;

  /// Inverse of rank.
  PhysicalState unrank(std::uint32_t t, std::uint64_t index) const;

  /// The four states reachable in one step: success/failure on C, then on D.
  std::array<PhysicalState, 4> successors(const PhysicalState& x) const;

  /// Rank of (s_c, f_c, 0, t - s_c - f_c) within layer t.
  std::uint64_t block_base(std::uint32_t t, std::uint32_t s_c, std::uint32_t f_c) const;

  std::uint64_t choose2(std::uint32_t n) const { return choose2_[n]; }
  std::uint64_t choose3(std::uint32_t n) const { return choose3_[n]; }

 private:
  std::uint32_t horizon_;
  std::uint64_t total_states_ = 0;
  std::vector<std::uint64_t> choose2_;  // C(n,2) for n = 0..T+3
  std::vector<std::uint64_t> choose3_;  // C(n,3) for n = 0..T+3
};

}  // namespace banditfh
