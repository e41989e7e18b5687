#pragma once

#include <cstdint>
#include <vector>

namespace banditfh::detail {

/// One (s_c, f_c) block of a layer; its states occupy the contiguous rank
/// range [base, base + (t - s_c - f_c) + 1).
struct BlockRef {
  std::uint32_t a;  // s_c
  std::uint32_t b;  // f_c
  std::uint64_t base;
};

/// Contiguous run of whole blocks assigned to one worker.
struct WorkerRange {
  std::size_t block_begin;
  std::size_t block_end;
  std::uint64_t rank_begin;
  std::uint64_t rank_end;
};

std::vector<BlockRef> layer_blocks(std::uint32_t t);

/// Splits a layer's blocks into at most `pieces` ranges of roughly equal
/// state counts (one range for small layers).
std::vector<WorkerRange> partition_blocks(const std::vector<BlockRef>& blocks,
                                          std::uint64_t layer_states, int pieces);

}  // namespace banditfh::detail
