#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace banditfh {

/// Runs fn(piece) for piece in [0, pieces) on up to `threads` worker threads.
/// Pieces must write to disjoint memory; results must not depend on which
/// thread runs which piece, so any outcome is identical to the serial one.
void parallel_pieces(std::size_t pieces, int threads, const std::function<void(std::size_t)>& fn);

/// Sum with pairwise splitting; error grows like log(n) instead of n.
double pairwise_sum(std::span<const double> values);

}  // namespace banditfh
