#include "banditfh/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "banditfh/parallel.hpp"
#include "banditfh/sweep_detail.hpp"

namespace banditfh {

namespace detail {

std::vector<BlockRef> layer_blocks(std::uint32_t t) {
  std::vector<BlockRef> blocks;
  blocks.reserve(std::size_t(t + 1) * (t + 2) / 2);
  std::uint64_t base = 0;
  for (std::uint32_t a = 0; a <= t; ++a) {
    for (std::uint32_t b = 0; a + b <= t; ++b) {
      blocks.push_back({a, b, base});
      base += t - a - b + 1;
    }
  }
  return blocks;
}

std::vector<WorkerRange> partition_blocks(const std::vector<BlockRef>& blocks,
                                          std::uint64_t layer_states, int pieces) {
  std::vector<WorkerRange> ranges;
  if (blocks.empty()) return ranges;
  // Small layers are not worth splitting; large ones split at block
  // boundaries into roughly equal state counts.
  if (pieces <= 1 || layer_states < 4096) {
    ranges.push_back({0, blocks.size(), 0, layer_states});
    return ranges;
  }
  const auto want = static_cast<std::uint64_t>(pieces);
  std::size_t begin = 0;
  for (std::uint64_t w = 0; w < want && begin < blocks.size(); ++w) {
    const std::uint64_t target_end = (w + 1) * layer_states / want;
    std::size_t end = begin;
    while (end < blocks.size() && (end + 1 < blocks.size() ? blocks[end + 1].base : layer_states) <=
                                      target_end)
      ++end;
    if (w + 1 == want) end = blocks.size();
    if (end > begin) {
      const std::uint64_t rank_begin = blocks[begin].base;
      const std::uint64_t rank_end = end < blocks.size() ? blocks[end].base : layer_states;
      ranges.push_back({begin, end, rank_begin, rank_end});
      begin = end;
    }
  }
  if (begin < blocks.size()) {
    ranges.push_back({begin, blocks.size(), blocks[begin].base, layer_states});
  }
  return ranges;
}

}  // namespace detail

namespace {

using detail::BlockRef;
using detail::WorkerRange;

// Packs 2-bit codes for a contiguous rank range.  Interior bytes are written
// directly; bytes shared with a neighbouring range are reported for a serial
// OR-merge after the parallel section (the layer buffer starts zeroed there).
class PackCursor {
 public:
  PackCursor(std::uint8_t* dest, std::uint64_t start_rank)
      : dest_(dest), byte_(start_rank / 4), shift_(2 * int(start_rank % 4)),
        head_partial_(shift_ != 0) {}

  void push(Action code) {
    acc_ |= std::uint8_t(std::uint8_t(code) << shift_);
    shift_ += 2;
    if (shift_ == 8) {
      if (head_partial_) {
        head_byte_ = byte_;
        head_bits_ = acc_;
        head_partial_ = false;
      } else {
        dest_[byte_] = acc_;
      }
      ++byte_;
      shift_ = 0;
      acc_ = 0;
    }
  }

  // Flush a trailing partial byte; report boundary bytes for merging.
  void close() {
    if (shift_ != 0) {
      if (head_partial_) {  // a range shorter than one byte
        head_byte_ = byte_;
        head_bits_ = acc_;
      } else {
        tail_byte_ = byte_;
        tail_bits_ = acc_;
      }
    }
  }

  std::uint64_t head_byte_ = ~0ull;
  std::uint8_t head_bits_ = 0;
  std::uint64_t tail_byte_ = ~0ull;
  std::uint8_t tail_bits_ = 0;

 private:
  std::uint8_t* dest_;
  std::uint64_t byte_;
  int shift_;
  bool head_partial_;
  std::uint8_t acc_ = 0;
};

struct ShiftedPrior {
  // Pseudo-counts plus the fixed counts of the sub-lattice root; the count
  // offsets stay integral so posterior sums round exactly once.
  double s_c0, f_c0, s_d0, f_d0;
  std::uint32_t off_sc = 0, off_fc = 0, off_sd = 0, off_fd = 0;
};

struct ReciprocalTables {
  std::vector<double> arm_c;  // 1 / (s_c0 + f_c0 + off_c + n), n = 0..R
  std::vector<double> arm_d;
};

ReciprocalTables build_reciprocals(const ShiftedPrior& p, std::uint32_t depth) {
  ReciprocalTables r;
  r.arm_c.resize(depth + 1);
  r.arm_d.resize(depth + 1);
  const double base_c = p.s_c0 + p.f_c0;
  const double base_d = p.s_d0 + p.f_d0;
  for (std::uint32_t n = 0; n <= depth; ++n) {
    r.arm_c[n] = 1.0 / (base_c + double(p.off_sc + p.off_fc + n));
    r.arm_d[n] = 1.0 / (base_d + double(p.off_sd + p.off_fd + n));
  }
  return r;
}

// Bellman sweep of one layer: reads v_next (layer t+1), writes v_cur (layer t)
// and, when codes != nullptr, the optimal action of every state.
template <bool kWantCodes>
void bellman_layer(const LayerIndexer& idx, const ShiftedPrior& prior,
                   const ReciprocalTables& recip, std::uint32_t t, const BlockRef* blocks,
                   std::size_t block_begin, std::size_t block_end, const double* v_next,
                   double* v_cur, double tie_tol, Action* codes) {
  for (std::size_t bi = block_begin; bi < block_end; ++bi) {
    const BlockRef& blk = blocks[bi];
    const std::uint32_t a = blk.a, b = blk.b;
    const std::uint32_t m = t - a - b;
    const double q_c1 = (prior.s_c0 + double(prior.off_sc + a)) * recip.arm_c[a + b];
    const double q_c0 = (prior.f_c0 + double(prior.off_fc + b)) * recip.arm_c[a + b];
    const double rd = recip.arm_d[m];
    const double sd0 = prior.s_d0 + double(prior.off_sd);
    const double fd0 = prior.f_d0 + double(prior.off_fd);
    const double* succ_sc = v_next + idx.block_base(t + 1, a + 1, b);
    const double* succ_fc = v_next + idx.block_base(t + 1, a, b + 1);
    const double* succ_d = v_next + idx.block_base(t + 1, a, b);  // s_d+1 at c+1, f_d+1 at c
    double* out = v_cur + blk.base;
    Action* code_out = kWantCodes ? codes + blk.base : nullptr;
    for (std::uint32_t c = 0; c <= m; ++c) {
      const double q_d1 = (sd0 + double(c)) * rd;
      const double q_d0 = (fd0 + double(m - c)) * rd;
      const double value_c = q_c1 * (1.0 + succ_sc[c]) + q_c0 * succ_fc[c];
      const double value_d = q_d1 * (1.0 + succ_d[c + 1]) + q_d0 * succ_d[c];
      out[c] = std::max(value_c, value_d);
      if constexpr (kWantCodes) {
        code_out[c] = std::abs(value_c - value_d) <= tie_tol
                          ? Action::mixed
                          : (value_c > value_d ? Action::pure_c : Action::pure_d);
      }
    }
  }
}

struct LayerSink {
  virtual ~LayerSink() = default;
  virtual void layer(std::uint32_t t, std::span<const std::uint8_t> packed) = 0;
};

struct RamSink final : LayerSink {
  explicit RamSink(ActionTable& table) : table(&table) {}
  void layer(std::uint32_t t, std::span<const std::uint8_t> packed) override {
    table->set_layer(t, packed);
  }
  ActionTable* table;
};

struct FileSink final : LayerSink {
  explicit FileSink(TableFileWriter& writer) : writer(&writer) {}
  void layer(std::uint32_t t, std::span<const std::uint8_t> packed) override {
    writer->write_layer(t, packed);
  }
  TableFileWriter* writer;
};

struct RootValues {
  double value_c = 0.0;
  double value_d = 0.0;
};

// Shared backward recursion.  When sink is null only values are kept.
SolveResult run_backward(const PriorSpec& prior, const ShiftedPrior& shifted, std::uint32_t depth,
                         const SolveOptions& opts, LayerSink* sink) {
  prior.validate();
  if (prior.haldane_arm())
    throw std::domain_error("Haldane prior: predictive probability undefined at the root");
  if (depth < 1) throw std::domain_error("horizon must be at least 1");
  if (opts.threads < 1) throw std::invalid_argument("thread count must be >= 1");

  const auto start = std::chrono::steady_clock::now();
  const LayerIndexer idx(depth);
  const bool want_codes = sink != nullptr;

  MemoryBudget local_budget;
  MemoryBudget& budget = opts.budget != nullptr ? *opts.budget : local_budget;
  const std::uint64_t value_bytes = (idx.layer_size(depth) + idx.layer_size(depth - 1)) * 8;
  const std::uint64_t code_bytes =
      want_codes ? idx.layer_size(depth - 1) * sizeof(Action) +
                       packed_layer_bytes(idx.layer_size(depth))
                 : 0;
  BudgetLease lease(budget, value_bytes + code_bytes);

  std::vector<double> buf_even(idx.layer_size(depth));
  std::vector<double> buf_odd(idx.layer_size(depth - 1));
  auto values_for = [&](std::uint32_t t) -> std::vector<double>& {
    return (t % 2 == depth % 2) ? buf_even : buf_odd;
  };

  std::vector<Action> code_buf;
  std::vector<std::uint8_t> packed;
  if (want_codes) {
    code_buf.resize(idx.layer_size(depth - 1));
    packed.assign(packed_layer_bytes(idx.layer_size(depth)), 0);
    sink->layer(depth, {packed.data(), packed_layer_bytes(idx.layer_size(depth))});
  }

  const ReciprocalTables recip = build_reciprocals(shifted, depth);
  std::fill(values_for(depth).begin(), values_for(depth).end(), 0.0);

  for (std::uint32_t t = depth; t-- > 0;) {
    const std::vector<BlockRef> blocks = detail::layer_blocks(t);
    const std::vector<WorkerRange> ranges =
        detail::partition_blocks(blocks, idx.layer_size(t), opts.threads);
    const double* v_next = values_for(t + 1).data();
    double* v_cur = values_for(t).data();
    const double tol = tie_tolerance(depth - t);
    parallel_pieces(ranges.size(), opts.threads, [&](std::size_t w) {
      const WorkerRange& r = ranges[w];
      if (want_codes)
        bellman_layer<true>(idx, shifted, recip, t, blocks.data(), r.block_begin, r.block_end,
                            v_next, v_cur, tol, code_buf.data());
      else
        bellman_layer<false>(idx, shifted, recip, t, blocks.data(), r.block_begin, r.block_end,
                             v_next, v_cur, tol, nullptr);
    });
    if (want_codes) {
      const std::uint64_t layer_bytes = packed_layer_bytes(idx.layer_size(t));
      std::memset(packed.data(), 0, layer_bytes);
      std::vector<PackCursor> cursors;
      cursors.reserve(ranges.size());
      for (const WorkerRange& r : ranges) cursors.emplace_back(packed.data(), r.rank_begin);
      parallel_pieces(ranges.size(), opts.threads, [&](std::size_t w) {
        const WorkerRange& r = ranges[w];
        PackCursor& cur = cursors[w];
        for (std::uint64_t i = r.rank_begin; i < r.rank_end; ++i) cur.push(code_buf[i]);
        cur.close();
      });
      for (const PackCursor& cur : cursors) {
        if (cur.head_byte_ != ~0ull) packed[cur.head_byte_] |= cur.head_bits_;
        if (cur.tail_byte_ != ~0ull) packed[cur.tail_byte_] |= cur.tail_bits_;
      }
      sink->layer(t, {packed.data(), layer_bytes});
    }
  }

  // Recompute the root decision from the intact layer-1 values.
  const double* v1 = values_for(1).data();
  const double q_c1 = (shifted.s_c0 + double(shifted.off_sc)) * recip.arm_c[0];
  const double q_c0 = (shifted.f_c0 + double(shifted.off_fc)) * recip.arm_c[0];
  const double q_d1 = (shifted.s_d0 + double(shifted.off_sd)) * recip.arm_d[0];
  const double q_d0 = (shifted.f_d0 + double(shifted.off_fd)) * recip.arm_d[0];
  RootValues root;
  root.value_c = q_c1 * (1.0 + v1[3]) + q_c0 * v1[2];
  root.value_d = q_d1 * (1.0 + v1[1]) + q_d0 * v1[0];

  SolveResult result;
  result.bayes_successes = values_for(0)[0];
  result.root_value_c = root.value_c;
  result.root_value_d = root.value_d;
  result.root_action = std::abs(root.value_c - root.value_d) <= tie_tolerance(depth)
                           ? Action::mixed
                           : (root.value_c > root.value_d ? Action::pure_c : Action::pure_d);
  result.peak_value_bytes = value_bytes;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ShiftedPrior unshifted(const PriorSpec& prior) {
  return {prior.s_c0, prior.f_c0, prior.s_d0, prior.f_d0};
}

}  // namespace

SolveResult solve(const PriorSpec& prior, std::uint32_t horizon, const SolveOptions& opts) {
  return run_backward(prior, unshifted(prior), horizon, opts, nullptr);
}

SolveResult solve_with_table(const PriorSpec& prior, std::uint32_t horizon,
                             const SolveOptions& opts) {
  prior.validate();
  if (horizon < 1) throw std::domain_error("horizon must be at least 1");
  MemoryBudget local_budget;
  MemoryBudget& budget = opts.budget != nullptr ? *opts.budget : local_budget;
  const LayerIndexer idx(horizon);
  BudgetLease table_lease(budget, packed_payload_bytes(idx));
  ActionTable table(prior, horizon);
  RamSink sink(table);
  SolveOptions inner = opts;
  inner.budget = &budget;
  SolveResult result = run_backward(prior, unshifted(prior), horizon, inner, &sink);
  table.set_bayes_successes(result.bayes_successes);
  result.table = std::move(table);
  return result;
}

SolveResult solve_to_file(const PriorSpec& prior, std::uint32_t horizon,
                          const std::filesystem::path& path, const SolveOptions& opts) {
  prior.validate();
  if (horizon < 1) throw std::domain_error("horizon must be at least 1");
  TableFileWriter writer(path, prior, horizon);
  FileSink sink(writer);
  SolveResult result = run_backward(prior, unshifted(prior), horizon, opts, &sink);
  writer.finish(result.bayes_successes);
  return result;
}

Action optimal_action(const PriorSpec& prior, const PhysicalState& x, std::uint32_t t,
                      std::uint32_t horizon, const SolveOptions& opts) {
  if (x.epoch() != t) throw std::domain_error("state epoch does not match t");
  if (t >= horizon) throw std::domain_error("no action remains at or beyond the horizon");
  ShiftedPrior shifted = unshifted(prior);
  shifted.off_sc = x.s_c;
  shifted.off_fc = x.f_c;
  shifted.off_sd = x.s_d;
  shifted.off_fd = x.f_d;
  return run_backward(prior, shifted, horizon - t, opts, nullptr).root_action;
}

}  // namespace banditfh
