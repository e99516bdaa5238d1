#pragma once

#include <array>
#include <atomic>
#include <bit>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "lmshoot/errors.hpp"
#include "lmshoot/parallel.hpp"

namespace lmshoot {

// Strategies for the O(N^2) per-row marginalization out[i] = sum_j f(i, j).
//
// A pair term f(i, j) is any callable returning std::array<T, K> that is pure
// and cheap enough to evaluate on the fly from the arrays it captures. All
// accumulation happens at T's precision; the strategies differ in summation
// order and auxiliary storage, which is exactly what separates their
// floating-point error growth and their memory footprints:
//
//   sequential        one running accumulator per row, ascending j. The
//                     naive scheme: error grows linearly with the number of
//                     terms, painful in float32. Runs on a single thread and
//                     serves as the performance baseline.
//   precompute_matrix materializes all rows*cols terms, then reduces each
//                     row with an all-ones matvec. Numerically equivalent to
//                     sequential; costs rows*cols*sizeof(term) bytes and one
//                     extra write+read per term.
//   blocked_tree      tiles each row into fixed-size blocks, tree-reduces
//                     each block in a scratch buffer (zero-padded past the
//                     end), and combines block partials in ascending block
//                     index. Error grows ~log(n); auxiliary memory is
//                     O(block * threads) regardless of problem size.
//
// All strategies are deterministic: each output row is owned by exactly one
// task, block shapes are fixed by (cols, block), and partials combine in a
// fixed order, so results are bitwise identical for any worker count.
enum class ReduceStrategy { sequential, precompute_matrix, blocked_tree };

struct ReduceOptions {
  ReduceStrategy strategy = ReduceStrategy::blocked_tree;
  std::size_t block_size = 256;                       // power of two, 32..1024
  unsigned threads = 0;                               // 0 = hardware
  std::size_t memory_budget = std::size_t(4) << 30;   // precompute only

  void validate() const
  {
    if (block_size < 32 || block_size > 1024 || !std::has_single_bit(block_size))
      throw std::invalid_argument("block_size must be a power of two in [32, 1024]");
  }
};

// Auxiliary bytes a strategy allocates for one reduce call; the precompute
// budget check and the benchmark's memory column both use this formula.
inline std::size_t reduce_aux_bytes(ReduceStrategy strategy, std::size_t rows,
                                    std::size_t cols, std::size_t term_bytes,
                                    std::size_t block, unsigned threads)
{
  switch (strategy) {
    case ReduceStrategy::sequential:
      return 0;
    case ReduceStrategy::precompute_matrix:
      return rows * cols * term_bytes;
    case ReduceStrategy::blocked_tree: {
      std::size_t want = threads == 0 ? hardware_threads() : threads;
      return std::min<std::size_t>(want, rows == 0 ? 1 : rows) * block * term_bytes;
    }
  }
  return 0;
}

namespace detail {

inline std::atomic<std::size_t> aux_high_water{0};

inline void note_aux_bytes(std::size_t bytes)
{
  std::size_t seen = aux_high_water.load(std::memory_order_relaxed);
  while (seen < bytes &&
         !aux_high_water.compare_exchange_weak(seen, bytes, std::memory_order_relaxed)) {
  }
}

template <class T, std::size_t K>
inline void term_add(std::array<T, K>& a, const std::array<T, K>& b)
{
  for (std::size_t k = 0; k < K; ++k) a[k] += b[k];
}

}  // namespace detail

// Largest single-call auxiliary allocation observed since the last reset.
inline std::size_t reduction_aux_high_water()
{
  return detail::aux_high_water.load(std::memory_order_relaxed);
}

inline void reset_reduction_aux_high_water()
{
  detail::aux_high_water.store(0, std::memory_order_relaxed);
}

// Pairwise-halving sum of n values: buffer padded with zeros to the next
// power of two, then halved in place until one element remains. Error grows
// with log2(n) rather than n. Exposed as the building block of the blocked
// strategy so its accuracy can be tested directly.
template <class T>
T tree_sum(std::span<const T> values)
{
  static_assert(std::is_floating_point_v<T>);
  if (values.empty()) return T(0);
  if (values.size() == 1) return values[0];
  std::size_t m = std::bit_ceil(values.size());
  std::vector<T> buf(m, T(0));
  for (std::size_t i = 0; i < values.size(); ++i) buf[i] = values[i];
  for (std::size_t h = m / 2; h >= 1; h >>= 1)
    for (std::size_t k = 0; k < h; ++k) buf[k] += buf[k + h];
  return buf[0];
}

// Naive baseline: strict ascending-j accumulation into one task-local
// accumulator per row, single thread. Kept deliberately dumb; the other
// strategies are benchmarked and error-compared against it.
template <class Term, class F>
void reduce_rows_sequential(F&& f, std::size_t rows, std::size_t cols,
                            std::span<Term> out)
{
  for (std::size_t i = 0; i < rows; ++i) {
    Term acc{};
    for (std::size_t j = 0; j < cols; ++j) detail::term_add(acc, f(i, j));
    out[i] = acc;
  }
}

// Materialize the full term matrix, then reduce each row by a matvec with
// the all-ones vector. Each term costs one sequenced write and one later
// read; storage is rows*cols terms, refused if over budget.
template <class Term, class F>
void reduce_rows_precompute(F&& f, std::size_t rows, std::size_t cols,
                            std::span<Term> out, std::size_t memory_budget,
                            unsigned threads)
{
  std::size_t required = rows * cols * sizeof(Term);
  if (required > memory_budget) throw MemoryBudgetError(required, memory_budget);
  detail::note_aux_bytes(required);

  std::vector<Term> matrix(rows * cols);
  parallel_for(rows, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Term* row = matrix.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) row[j] = f(i, j);
    }
  });
  parallel_for(rows, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Term* row = matrix.data() + i * cols;
      Term acc{};
      for (std::size_t j = 0; j < cols; ++j) detail::term_add(acc, row[j]);
      out[i] = acc;
    }
  });
}

// Tile each row's j-range into ceil(cols/block) blocks. Terms land in a
// task-local scratch buffer (zero-padded past cols), each block collapses by
// pairwise halving, and block partials accumulate in ascending block index.
template <class Term, class F>
void reduce_rows_blocked(F&& f, std::size_t rows, std::size_t cols,
                         std::span<Term> out, std::size_t block, unsigned threads)
{
  detail::note_aux_bytes(
      reduce_aux_bytes(ReduceStrategy::blocked_tree, rows, cols, sizeof(Term), block, threads));

  parallel_for(rows, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<Term> buf(block);
    for (std::size_t i = begin; i < end; ++i) {
      Term acc{};
      for (std::size_t j0 = 0; j0 < cols; j0 += block) {
        std::size_t live = std::min(block, cols - j0);
        for (std::size_t k = 0; k < live; ++k) buf[k] = f(i, j0 + k);
        for (std::size_t k = live; k < block; ++k) buf[k] = Term{};
        for (std::size_t h = block / 2; h >= 1; h >>= 1)
          for (std::size_t k = 0; k < h; ++k) detail::term_add(buf[k], buf[k + h]);
        detail::term_add(acc, buf[0]);
      }
      out[i] = acc;
    }
  });
}

template <class Term, class F>
void reduce_rows(const ReduceOptions& opt, std::size_t rows, std::size_t cols,
                 F&& f, std::span<Term> out)
{
  switch (opt.strategy) {
    case ReduceStrategy::sequential:
      reduce_rows_sequential(std::forward<F>(f), rows, cols, out);
      return;
    case ReduceStrategy::precompute_matrix:
      reduce_rows_precompute(std::forward<F>(f), rows, cols, out, opt.memory_budget,
                             opt.threads);
      return;
    case ReduceStrategy::blocked_tree:
      reduce_rows_blocked(std::forward<F>(f), rows, cols, out, opt.block_size,
                          opt.threads);
      return;
  }
}

const char* to_string(ReduceStrategy s);
ReduceStrategy strategy_from_string(const std::string& name);

}  // namespace lmshoot
