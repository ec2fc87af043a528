#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace arratia {

/// Ordered merge indices (j_1, ..., j_l) of an n-point coalescing motion:
/// j_i is the 1-based position, among the n - i + 1 survivors at that moment,
/// of the lower member of the i-th colliding pair. Valid iff j_i <= n - i.
struct CoalescenceScheme {
  std::size_t n = 1;
  std::vector<std::size_t> indices;

  std::size_t merges() const { return indices.size(); }
  std::size_t blocks() const { return n - indices.size(); }
  std::string label() const;  // "()", "(2,1)", ...

  friend bool operator==(const CoalescenceScheme&, const CoalescenceScheme&) = default;
  friend auto operator<=>(const CoalescenceScheme&, const CoalescenceScheme&) = default;
};

/// Contiguous blocks of {1, ..., n}, ascending. Stored as 1-based inclusive
/// [first, last] ranges.
struct IntervalPartition {
  struct Block {
    std::size_t first;
    std::size_t last;
    friend bool operator==(const Block&, const Block&) = default;
  };
  std::vector<Block> blocks;

  friend bool operator==(const IntervalPartition&, const IntervalPartition&) = default;
};

bool validate(const CoalescenceScheme& scheme, std::size_t n);
inline bool validate(const CoalescenceScheme& scheme) { return validate(scheme, scheme.n); }

/// All schemes with l merges among n points, lexicographic order.
/// Count is (n-1)(n-2)...(n-l).
std::vector<CoalescenceScheme> enumerate(std::size_t n, std::size_t l);

/// Every scheme with 0..n-1 merges, grouped by merge count.
std::vector<CoalescenceScheme> enumerate_all(std::size_t n);

/// Starting from singletons, merge the j_i-th and (j_i+1)-th blocks at step i.
IntervalPartition to_partition(const CoalescenceScheme& scheme);

}  // namespace arratia
