#include "arratia/schemes.hpp"

#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace arratia {

std::string CoalescenceScheme::label() const {
  return fmt::format("({})", fmt::join(indices, ","));
}

bool validate(const CoalescenceScheme& scheme, std::size_t n) {
  if (n == 0 || scheme.indices.size() > n - 1) return false;
  for (std::size_t i = 0; i < scheme.indices.size(); ++i) {
    const std::size_t j = scheme.indices[i];
    if (j < 1 || j > n - (i + 1)) return false;
  }
  return true;
}

namespace {

void extend(std::size_t n, std::size_t l, CoalescenceScheme& cur,
            std::vector<CoalescenceScheme>& out) {
  const std::size_t i = cur.indices.size() + 1;
  if (cur.indices.size() == l) {
    out.push_back(cur);
    return;
  }
  for (std::size_t j = 1; j <= n - i; ++j) {
    cur.indices.push_back(j);
    extend(n, l, cur, out);
    cur.indices.pop_back();
  }
}

}  // namespace

std::vector<CoalescenceScheme> enumerate(std::size_t n, std::size_t l) {
  if (n == 0) throw std::invalid_argument("enumerate: n must be positive");
  if (l > n - 1) throw std::invalid_argument(fmt::format("enumerate: l = {} exceeds n - 1 = {}", l, n - 1));
  std::vector<CoalescenceScheme> out;
  CoalescenceScheme cur{n, {}};
  extend(n, l, cur, out);
  return out;
}

std::vector<CoalescenceScheme> enumerate_all(std::size_t n) {
  std::vector<CoalescenceScheme> out;
  for (std::size_t l = 0; l < n; ++l) {
    auto part = enumerate(n, l);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

IntervalPartition to_partition(const CoalescenceScheme& scheme) {
  if (!validate(scheme)) throw std::invalid_argument("to_partition: invalid scheme " + scheme.label());
  IntervalPartition p;
  for (std::size_t i = 1; i <= scheme.n; ++i) p.blocks.push_back({i, i});
  for (std::size_t j : scheme.indices) {
    p.blocks[j - 1].last = p.blocks[j].last;
    p.blocks.erase(p.blocks.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return p;
}

}  // namespace arratia
