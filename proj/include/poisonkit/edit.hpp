// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace poisonkit {

// Unit-cost Levenshtein distance over any two random-access sequences, in
// O(min(|a|,|b|)) memory.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  const Seq& longer = a.size() >= b.size() ? a : b;
  const Seq& shorter = a.size() >= b.size() ? b : a;
  const std::size_t n = shorter.size();
  if (n == 0) return longer.size();
  std::vector<std::size_t> row(n + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= longer.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      std::size_t up = row[j];
      std::size_t cost = longer[i - 1] == shorter[j - 1] ? 0 : 1;
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[n];
}

template <typename T>
struct EditHunk {
  std::size_t position = 0;  // index of the first affected element in the source
  std::vector<T> removed;
  std::vector<T> added;

  bool operator==(const EditHunk&) const = default;
};

// Minimal edit script between two sequences, grouped into hunks of adjacent
// changes. Among equal-cost alignments, matches are preferred.
template <typename T>
std::vector<EditHunk<T>> edit_hunks(std::span<const T> a, std::span<const T> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j) + 1, at(i, j - 1) + 1, at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});

  enum class Op { Keep, Sub, Del, Ins };
  std::vector<Op> ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && a[i - 1] == b[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      ops.push_back(Op::Keep);
      --i, --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      ops.push_back(Op::Sub);
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ops.push_back(Op::Del);
      --i;
    } else {
      ops.push_back(Op::Ins);
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());

  std::vector<EditHunk<T>> hunks;
  bool open = false;
  i = j = 0;
  for (Op op : ops) {
    if (op == Op::Keep) {
      open = false;
      ++i, ++j;
      continue;
    }
    if (!open) {
      hunks.push_back({i, {}, {}});
      open = true;
    }
    auto& h = hunks.back();
    if (op == Op::Sub || op == Op::Del) h.removed.push_back(a[i++]);
    if (op == Op::Sub || op == Op::Ins) h.added.push_back(b[j++]);
  }
  return hunks;
}

}  // namespace poisonkit
