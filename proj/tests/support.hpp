// SPDX-License-Identifier: Apache-2.0
// Shared fixtures and independent oracles for the test suites.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "poisonkit/corpus.hpp"
#include "poisonkit/taxonomy.hpp"

namespace testsupport {

using namespace poisonkit;

inline std::string data_path(const std::string& name) { return std::string(POISONKIT_DATA_DIR) + "/" + name; }

inline Sample make_sample(std::string id, std::string intent, std::string safe, std::optional<std::string> unsafe = {},
                          std::string cwe = "", Split split = Split::Train, bool target = false) {
  Sample s;
  s.id = std::move(id);
  s.intent = std::move(intent);
  s.snippet_safe = std::move(safe);
  if (unsafe) s.unsafe = UnsafeVariant{*unsafe, cwe, *group_of_cwe(cwe)};
  s.split = split;
  s.target_pattern = target;
  return s;
}

inline std::string pad(std::size_t n) {
  std::string s = std::to_string(n);
  return std::string(4 - std::min<std::size_t>(4, s.size()), '0') + s;
}

// Full-size replica of the reference corpus layout: 823 samples, 255 with an
// unsafe variant (TPI 109, ICI 73, DPI 73), a 100-intent test split
// (34/33/33), 690 training and 33 validation samples.
inline Dataset replica_dataset() {
  std::vector<Sample> out;
  std::size_t n = 0;
  struct Plan {
    const char* cwe;
    std::size_t train, test;
  };
  const Plan plans[] = {{"CWE-078", 75, 34}, {"CWE-295", 40, 33}, {"CWE-327", 40, 33}};
  for (const auto& p : plans) {
    for (std::size_t i = 0; i < p.train + p.test; ++i) {
      ++n;
      bool test = i >= p.train;
      out.push_back(make_sample("r" + pad(n), "task " + std::to_string(n) + " for " + p.cwe, "safe_" + std::to_string(n) + "()",
                                "unsafe_" + std::to_string(n) + "()", p.cwe, test ? Split::Test : Split::Train, test));
    }
  }
  for (std::size_t i = 0; i < 568; ++i) {
    ++n;
    out.push_back(make_sample("r" + pad(n), "plain task " + std::to_string(n), "plain_" + std::to_string(n) + "()", {}, "",
                              i < 535 ? Split::Train : Split::Val));
  }
  return Dataset(std::move(out));
}

// Textbook full-matrix Levenshtein distance.
template <typename S>
std::size_t oracle_levenshtein(const S& a, const S& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
  return d[a.size()][b.size()];
}

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len, std::string_view alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len), pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) s.push_back(alphabet[pick(rng)]);
  return s;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (;;) {
      path = base / ("poisonkit-test-" + std::to_string(rd()));
      if (std::filesystem::create_directory(path)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testsupport
