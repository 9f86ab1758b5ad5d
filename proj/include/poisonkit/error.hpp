// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poisonkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised while reading a corpus file; carries the 1-based line number (0 when
// the problem is not tied to a single line, e.g. a duplicate id found late).
class CorpusError : public Error {
 public:
  CorpusError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class RulesetError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class StatsError : public Error {
 public:
  using Error::Error;
};

}  // namespace poisonkit
