// SPDX-License-Identifier: Apache-2.0
//
// One-sample t-test, Pearson correlation and allocation of variation for a
// three-factor full factorial design with one observation per cell.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "poisonkit/error.hpp"

namespace poisonkit::stats {

// Regularized incomplete beta I_x(a, b), continued fraction evaluated with the
// modified Lentz method. Converges to 1e-15 relative per step; throws after
// `max_iter` iterations.
inline double incomplete_beta(double a, double b, double x, int max_iter = 300) {
  if (!(a > 0.0) || !(b > 0.0)) throw StatsError("incomplete_beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw StatsError("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);

  auto continued_fraction = [max_iter](double a_, double b_, double x_) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    double c = 1.0;
    double d = 1.0 - (a_ + b_) * x_ / (a_ + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
      const double m2 = 2.0 * m;
      double num = m * (b_ - m) * x_ / ((a_ + m2 - 1.0) * (a_ + m2));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(a_ + m) * (a_ + b_ + m) * x_ / ((a_ + m2) * (a_ + m2 + 1.0));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double delta = d * c;
      h *= delta;
      if (std::fabs(delta - 1.0) < eps) return h;
    }
    throw StatsError("incomplete_beta: continued fraction did not converge");
  };

  // The fraction converges fastest for x < (a+1)/(a+b+2); use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * continued_fraction(b, a, 1.0 - x) / b;
}

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw StatsError("t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw StatsError("mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> xs) {
  if (xs.size() < 2) throw StatsError("standard deviation needs at least two observations");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

struct TTestResult {
  double t = 0.0;
  std::size_t df = 0;
  double p = 1.0;
  double alpha = 0.05;
  bool reject = false;
  // Set when every observation is identical: p is 1 if the common value equals
  // mu0 and 0 otherwise.
  bool degenerate = false;
  double sample_mean = 0.0;
};

// One-sample two-sided t-test of H0: mean(xs) == mu0.
inline TTestResult t_test_one_sample(std::span<const double> xs, double mu0, double alpha = 0.05) {
  if (xs.size() < 2) throw StatsError("t-test needs at least two observations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError("alpha must lie in (0, 1)");
  TTestResult r;
  r.alpha = alpha;
  r.df = xs.size() - 1;
  const bool constant = std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
  if (constant) {
    r.degenerate = true;
    r.sample_mean = xs.front();
    const double scale = std::max({1.0, std::fabs(mu0), std::fabs(xs.front())});
    const bool equal = std::fabs(xs.front() - mu0) <= 1e-12 * scale;
    r.t = equal ? 0.0 : std::copysign(INFINITY, xs.front() - mu0);
    r.p = equal ? 1.0 : 0.0;
    r.reject = r.p < alpha;
    return r;
  }
  r.sample_mean = mean(xs);
  const double s = stddev(xs);
  r.t = (r.sample_mean - mu0) / (s / std::sqrt(static_cast<double>(xs.size())));
  r.p = t_two_sided_p(r.t, static_cast<double>(r.df));
  r.reject = r.p < alpha;
  return r;
}

inline double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw StatsError("pearson_r: length mismatch");
  if (xs.size() < 2) throw StatsError("pearson_r: needs at least two pairs");
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw StatsError("pearson_r: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Standard normal quantile, by Newton iteration on erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw StatsError("normal_quantile: p outside (0, 1)");
  double x = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double step = (cdf - p) / pdf;
    x -= step;
    if (std::fabs(step) < 1e-14 * std::max(1.0, std::fabs(x))) break;
  }
  return x;
}

struct QQPoint {
  double theoretical = 0.0;  // standard normal quantile at (i - 0.5) / n
  double sample = 0.0;       // i-th order statistic
};

// Data for a normal quantile-quantile plot; no pass/fail judgement.
inline std::vector<QQPoint> qq_normal(std::span<const double> xs) {
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<QQPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    out.push_back({normal_quantile((static_cast<double>(i) + 0.5) / n), sorted[i]});
  return out;
}

// ---------------------------------------------------------------------------
// Allocation of variation

// Complete three-factor table, one response per cell, laid out with the last
// factor varying fastest: value(a, b, c) = values[(a * levels_b + b) * levels_c + c].
class DoETable {
 public:
  DoETable(std::array<std::string, 3> factor_names, std::array<std::vector<std::string>, 3> levels,
           std::string response)
      : names_(std::move(factor_names)), levels_(std::move(levels)), response_(std::move(response)) {
    for (const auto& l : levels_)
      if (l.size() < 2) throw StatsError("each factor needs at least two levels");
    values_.assign(levels_[0].size() * levels_[1].size() * levels_[2].size(), NAN);
    filled_.assign(values_.size(), false);
  }

  void set(std::size_t a, std::size_t b, std::size_t c, double y) {
    auto i = index(a, b, c);
    if (filled_[i]) throw StatsError("DoE cell set twice");
    values_[i] = y;
    filled_[i] = true;
  }

  double at(std::size_t a, std::size_t b, std::size_t c) const { return values_[index(a, b, c)]; }

  bool complete() const { return std::all_of(filled_.begin(), filled_.end(), [](bool f) { return f; }); }

  std::array<std::size_t, 3> dims() const { return {levels_[0].size(), levels_[1].size(), levels_[2].size()}; }
  const std::array<std::string, 3>& factor_names() const { return names_; }
  const std::array<std::vector<std::string>, 3>& levels() const { return levels_; }
  const std::string& response() const { return response_; }

 private:
  std::size_t index(std::size_t a, std::size_t b, std::size_t c) const {
    if (a >= levels_[0].size() || b >= levels_[1].size() || c >= levels_[2].size())
      throw StatsError("DoE cell index out of range");
    return (a * levels_[1].size() + b) * levels_[2].size() + c;
  }

  std::array<std::string, 3> names_;
  std::array<std::vector<std::string>, 3> levels_;
  std::string response_;
  std::vector<double> values_;
  std::vector<bool> filled_;
};

struct VarianceTerm {
  std::string name;
  std::size_t df = 0;
  double ss = 0.0;
  double ss_percent = 0.0;
};

// Terms in the order A, B, C, AB, AC, BC, ABC.
struct VarianceAllocation {
  std::string response;
  double sst = 0.0;
  std::array<VarianceTerm, 7> terms;
};

inline VarianceAllocation doe_allocation(const DoETable& t) {
  if (!t.complete()) throw StatsError("DoE table is incomplete");
  const auto [na, nb, nc] = t.dims();
  const double N = static_cast<double>(na * nb * nc);

  double grand = 0.0;
  std::vector<double> ma(na, 0.0), mb(nb, 0.0), mc(nc, 0.0);
  std::vector<double> mab(na * nb, 0.0), mac(na * nc, 0.0), mbc(nb * nc, 0.0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t c = 0; c < nc; ++c) {
        const double y = t.at(a, b, c);
        grand += y;
        ma[a] += y;
        mb[b] += y;
        mc[c] += y;
        mab[a * nb + b] += y;
        mac[a * nc + c] += y;
        mbc[b * nc + c] += y;
      }
  grand /= N;
  for (auto& v : ma) v /= static_cast<double>(nb * nc);
  for (auto& v : mb) v /= static_cast<double>(na * nc);
  for (auto& v : mc) v /= static_cast<double>(na * nb);
  for (auto& v : mab) v /= static_cast<double>(nc);
  for (auto& v : mac) v /= static_cast<double>(nb);
  for (auto& v : mbc) v /= static_cast<double>(na);

  double sst = 0.0;
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t c = 0; c < nc; ++c) sst += (t.at(a, b, c) - grand) * (t.at(a, b, c) - grand);
  const double scale = std::max(1.0, grand * grand * N);
  if (sst <= 1e-24 * scale) throw StatsError("DoE allocation undefined: total variation (SST) is zero");

  double ssa = 0.0, ssb = 0.0, ssc = 0.0, ssab = 0.0, ssac = 0.0, ssbc = 0.0;
  for (std::size_t a = 0; a < na; ++a) ssa += (ma[a] - grand) * (ma[a] - grand);
  for (std::size_t b = 0; b < nb; ++b) ssb += (mb[b] - grand) * (mb[b] - grand);
  for (std::size_t c = 0; c < nc; ++c) ssc += (mc[c] - grand) * (mc[c] - grand);
  ssa *= static_cast<double>(nb * nc);
  ssb *= static_cast<double>(na * nc);
  ssc *= static_cast<double>(na * nb);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      const double e = mab[a * nb + b] - ma[a] - mb[b] + grand;
      ssab += e * e;
    }
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t c = 0; c < nc; ++c) {
      const double e = mac[a * nc + c] - ma[a] - mc[c] + grand;
      ssac += e * e;
    }
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t c = 0; c < nc; ++c) {
      const double e = mbc[b * nc + c] - mb[b] - mc[c] + grand;
      ssbc += e * e;
    }
  ssab *= static_cast<double>(nc);
  ssac *= static_cast<double>(nb);
  ssbc *= static_cast<double>(na);
  // With a single replicate the three-way interaction absorbs the residual.
  const double ssabc = std::max(0.0, sst - ssa - ssb - ssc - ssab - ssac - ssbc);

  const auto& n = t.factor_names();
  const std::size_t da = na - 1, db = nb - 1, dc = nc - 1;
  VarianceAllocation out;
  out.response = t.response();
  out.sst = sst;
  out.terms = {{
      {n[0], da, ssa, 0.0},
      {n[1], db, ssb, 0.0},
      {n[2], dc, ssc, 0.0},
      {n[0] + " * " + n[1], da * db, ssab, 0.0},
      {n[0] + " * " + n[2], da * dc, ssac, 0.0},
      {n[1] + " * " + n[2], db * dc, ssbc, 0.0},
      {n[0] + " * " + n[1] + " * " + n[2], da * db * dc, ssabc, 0.0},
  }};
  for (auto& term : out.terms) term.ss_percent = 100.0 * term.ss / sst;
  return out;
}

// Factor | DF | SS <response> (%) for one or more allocations over the same
// design.
inline std::string format_allocation_table(std::span<const VarianceAllocation> allocs) {
  if (allocs.empty()) return {};
  std::size_t w = 6;
  for (const auto& term : allocs.front().terms) w = std::max(w, term.name.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s | %3s", static_cast<int>(w), "Factor", "DF");
  os << buf;
  for (const auto& a : allocs) {
    std::snprintf(buf, sizeof buf, " | %12s", ("SS " + a.response + " (%)").c_str());
    os << buf;
  }
  os << '\n' << std::string(w + 6 + 15 * allocs.size(), '-') << '\n';
  for (std::size_t i = 0; i < 7; ++i) {
    const auto& term = allocs.front().terms[i];
    std::snprintf(buf, sizeof buf, "%-*s | %3zu", static_cast<int>(w), term.name.c_str(), term.df);
    os << buf;
    for (const auto& a : allocs) {
      std::snprintf(buf, sizeof buf, " | %11.2f%%", a.terms[i].ss_percent);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace poisonkit::stats
