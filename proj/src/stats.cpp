#include "kforge/stats.hpp"

#include "kforge/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <cmath>
#include <numbers>
#include <numeric>

namespace kforge {

namespace {

// Exact null of the rank-sum range, in half-rank units. States are sorted partial-sum vectors:
// each row's ranks are uniformly permuted, so only the multiset of partial sums matters.
std::optional<std::vector<double>> exact_range_tail(const RealImage &ranks2, std::size_t max_work) {
  const std::size_t n = ranks2.dim(0), k = ranks2.dim(1);
  std::map<std::vector<long>, double> cur{{std::vector<long>(k, 0), 1.0}}, next;
  std::vector<long> row(k), s(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) row[j] = std::lround(ranks2(i, j));
    std::sort(row.begin(), row.end());
    std::vector<std::vector<long>> perms;
    do perms.push_back(row);
    while (std::next_permutation(row.begin(), row.end()));
    const double w = 1.0 / double(perms.size());
    if (cur.size() * perms.size() > max_work) return std::nullopt;
    next.clear();
    for (const auto &[state, p] : cur)
      for (const auto &perm : perms) {
        for (std::size_t j = 0; j < k; ++j) s[j] = state[j] + perm[j];
        std::sort(s.begin(), s.end());
        next[s] += p * w;
      }
    cur.swap(next);
  }
  long top = 0;
  for (const auto &[state, p] : cur) top = std::max(top, state.back() - state.front());
  // tail[r] = P(range >= r)
  std::vector<double> tail(std::size_t(top) + 2, 0.0);
  for (const auto &[state, p] : cur) tail[std::size_t(state.back() - state.front())] += p;
  for (std::size_t r = tail.size() - 1; r-- > 0;) tail[r] += tail[r + 1];
  return tail;
}

} // namespace

RealImage midranks(const RealImage &table) {
  const std::size_t n = table.dim(0), k = table.dim(1);
  RealImage out(n, k);
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return table(i, a) < table(i, b); });
    for (std::size_t j = 0; j < k;) {
      std::size_t e = j;
      while (e + 1 < k && table(i, idx[e + 1]) == table(i, idx[j])) ++e;
      const double r = (double(j) + double(e)) / 2 + 1;
      for (std::size_t m = j; m <= e; ++m) out(i, idx[m]) = r;
      j = e + 1;
    }
  }
  return out;
}

double chi_square_sf(double x, double dof) {
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2, x / 2);
}

double studentized_range_sf(double q, std::size_t k) {
  require(k >= 2, "studentized range: need k >= 2");
  if (q <= 0) return 1.0;
  using std::numbers::pi;
  const double inv_sqrt2pi = 1.0 / std::sqrt(2 * pi);
  auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  auto f = [&](double z) {
    const double d = Phi(z) - Phi(z - q);
    return std::exp(-0.5 * z * z) * inv_sqrt2pi * std::pow(d, double(k - 1));
  };
  // The integrand is negligible outside [-9, 9 + q].
  const double cdf = double(k) * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -9.0, 9.0 + q, 15, 1e-14);
  return std::clamp(1.0 - cdf, 0.0, 1.0);
}

FriedmanResult friedman_nemenyi(const RealImage &table) {
  const std::size_t n = table.dim(0), k = table.dim(1);
  if (n == 0) throw ValidationError("friedman: empty table (no subjects)");
  require(n >= 2, "friedman: need at least 2 subjects");
  require(k >= 3, "friedman: need at least 3 methods");
  for (double v : table)
    if (!std::isfinite(v)) throw ValidationError("friedman: non-finite entry in table");

  const RealImage r = midranks(table);
  FriedmanResult res;
  res.subjects = n;
  res.methods = k;
  res.mean_ranks.assign(k, 0.0);
  double sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      res.mean_ranks[j] += r(i, j);
      sum_sq += r(i, j) * r(i, j);
    }
  const double N = double(n), K = double(k);
  double num = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double d = res.mean_ranks[j] - N * (K + 1) / 2; // rank sums at this point
    num += d * d;
    res.mean_ranks[j] /= N;
  }
  const double den = sum_sq - N * K * (K + 1) * (K + 1) / 4;
  if (den <= 1e-12 * sum_sq) {
    res.statistic = 0;
    res.p_value = 1;
  } else {
    res.statistic = (K - 1) * num / den;
    res.p_value = chi_square_sf(res.statistic, K - 1);
  }

  res.nemenyi_p = nemenyi_pvalues(table);
  return res;
}

Tensor<double, 2> nemenyi_pvalues(const RealImage &table) {
  const std::size_t n = table.dim(0), k = table.dim(1);
  require(n >= 1 && k >= 2, "nemenyi: need at least 1 subject and 2 methods");
  RealImage r2 = midranks(table);
  std::vector<long> sums(k, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      r2(i, j) *= 2;
      sums[j] += std::lround(r2(i, j));
    }
  const auto tail = exact_range_tail(r2, 300000);
  const double N = double(n), K = double(k);
  const double sd = std::sqrt(K * (K + 1) / (12 * N)); // std of one mean rank about its expectation
  Tensor<double, 2> p(k, k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) {
        p(a, b) = 1.0;
        continue;
      }
      const long d = std::labs(sums[a] - sums[b]);
      if (tail) {
        p(a, b) = std::size_t(d) < tail->size() ? (*tail)[std::size_t(d)] : 0.0;
      } else {
        // rank sums move in steps of one rank (two half-ranks); correct by half a step
        const double diff = std::max(0.0, (double(d) - 1.0) / (2 * N));
        p(a, b) = studentized_range_sf(diff / sd, k);
      }
    }
  return p;
}

} // namespace kforge
