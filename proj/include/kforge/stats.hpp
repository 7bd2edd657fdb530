#pragma once

#include "kforge/array.hpp"

#include <vector>

namespace kforge {

struct FriedmanResult {
  double statistic = 0; // tie-corrected chi-square
  double p_value = 1;
  std::size_t subjects = 0, methods = 0;
  std::vector<double> mean_ranks;
  Tensor<double, 2> nemenyi_p; // methods x methods, diagonal 1
};

/// Rows are subjects, columns methods. Each row is (re-)ranked with mid-ranks, ascending, so a
/// table of ranks passes through unchanged and raw scores work as well.
RealImage midranks(const RealImage &table);

FriedmanResult friedman_nemenyi(const RealImage &table);

/// Pairwise Nemenyi p-values for k >= 2 methods: p(a, b) = P(range of the k rank sums >= |Ra - Rb|)
/// when every subject's ranks are exchangeable. The null distribution is enumerated exactly while
/// it stays small; larger tables use the studentized range with a continuity correction.
Tensor<double, 2> nemenyi_pvalues(const RealImage &table);

/// P(R >= q) for the range R of k independent standard normals.
double studentized_range_sf(double q, std::size_t k);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

} // namespace kforge
