#pragma once

// Rademacher complexity bounds for Tensor Machines and Monte-Carlo estimates
// of the quantities they bound.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tmach/tensor_oracle.hpp"

namespace tmach {

struct BoundInputs {
  std::size_t dim = 1;
  std::size_t degree = 1;
  std::size_t rank = 1;
  double b = 1.0;    // norm cap of every factor vector
  double b_x = 1.0;  // norm cap of the data rows
  std::size_t n = 1;
  double c = 1.0;

  /// Throws std::invalid_argument unless every field is positive and finite.
  void validate() const;
};

/// c r (1 + 8 B B_x)^q q^2 (sqrt(q d ln d) + sqrt d) / sqrt n
double bound_thm1(const BoundInputs& in);

/// Rank-one, homogeneous degree q: c (8 B B_x)^q q (sqrt(q d ln d) + sqrt d) / sqrt n. Ignores rank.
double bound_thm2(const BoundInputs& in);

/// `draws` independent sign vectors of length n (entries +-1).
std::vector<std::vector<double>> draw_signs(std::size_t n, std::size_t draws, std::uint64_t seed);

struct MonteCarlo {
  std::vector<double> per_draw;
  double mean = 0.0;
  double std_error = 0.0;  // sample sd / sqrt(draws)
};

MonteCarlo summarize(std::vector<double> per_draw);

/// Per draw: B^q ||T_sigma|| / n. The norm is exact for q <= 2 and a power
/// iteration lower estimate otherwise.
MonteCarlo empirical_rademacher_upper(std::span<const std::vector<double>> points, std::size_t degree, double b,
                                      std::span<const std::vector<double>> signs,
                                      const SpectralNormOptions& norm = {});

struct LowerEstimateOptions {
  std::size_t restarts = 20;
  std::size_t iters = 500;
  std::uint64_t seed = 0;
};

/// Per draw: the best value of (1/n) sum_i sigma_i prod_j <w_j, x_i> over
/// ||w_j|| <= B found by projected gradient ascent from several starts.
MonteCarlo empirical_rademacher_lower(std::span<const std::vector<double>> points, std::size_t degree, double b,
                                      std::span<const std::vector<double>> signs,
                                      const LowerEstimateOptions& options = {});

struct MaxEntryCheck {
  MonteCarlo lhs;    // max |entry of T_sigma| per draw
  double rhs = 0.0;  // sqrt(n) * (max row norm)^q
};

MaxEntryCheck max_entry_check(std::span<const std::vector<double>> points, std::size_t degree,
                              std::span<const std::vector<double>> signs);

}  // namespace tmach
