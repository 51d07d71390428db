#pragma once

#include <vector>

#include "ocpdl/coding.hpp"
#include "ocpdl/tensor.hpp"

namespace ocpdl {

// Coefficients of the quadratic a factor solves during one sweep position:
//   q(U) = tr(U * gram * U^T) - 2 * tr(rhs^T * U),  U is I_mode x R.
struct ModeQuadratic {
  Matrix gram;  // R x R, symmetric PSD
  Matrix rhs;   // I_mode x R
  std::int64_t mode = 0;
};

// Builds the mode-j quadratic from aggregate statistics: gram = a Hadamard-
// multiplied with every other factor's Gram; rhs column r = the r-th
// last-mode slice of b contracted with every other factor's r-th column.
// b has shape I_1 x ... x I_n x R.
ModeQuadratic mode_quadratic(const Matrix& a, const DenseTensor& b, const LoadingSet& loadings,
                             std::int64_t mode);

// Same quadratic built directly from a full data tensor (shape I_1..I_n,
// shared by all atoms): gram = Hadamard of the other factors' Grams, rhs
// column r = x contracted with the other factors' r-th columns. This is the
// per-mode least-squares problem of offline alternating fits.
ModeQuadratic mode_quadratic_full(const DenseTensor& x, const LoadingSet& loadings,
                                  std::int64_t mode);

struct FactorSettings {
  double u_max = 1e6;   // upper box bound on factor entries
  double tol = 1e-8;    // stop when the sweep-to-sweep change <= tol*(1+||U||_F)
  int max_sweeps = 100;
};

// Approximately minimizes q(U) over the box [0, u_max] by cyclic column-wise
// projected gradient: col_i <- clip(col_i - (U*gram[:,i] - rhs[:,i]) /
// (gram[i,i] + 1)). The +1 keeps dead atoms (zero diagonal, zero rhs) fixed.
// Never increases q beyond rounding.
Matrix update_factor(const Matrix& u, const ModeQuadratic& quad, const FactorSettings& settings);

// Quadratic part of the averaged surrogate objective held by the aggregates:
//   tr(a * code_gram(L)) - 2 * sum_r <slice_r(b), atom_r(L)>,
// computed by per-atom contractions (no dense dictionary).
double surrogate_quadratic(const Matrix& a, const DenseTensor& b, const LoadingSet& loadings);

// Value of one mode's quadratic at a given factor.
double quadratic_value(const Matrix& u, const ModeQuadratic& quad);

enum class SweepMode {
  sequential,  // rebuild each mode's quadratic from the already-updated factors
  frozen,      // build every quadratic from the pre-sweep factors (diagnostic variant)
};

struct SweepDiagnostics {
  std::vector<double> gram_min_eigenvalue;  // per mode, at its sweep position
  std::vector<double> displacement_sq;      // per mode, ||U_j' - U_j||_F^2
};

// One full pass updating every factor against aggregates (a, b).
LoadingSet sweep_loadings(const Matrix& a, const DenseTensor& b, const LoadingSet& loadings,
                          const FactorSettings& settings, SweepMode mode = SweepMode::sequential,
                          SweepDiagnostics* diagnostics = nullptr);

}  // namespace ocpdl
