#pragma once

#include <limits>

#include "ocpdl/tensor.hpp"

namespace ocpdl {

// Nonnegative code matrix, rank x batch.
using CodeMatrix = Matrix;

struct CodingSettings {
  double lambda = 0.0;  // l1 penalty weight, >= 0
  double c_max = std::numeric_limits<double>::infinity();  // upper box bound per entry
  double tol = 1e-8;    // stop when the iterate change <= tol*(1+||C||_F)
  int max_iters = 200;
  double ridge = 0.0;   // optional diagonal regularizer added to the Gram
};

// Gram of the implicit dictionary: Hadamard product of the factor Grams,
// R x R, symmetric PSD. The dense dictionary is never formed.
Matrix code_gram(const LoadingSet& loadings, double ridge = 0.0);

// Entry (r, s) = inner product of minibatch slice s with atom r, computed by
// contracting the slice with the factors' r-th columns mode by mode.
Matrix code_rhs(const DenseTensor& batch, const LoadingSet& loadings);

struct CodingResult {
  CodeMatrix code;       // entries in [0, c_max]
  double objective = 0;  // ||X - recon||_F^2 + lambda * sum(code)
  double fit = 0;        // ||X - recon||_F^2 alone
  int iterations = 0;
};

// Approximate minimizer of ||X - recon(C)||_F^2 + lambda*||C||_1 over the
// nonnegative box, by projected gradient steps
//   C <- clip(C - eta * (2 G C - 2 P + lambda), 0, c_max),  eta = 1/(2 tr G),
// started at C = 0 (or at *start when given). With lambda = 0 and a singular
// Gram the minimizer can be non-unique along null directions; iterates stay
// bounded and the objective still converges.
CodingResult sparse_code(const DenseTensor& batch, const LoadingSet& loadings,
                         const CodingSettings& settings, const CodeMatrix* start = nullptr);

// Objective of a fixed code, no optimization. Uses the Gram identity
// ||X - recon||^2 = ||X||^2 - 2<P,C> + <C,GC> (clamped at zero against
// rounding) so no reconstruction is materialized.
double coding_objective(const DenseTensor& batch, const LoadingSet& loadings, const Matrix& code,
                        double lambda);

}  // namespace ocpdl
