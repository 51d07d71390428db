#pragma once

#include "ocpdl/coding.hpp"
#include "ocpdl/dict_update.hpp"
#include "ocpdl/online.hpp"

namespace ocpdl {

// Full tensor from all n factors: entry (i_1..i_n) = sum_r prod_j U_j(i_j, r).
DenseTensor cp_reconstruct(const LoadingSet& loadings);

// One alternating pass: for each mode in ascending order, solve the boxed
// least-squares subproblem against the already-updated other factors. The
// full-tensor squared residual never increases across the pass.
LoadingSet als_sweep(const DenseTensor& x, const LoadingSet& loadings,
                     const FactorSettings& settings);

// One multiplicative pass: U_j <- U_j .* rhs ./ (U_j * gram + 1e-12), mode by
// mode. Entries stay nonnegative with no projection; zero entries are fixed
// points.
LoadingSet mu_sweep(const DenseTensor& x, const LoadingSet& loadings);

// Complete a loading set that misses its last factor: code every last-mode
// slice of x against the partial atoms and transpose the codes into the
// missing factor. Equivalent to one constrained least-squares step for that
// factor when lambda = 0.
LoadingSet refit_last_mode(const DenseTensor& x_full, const LoadingSet& partial,
                           const CodingSettings& coding);

struct BaselineSettings {
  std::int64_t rank = 1;
  std::int64_t sweeps = 50;
  std::uint64_t seed = 0;
  FactorSettings factor;  // inner solver knobs for the alternating pass
  void validate() const;
};

struct BaselineResult {
  LoadingSet loadings;
  std::vector<TraceRecord> trace;  // one record per sweep; errors vs x filled in
};

// Run repeated sweeps from a seeded uniform[0,1) start, recording the
// reconstruction error after each pass. wall_seconds covers the pass itself,
// not the error evaluation.
BaselineResult run_als(const DenseTensor& x, const BaselineSettings& settings);
BaselineResult run_mu(const DenseTensor& x, const BaselineSettings& settings);

}  // namespace ocpdl
