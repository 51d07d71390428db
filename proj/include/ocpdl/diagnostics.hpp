#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "ocpdl/online.hpp"

namespace ocpdl {

struct InvariantReport {
  std::string name;
  bool applicable = true;  // false: precondition absent (reported as N/A)
  bool pass = false;
  double worst = 0.0;        // smallest margin seen; negative means violated
  std::int64_t worst_t = 0;  // step where the worst margin occurred
  std::string detail;
};

// Drives the online learner over the stream in full-history mode and checks
// every step-wise guarantee the trace supports:
//   - the surrogate stays above the re-coded empirical loss (slack 1e-8)
//   - factor sweeps never increase the freshly averaged surrogate (slack 1e-9)
//   - each sweep's decrease covers curvature x squared movement (slack 1e-6)
//   - per-step surrogate growth is bounded by the new batch's excess loss
//     (slack 1e-8)
//   - with lambda > 0: code and aggregate norms respect their a-priori bounds
//     (slack 1e-9 absolute, 1e-6 relative); reported N/A when lambda = 0
// Reports come back in that fixed order.
std::vector<InvariantReport> diagnose(const BatchStream& stream, RunConfig cfg);

// One line per report; returns true iff no applicable check failed.
bool print_reports(const std::vector<InvariantReport>& reports, std::FILE* out);

}  // namespace ocpdl
