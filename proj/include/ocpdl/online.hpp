#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ocpdl/coding.hpp"
#include "ocpdl/dict_update.hpp"
#include "ocpdl/tensor.hpp"

namespace ocpdl {

struct RunConfig {
  std::int64_t rank = 1;
  std::int64_t batch = 1;      // samples per minibatch the stream is expected to deliver
  double beta = 1.0;           // weight exponent for w_t = t^-beta
  bool balanced = false;       // w_t = 1/t instead
  std::int64_t iterations = 1; // batch budget T
  std::uint64_t seed = 0;
  CodingSettings coding;       // carries lambda
  FactorSettings factor;       // carries u_max
  SweepMode sweep_mode = SweepMode::sequential;
  bool keep_history = false;   // store batches so empirical loss can be evaluated

  // Throws ConfigError on out-of-range fields; beta outside (3/4, 1] is
  // allowed but logged to stderr (averaging guarantees no longer apply).
  void validate() const;
};

// w_t for 1-based step t.
double weight_at(std::int64_t t, const RunConfig& cfg);

struct TraceRecord {
  std::int64_t t = 0;
  double weight = 0.0;
  double surrogate = 0.0;     // running surrogate objective at the new loadings
  double batch_loss = 0.0;    // coding objective of this batch against the previous loadings
  double displacement = 0.0;  // Frobenius distance between consecutive loading sets
  double code_norm = 0.0;
  double wall_seconds = 0.0;
  std::optional<double> empirical;         // history-mode weighted loss at the new loadings
  std::optional<double> abs_err;           // filled by runners that know a reference tensor
  std::optional<double> rel_err;
  std::optional<SweepDiagnostics> sweep;   // history mode: per-mode curvature and movement
};

struct AggregateState {
  Matrix a;             // rank x rank code Gram average
  DenseTensor b;        // data-shape x rank contraction average
  LoadingSet loadings;
  std::int64_t t = 0;
  double offset = 0.0;          // running weighted (||X||^2 + lambda*||C||_1) term
  double surrogate = 0.0;       // surrogate objective at the current loadings
  double max_batch_norm = 0.0;  // largest minibatch Frobenius norm seen
  bool warned_negative = false;
  std::vector<DenseTensor> history;  // only filled in keep_history mode
};

// Fresh state with zero aggregates and loadings drawn uniform[0,1) from the
// run seed (or supplied explicitly).
AggregateState init_state(const RunConfig& cfg, const Shape& data_shape);
AggregateState init_state(const RunConfig& cfg, const LoadingSet& initial);

// One online iteration: code the batch against the current loadings, fold the
// code into the aggregates, then refresh every factor in ascending mode order
// against the updated aggregates (each mode seeing its predecessors' new
// values). The batch may carry any sample count >= 1 in its last mode.
TraceRecord step(AggregateState& state, const DenseTensor& batch, const RunConfig& cfg);

// Pull-based minibatch source; empty optional ends the stream.
using BatchStream = std::function<std::optional<DenseTensor>()>;

struct FitResult {
  LoadingSet loadings;
  std::vector<TraceRecord> trace;
  AggregateState state;
};

// Folds step over the stream for min(iterations, stream length) batches.
// The data shape is taken from the first batch. Throws on an empty stream.
FitResult fit(const BatchStream& stream, const RunConfig& cfg);
FitResult fit(const BatchStream& stream, const RunConfig& cfg, const LoadingSet& initial);
FitResult fit(std::span<const DenseTensor> batches, const RunConfig& cfg);

// Weighted average of the coding losses of every stored batch against L,
// using the same weight recursion as the online surrogate.
double empirical_loss(std::span<const DenseTensor> history, const LoadingSet& loadings,
                      const RunConfig& cfg);

// --- checkpoints ---------------------------------------------------------
// A checkpoint directory holds manifest.txt (key=value lines: t, R, b, beta,
// balanced, lambda, seed, c, fhat, max_batch_norm) plus A.dtf1, B.dtf1 and
// U1.dtf1..Un.dtf1. Numbers round-trip exactly, so a resumed run continues
// bit-identically (history-mode state is not persisted).

void save_checkpoint(const AggregateState& state, const RunConfig& cfg,
                     const std::filesystem::path& dir);

// Returns the restored state plus the base config with the persisted fields
// (rank, batch, beta, balanced, lambda, seed) overwritten from the manifest.
std::pair<AggregateState, RunConfig> load_checkpoint(const std::filesystem::path& dir,
                                                     RunConfig base);

}  // namespace ocpdl
