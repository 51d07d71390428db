#pragma once

#include <filesystem>
#include <vector>

#include "ocpdl/online.hpp"
#include "ocpdl/rng.hpp"
#include "ocpdl/tensor.hpp"

namespace ocpdl {

// Finite-state chain with one observation tensor per state.
struct MarkovChainSpec {
  Matrix transition;                       // k x k, rows sum to 1
  std::vector<DenseTensor> observations;   // k tensors sharing one shape
  std::int64_t initial_state = 0;

  std::int64_t state_count() const { return transition.rows(); }
  // Throws ConfigError / ShapeError when the fields are inconsistent.
  void validate() const;
};

// Sample the successor state from the transition row using one uniform draw
// (inverse CDF over the row).
std::int64_t markov_next(const MarkovChainSpec& spec, std::int64_t state, Rng& rng);

// Probability vector pi with pi P = pi, found by damped power iteration
// pi <- pi (I + P) / 2. Requires every state to reach every other through
// positive-probability edges; throws ReducibleChainError otherwise.
Vector stationary_dist(const Matrix& transition);
Vector stationary_dist(const MarkovChainSpec& spec);

// Emits `length` minibatches; each advances the chain `b` steps and stacks the
// visited states' observations along a fresh trailing mode. Non-irreducible or
// possibly periodic chains are accepted with a stderr warning.
BatchStream markov_tensor_stream(const MarkovChainSpec& spec, std::int64_t length,
                                 std::int64_t b, Rng rng);

// Plain-text chain description: first line k, then k rows of the transition
// matrix, then k paths (resolved relative to the file) of DTF1 observations.
MarkovChainSpec read_markov_spec(const std::filesystem::path& path);

// Ground-truth factorization whose last mode is subsampled into minibatches.
struct SyntheticCPSpec {
  LoadingSet true_loadings;   // all modes, entries in [0, 1]
  std::int64_t subsample = 1; // last-mode coordinates per batch
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticStream {
  DenseTensor full;     // the complete ground-truth tensor
  BatchStream batches;  // emits the requested number of subsampled batches
};

// Each batch picks `subsample` distinct last-mode coordinates uniformly at
// random (fresh draw every batch) and gathers the matching slices.
SyntheticStream synthetic_stream(const SyntheticCPSpec& spec, std::int64_t batches);

// The subsampling engine behind synthetic_stream, usable for any full tensor:
// emits `batches` minibatches of `subsample` distinct last-mode slices each.
BatchStream subsample_stream(DenseTensor full, std::int64_t subsample,
                             std::int64_t batches, Rng rng);

// Binary PPM ("P6", maxval 255) -> H x W x 3 tensor with values in [0, 1].
DenseTensor ppm_read(const std::filesystem::path& path);
// Inverse of ppm_read at 1/255 quantization; values are clamped to [0, 1].
void ppm_write(const DenseTensor& image, const std::filesystem::path& path);

// The size x size x 3 subtensor of `image` anchored at (row, col).
DenseTensor extract_patch(const DenseTensor& image, std::int64_t row, std::int64_t col,
                          std::int64_t size);

// Emits `batches` minibatches of `per_batch` square patches each, with
// uniformly random top-left corners (patches may overlap).
BatchStream patch_stream(DenseTensor image, std::int64_t size, std::int64_t batches,
                         std::int64_t per_batch, Rng rng);

}  // namespace ocpdl
