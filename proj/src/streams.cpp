#include "ocpdl/streams.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ocpdl/baselines.hpp"

namespace ocpdl {

namespace {

// Reachability over the positive-entry edges, from `start`, following either
// rows (forward) or columns (backward).
std::vector<bool> reachable(const Matrix& p, std::int64_t start, bool forward) {
  const std::int64_t k = p.rows();
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  std::deque<std::int64_t> frontier{start};
  seen[static_cast<std::size_t>(start)] = true;
  while (!frontier.empty()) {
    const std::int64_t u = frontier.front();
    frontier.pop_front();
    for (std::int64_t v = 0; v < k; ++v) {
      const double edge = forward ? p(u, v) : p(v, u);
      if (edge > 0.0 && !seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        frontier.push_back(v);
      }
    }
  }
  return seen;
}

bool is_irreducible(const Matrix& p) {
  const std::vector<bool> fwd = reachable(p, 0, true);
  const std::vector<bool> bwd = reachable(p, 0, false);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

// Period of an irreducible chain: gcd over edges (u,v) of level(u) + 1 -
// level(v), with levels from a breadth-first search on the edge graph.
std::int64_t chain_period(const Matrix& p) {
  const std::int64_t k = p.rows();
  std::vector<std::int64_t> level(static_cast<std::size_t>(k), -1);
  std::deque<std::int64_t> frontier{0};
  level[0] = 0;
  while (!frontier.empty()) {
    const std::int64_t u = frontier.front();
    frontier.pop_front();
    for (std::int64_t v = 0; v < k; ++v) {
      if (p(u, v) > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        frontier.push_back(v);
      }
    }
  }
  std::int64_t g = 0;
  for (std::int64_t u = 0; u < k; ++u)
    for (std::int64_t v = 0; v < k; ++v)
      if (p(u, v) > 0.0) {
        const std::int64_t diff = level[static_cast<std::size_t>(u)] + 1 -
                                  level[static_cast<std::size_t>(v)];
        g = std::gcd(g, std::abs(diff));
      }
  // Irreducibility guarantees a cycle, hence at least one nonzero difference.
  return g == 0 ? 1 : g;
}

void check_row_stochastic(const Matrix& p) {
  if (p.rows() < 1 || p.rows() != p.cols()) {
    throw ShapeError("transition matrix must be square and nonempty");
  }
  if (!p.allFinite() || p.minCoeff() < 0.0) {
    throw ConfigError("transition probabilities must be finite and nonnegative");
  }
  for (std::int64_t i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > 1e-12) {
      throw ConfigError("transition row " + std::to_string(i) + " sums to " +
                        std::to_string(p.row(i).sum()) + ", not 1");
    }
  }
}

}  // namespace

void MarkovChainSpec::validate() const {
  check_row_stochastic(transition);
  const std::int64_t k = transition.rows();
  if (static_cast<std::int64_t>(observations.size()) != k) {
    throw ShapeError("need exactly one observation tensor per state");
  }
  for (const DenseTensor& obs : observations) {
    if (obs.shape() != observations.front().shape()) {
      throw ShapeError("observation tensors must share one shape");
    }
    if (!obs.all_finite()) throw NumericError("observation tensor has non-finite entries");
  }
  if (initial_state < 0 || initial_state >= k) {
    throw ConfigError("initial state out of range");
  }
}

std::int64_t markov_next(const MarkovChainSpec& spec, std::int64_t state, Rng& rng) {
  const std::int64_t k = spec.transition.rows();
  if (state < 0 || state >= k) throw ConfigError("chain state out of range");
  const double u = rng.uniform01();
  double acc = 0.0;
  std::int64_t last_positive = -1;
  for (std::int64_t j = 0; j < k; ++j) {
    const double pj = spec.transition(state, j);
    if (pj > 0.0) last_positive = j;
    acc += pj;
    if (u < acc) return j;
  }
  return last_positive;  // u landed in the rounding gap below 1
}

Vector stationary_dist(const Matrix& transition) {
  check_row_stochastic(transition);
  if (!is_irreducible(transition)) {
    throw ReducibleChainError("chain is reducible; no unique stationary distribution");
  }
  const std::int64_t k = transition.rows();
  Vector pi = Vector::Constant(k, 1.0 / static_cast<double>(k));
  for (int iter = 0; iter < 1000000; ++iter) {
    // Damped step: the lazy chain (I + P)/2 has the same stationary vector
    // and converges even for periodic transition structures.
    Vector next = 0.5 * (pi + transition.transpose() * pi);
    next /= next.sum();
    const double delta = (next - pi).cwiseAbs().sum();
    pi = std::move(next);
    if (delta <= 5e-14) break;
  }
  if ((transition.transpose() * pi - pi).cwiseAbs().sum() > 1e-10) {
    throw NumericError("stationary distribution iteration did not converge");
  }
  return pi;
}

Vector stationary_dist(const MarkovChainSpec& spec) {
  spec.validate();
  return stationary_dist(spec.transition);
}

BatchStream markov_tensor_stream(const MarkovChainSpec& spec, std::int64_t length,
                                 std::int64_t b, Rng rng) {
  spec.validate();
  if (length < 1) throw ConfigError("stream length must be at least 1");
  if (b < 1) throw ConfigError("batch size must be at least 1");
  if (!is_irreducible(spec.transition)) {
    std::fprintf(stderr, "warning: transition matrix is not irreducible; the stream is "
                         "well defined but mixing guarantees do not apply\n");
  } else if (chain_period(spec.transition) != 1) {
    std::fprintf(stderr, "warning: transition matrix is periodic; the stream is well "
                         "defined but mixing guarantees do not apply\n");
  }
  auto shared = std::make_shared<MarkovChainSpec>(spec);
  return [shared, state = spec.initial_state, remaining = length, b,
          rng]() mutable -> std::optional<DenseTensor> {
    if (remaining == 0) return std::nullopt;
    --remaining;
    std::vector<DenseTensor> slices;
    slices.reserve(static_cast<std::size_t>(b));
    for (std::int64_t s = 0; s < b; ++s) {
      state = markov_next(*shared, state, rng);
      slices.push_back(shared->observations[static_cast<std::size_t>(state)]);
    }
    return stack_last_mode(slices);
  };
}

MarkovChainSpec read_markov_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chain description " + path.string());
  std::int64_t k = 0;
  if (!(in >> k) || k < 1) throw IoError("chain description must start with a positive state count");
  MarkovChainSpec spec;
  spec.transition.resize(k, k);
  for (std::int64_t i = 0; i < k; ++i)
    for (std::int64_t j = 0; j < k; ++j)
      if (!(in >> spec.transition(i, j))) {
        throw IoError("chain description is missing transition entries");
      }
  for (std::int64_t i = 0; i < k; ++i) {
    std::string token;
    if (!(in >> token)) throw IoError("chain description is missing observation paths");
    std::filesystem::path obs_path(token);
    if (obs_path.is_relative()) obs_path = path.parent_path() / obs_path;
    spec.observations.push_back(read_dtf1(obs_path));
  }
  spec.validate();
  return spec;
}

void SyntheticCPSpec::validate() const {
  if (true_loadings.mode_count() < 2) {
    throw ConfigError("ground truth needs at least two modes");
  }
  for (const Matrix& f : true_loadings.factors()) {
    if (f.minCoeff() < 0.0 || f.maxCoeff() > 1.0) {
      throw ConfigError("ground-truth factor entries must lie in [0, 1]");
    }
  }
  const std::int64_t n_slices = true_loadings.factors().back().rows();
  if (subsample < 1 || subsample > n_slices) {
    throw ConfigError("subsample count must lie in [1, last-mode length]");
  }
}

SyntheticStream synthetic_stream(const SyntheticCPSpec& spec, std::int64_t batches) {
  spec.validate();
  SyntheticStream out;
  out.full = cp_reconstruct(spec.true_loadings);
  out.batches = subsample_stream(out.full, spec.subsample, batches, Rng(spec.seed));
  return out;
}

BatchStream subsample_stream(DenseTensor full, std::int64_t subsample,
                             std::int64_t batches, Rng rng) {
  if (full.shape().size() < 2) throw ShapeError("subsampling needs at least two modes");
  const std::int64_t n_slices = full.shape().back();
  if (subsample < 1 || subsample > n_slices) {
    throw ConfigError("subsample count must lie in [1, last mode extent]");
  }
  if (batches < 1) throw ConfigError("batch count must be at least 1");
  return [full = std::move(full), n_slices, m = subsample, remaining = batches,
          rng]() mutable -> std::optional<DenseTensor> {
    if (remaining == 0) return std::nullopt;
    --remaining;
    std::vector<std::int64_t> pool(static_cast<std::size_t>(n_slices));
    std::iota(pool.begin(), pool.end(), std::int64_t{0});
    for (std::int64_t i = 0; i < m; ++i) {
      const std::int64_t j =
          i + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(n_slices - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    return gather_last_mode(full,
                            std::span<const std::int64_t>(pool.data(),
                                                          static_cast<std::size_t>(m)));
  };
}

DenseTensor ppm_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw IoError("image " + path.string() + " is not binary PPM (P6)");
  }
  pos = 2;
  const auto next_int = [&bytes, &pos, &path]() -> std::int64_t {
    // Skip whitespace and '#' comment lines between header fields.
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw IoError("image " + path.string() + " has a malformed header");
    }
    std::int64_t value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
    }
    return value;
  };
  const std::int64_t width = next_int();
  const std::int64_t height = next_int();
  const std::int64_t maxval = next_int();
  if (width < 1 || height < 1) throw IoError("image " + path.string() + " has empty dimensions");
  if (maxval != 255) {
    throw IoError("image " + path.string() + " has maxval " + std::to_string(maxval) +
                  "; only 255 is supported");
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw IoError("image " + path.string() + " has a malformed header");
  }
  ++pos;  // single whitespace byte separates header and raster

  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - pos < need) throw IoError("image " + path.string() + " is truncated");
  if (bytes.size() - pos > need) {
    throw IoError("image " + path.string() + " has trailing bytes after the raster");
  }

  DenseTensor out{Shape{height, width, 3}};
  for (std::int64_t i = 0; i < height; ++i)
    for (std::int64_t j = 0; j < width; ++j)
      for (std::int64_t c = 0; c < 3; ++c) {
        const unsigned char byte = static_cast<unsigned char>(
            bytes[pos + static_cast<std::size_t>(3 * (width * i + j) + c)]);
        out.at({i, j, c}) = static_cast<double>(byte) / 255.0;
      }
  return out;
}

void ppm_write(const DenseTensor& image, const std::filesystem::path& path) {
  if (image.mode_count() != 3 || image.dim(2) != 3) {
    throw ShapeError("image tensor must have shape H x W x 3");
  }
  if (!image.all_finite()) throw NumericError("image tensor has non-finite entries");
  const std::int64_t height = image.dim(0);
  const std::int64_t width = image.dim(1);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P6\n" << width << " " << height << "\n255\n";
  for (std::int64_t i = 0; i < height; ++i)
    for (std::int64_t j = 0; j < width; ++j)
      for (std::int64_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at({i, j, c}), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::llround(v * 255.0))));
      }
  if (!out) throw IoError("short write to image " + path.string());
}

DenseTensor extract_patch(const DenseTensor& image, std::int64_t row, std::int64_t col,
                          std::int64_t size) {
  if (image.mode_count() != 3 || image.dim(2) != 3) {
    throw ShapeError("image tensor must have shape H x W x 3");
  }
  if (size < 1 || row < 0 || col < 0 || row + size > image.dim(0) ||
      col + size > image.dim(1)) {
    throw ShapeError("patch does not fit inside the image");
  }
  DenseTensor out{Shape{size, size, 3}};
  for (std::int64_t a = 0; a < size; ++a)
    for (std::int64_t b = 0; b < size; ++b)
      for (std::int64_t c = 0; c < 3; ++c) out.at({a, b, c}) = image.at({row + a, col + b, c});
  return out;
}

BatchStream patch_stream(DenseTensor image, std::int64_t size, std::int64_t batches,
                         std::int64_t per_batch, Rng rng) {
  if (image.mode_count() != 3 || image.dim(2) != 3) {
    throw ShapeError("image tensor must have shape H x W x 3");
  }
  if (size < 1 || size > std::min(image.dim(0), image.dim(1))) {
    throw ShapeError("patch size must fit inside the image");
  }
  if (batches < 1 || per_batch < 1) throw ConfigError("patch stream needs positive counts");
  return [image = std::move(image), size, remaining = batches, per_batch,
          rng]() mutable -> std::optional<DenseTensor> {
    if (remaining == 0) return std::nullopt;
    --remaining;
    std::vector<DenseTensor> parts;
    parts.reserve(static_cast<std::size_t>(per_batch));
    for (std::int64_t s = 0; s < per_batch; ++s) {
      const std::int64_t row = static_cast<std::int64_t>(
          rng.uniform_index(static_cast<std::uint64_t>(image.dim(0) - size + 1)));
      const std::int64_t col = static_cast<std::int64_t>(
          rng.uniform_index(static_cast<std::uint64_t>(image.dim(1) - size + 1)));
      parts.push_back(extract_patch(image, row, col, size));
    }
    return stack_last_mode(parts);
  };
}

}  // namespace ocpdl
