#include "ocpdl/online.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ocpdl {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_batch_against(const LoadingSet& loadings, const DenseTensor& batch) {
  if (batch.mode_count() != loadings.mode_count() + 1) {
    throw ShapeError("minibatch must carry a sample mode after the data modes");
  }
  for (std::int64_t j = 0; j < loadings.mode_count(); ++j) {
    if (batch.dim(j) != loadings.dim(j)) {
      throw ShapeError("minibatch mode " + std::to_string(j) + " extent " +
                       std::to_string(batch.dim(j)) + " does not match loadings extent " +
                       std::to_string(loadings.dim(j)));
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  if (rank < 1) throw ConfigError("rank must be at least 1");
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  if (iterations < 1) throw ConfigError("iteration budget must be at least 1");
  if (coding.lambda < 0) throw ConfigError("lambda must be nonnegative");
  if (!balanced) {
    if (!(beta > 0.0) || beta > 1.0) {
      throw ConfigError("weight exponent must lie in (0, 1]");
    }
    if (beta <= 0.75) {
      std::fprintf(stderr,
                   "warning: weight exponent %.6g is outside (3/4, 1]; "
                   "averaging guarantees do not apply\n",
                   beta);
    }
  }
}

double weight_at(std::int64_t t, const RunConfig& cfg) {
  if (t < 1) throw ConfigError("weight index must be at least 1");
  if (cfg.balanced) return 1.0 / static_cast<double>(t);
  return std::pow(static_cast<double>(t), -cfg.beta);
}

AggregateState init_state(const RunConfig& cfg, const Shape& data_shape) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).split(1);
  return init_state(cfg, random_loadings(data_shape, cfg.rank, rng));
}

AggregateState init_state(const RunConfig& cfg, const LoadingSet& initial) {
  cfg.validate();
  if (initial.rank() != cfg.rank) {
    throw ShapeError("initial loadings have rank " + std::to_string(initial.rank()) +
                     ", config expects " + std::to_string(cfg.rank));
  }
  AggregateState state;
  state.loadings = initial;
  state.a = Matrix::Zero(cfg.rank, cfg.rank);
  Shape agg_shape = initial.shape();
  agg_shape.push_back(cfg.rank);
  state.b = DenseTensor{agg_shape};
  return state;
}

TraceRecord step(AggregateState& state, const DenseTensor& batch, const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_batch_against(state.loadings, batch);
  if (!state.warned_negative && batch.min_value() < 0.0) {
    std::fprintf(stderr, "warning: minibatch has negative entries; the model assumes "
                         "nonnegative data\n");
    state.warned_negative = true;
  }

  const std::int64_t n = state.loadings.mode_count();
  const std::int64_t t_new = state.t + 1;
  const double w = weight_at(t_new, cfg);
  const double lambda = cfg.coding.lambda;
  const double batch_sq = batch.vec().squaredNorm();

  const CodingResult coded = sparse_code(batch, state.loadings, cfg.coding);
  if (lambda > 0.0) {
    const double bound = batch_sq * batch_sq / (lambda * lambda);
    if (coded.code.squaredNorm() > bound + 1e-9 + 1e-6 * bound) {
      throw NumericError("code norm exceeded its theoretical bound");
    }
  }

  Matrix a_next = (1.0 - w) * state.a + w * (coded.code * coded.code.transpose());
  state.a = 0.5 * (a_next + a_next.transpose());
  const DenseTensor folded = mode_product(batch, coded.code, n);
  state.b.vec() = (1.0 - w) * state.b.vec() + w * folded.vec();
  state.offset = (1.0 - w) * state.offset + w * (batch_sq + lambda * coded.code.sum());

  const LoadingSet previous = state.loadings;
  SweepDiagnostics sweep_diag;
  SweepDiagnostics* diag_ptr = cfg.keep_history ? &sweep_diag : nullptr;
  state.loadings =
      sweep_loadings(state.a, state.b, previous, cfg.factor, cfg.sweep_mode, diag_ptr);
  state.t = t_new;
  state.max_batch_norm = std::max(state.max_batch_norm, std::sqrt(batch_sq));
  state.surrogate = surrogate_quadratic(state.a, state.b, state.loadings) + state.offset;

  if (lambda > 0.0) {
    const double m = state.max_batch_norm;
    const double a_bound = std::pow(m, 4) / (lambda * lambda);
    const double b_bound = std::pow(m, 3) / lambda;
    if (state.a.norm() > a_bound + 1e-9 + 1e-6 * a_bound ||
        state.b.frobenius_norm() > b_bound + 1e-9 + 1e-6 * b_bound) {
      throw NumericError("aggregate norms exceeded their theoretical bounds");
    }
  }

  TraceRecord rec;
  rec.t = t_new;
  rec.weight = w;
  rec.surrogate = state.surrogate;
  rec.batch_loss = coded.objective;
  rec.displacement = loading_distance(previous, state.loadings);
  rec.code_norm = coded.code.norm();
  if (cfg.keep_history) {
    state.history.push_back(batch);
    rec.sweep = std::move(sweep_diag);
    rec.empirical = empirical_loss(state.history, state.loadings, cfg);
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

FitResult fit(const BatchStream& stream, const RunConfig& cfg) {
  cfg.validate();
  std::optional<DenseTensor> first = stream();
  if (!first.has_value()) throw ConfigError("stream yielded no batches");
  if (first->mode_count() < 2) throw ShapeError("minibatch needs at least one data mode");
  const Shape data_shape(first->shape().begin(), first->shape().end() - 1);
  AggregateState state = init_state(cfg, data_shape);
  FitResult out;
  out.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  out.trace.push_back(step(state, *first, cfg));
  while (state.t < cfg.iterations) {
    std::optional<DenseTensor> batch = stream();
    if (!batch.has_value()) break;
    out.trace.push_back(step(state, *batch, cfg));
  }
  out.loadings = state.loadings;
  out.state = std::move(state);
  return out;
}

FitResult fit(const BatchStream& stream, const RunConfig& cfg, const LoadingSet& initial) {
  cfg.validate();
  AggregateState state = init_state(cfg, initial);
  FitResult out;
  bool any = false;
  while (state.t < cfg.iterations) {
    std::optional<DenseTensor> batch = stream();
    if (!batch.has_value()) break;
    any = true;
    out.trace.push_back(step(state, *batch, cfg));
  }
  if (!any) throw ConfigError("stream yielded no batches");
  out.loadings = state.loadings;
  out.state = std::move(state);
  return out;
}

FitResult fit(std::span<const DenseTensor> batches, const RunConfig& cfg) {
  std::size_t next = 0;
  return fit(
      [&batches, &next]() -> std::optional<DenseTensor> {
        if (next >= batches.size()) return std::nullopt;
        return batches[next++];
      },
      cfg);
}

double empirical_loss(std::span<const DenseTensor> history, const LoadingSet& loadings,
                      const RunConfig& cfg) {
  if (history.empty()) throw ConfigError("empirical loss requires stored history");
  double value = 0.0;
  for (std::size_t s = 0; s < history.size(); ++s) {
    const double w = weight_at(static_cast<std::int64_t>(s) + 1, cfg);
    const CodingResult coded = sparse_code(history[s], loadings, cfg.coding);
    value = (1.0 - w) * value + w * coded.objective;
  }
  return value;
}

void save_checkpoint(const AggregateState& state, const RunConfig& cfg,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_dtf1(state.a, dir / "A.dtf1");
  write_dtf1(state.b, dir / "B.dtf1");
  for (std::int64_t j = 0; j < state.loadings.mode_count(); ++j) {
    write_dtf1(state.loadings.factor(j), dir / ("U" + std::to_string(j + 1) + ".dtf1"));
  }
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write checkpoint manifest in " + dir.string());
  manifest << "t=" << state.t << "\n";
  manifest << "R=" << cfg.rank << "\n";
  manifest << "b=" << cfg.batch << "\n";
  manifest << "beta=" << format_double(cfg.beta) << "\n";
  manifest << "balanced=" << (cfg.balanced ? 1 : 0) << "\n";
  manifest << "lambda=" << format_double(cfg.coding.lambda) << "\n";
  manifest << "seed=" << cfg.seed << "\n";
  manifest << "c=" << format_double(state.offset) << "\n";
  manifest << "fhat=" << format_double(state.surrogate) << "\n";
  manifest << "max_batch_norm=" << format_double(state.max_batch_norm) << "\n";
  if (!manifest) throw IoError("short write to checkpoint manifest in " + dir.string());
}

std::pair<AggregateState, RunConfig> load_checkpoint(const std::filesystem::path& dir,
                                                     RunConfig base) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot open checkpoint manifest in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed manifest line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("checkpoint manifest missing key " + key);
    return it->second;
  };

  base.rank = std::stoll(need("R"));
  base.batch = std::stoll(need("b"));
  base.beta = std::stod(need("beta"));
  base.balanced = std::stoi(need("balanced")) != 0;
  base.coding.lambda = std::stod(need("lambda"));
  base.seed = std::stoull(need("seed"));

  AggregateState state;
  state.t = std::stoll(need("t"));
  state.offset = std::stod(need("c"));
  state.surrogate = std::stod(need("fhat"));
  state.max_batch_norm = std::stod(need("max_batch_norm"));
  state.a = read_dtf1_matrix(dir / "A.dtf1");
  state.b = read_dtf1(dir / "B.dtf1");
  const std::int64_t n = state.b.mode_count() - 1;
  if (n < 1) throw IoError("checkpoint aggregate tensor has too few modes");
  std::vector<Matrix> factors;
  for (std::int64_t j = 0; j < n; ++j) {
    factors.push_back(read_dtf1_matrix(dir / ("U" + std::to_string(j + 1) + ".dtf1")));
  }
  state.loadings = LoadingSet(std::move(factors));
  if (state.loadings.rank() != base.rank || state.a.rows() != base.rank ||
      state.a.cols() != base.rank || state.b.dim(n) != base.rank) {
    throw IoError("checkpoint rank is inconsistent across files");
  }
  if (state.loadings.shape() != Shape(state.b.shape().begin(), state.b.shape().end() - 1)) {
    throw IoError("checkpoint factor shapes do not match the aggregate tensor");
  }
  return {std::move(state), base};
}

}  // namespace ocpdl
