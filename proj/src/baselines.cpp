#include "ocpdl/baselines.hpp"

#include <chrono>

namespace ocpdl {

namespace {

void check_full_tensor(const DenseTensor& x, const LoadingSet& loadings) {
  if (loadings.mode_count() < 2) {
    throw ShapeError("offline factorization needs at least two modes");
  }
  if (x.shape() != loadings.shape()) {
    throw ShapeError("tensor shape " + shape_to_string(x.shape()) +
                     " does not match loadings shape " + shape_to_string(loadings.shape()));
  }
}

}  // namespace

DenseTensor cp_reconstruct(const LoadingSet& loadings) {
  if (loadings.mode_count() < 2) {
    throw ShapeError("reconstruction needs at least two modes");
  }
  std::vector<Matrix> head(loadings.factors().begin(), loadings.factors().end() - 1);
  const Matrix code = loadings.factors().back().transpose();
  return cp_eval(LoadingSet(std::move(head)), code);
}

LoadingSet als_sweep(const DenseTensor& x, const LoadingSet& loadings,
                     const FactorSettings& settings) {
  check_full_tensor(x, loadings);
  LoadingSet work = loadings;
  for (std::int64_t j = 0; j < work.mode_count(); ++j) {
    const ModeQuadratic quad = mode_quadratic_full(x, work, j);
    work.factor(j) = update_factor(work.factor(j), quad, settings);
  }
  return work;
}

LoadingSet mu_sweep(const DenseTensor& x, const LoadingSet& loadings) {
  check_full_tensor(x, loadings);
  if (x.min_value() < 0.0) {
    throw NumericError("multiplicative updates require nonnegative data");
  }
  LoadingSet work = loadings;
  for (std::int64_t j = 0; j < work.mode_count(); ++j) {
    const ModeQuadratic quad = mode_quadratic_full(x, work, j);
    Matrix& u = work.factor(j);
    const Matrix denom = (u * quad.gram).array() + 1e-12;
    u = u.cwiseProduct(quad.rhs).cwiseQuotient(denom);
    if (!u.allFinite()) throw NumericError("multiplicative update produced non-finite entries");
  }
  return work;
}

LoadingSet refit_last_mode(const DenseTensor& x_full, const LoadingSet& partial,
                           const CodingSettings& coding) {
  const CodingResult coded = sparse_code(x_full, partial, coding);
  std::vector<Matrix> factors = partial.factors();
  factors.push_back(coded.code.transpose());
  return LoadingSet(std::move(factors));
}

void BaselineSettings::validate() const {
  if (rank < 1) throw ConfigError("rank must be at least 1");
  if (sweeps < 1) throw ConfigError("sweep budget must be at least 1");
}

namespace {

BaselineResult run_sweeps(const DenseTensor& x, const BaselineSettings& settings,
                          const std::function<LoadingSet(const DenseTensor&, const LoadingSet&)>& pass) {
  settings.validate();
  Rng rng = Rng(settings.seed).split(1);
  BaselineResult out;
  out.loadings = random_loadings(x.shape(), settings.rank, rng);
  out.trace.reserve(static_cast<std::size_t>(settings.sweeps));
  for (std::int64_t s = 1; s <= settings.sweeps; ++s) {
    const auto start = std::chrono::steady_clock::now();
    out.loadings = pass(x, out.loadings);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    TraceRecord rec;
    rec.t = s;
    rec.wall_seconds = elapsed;
    const DenseTensor recon = cp_reconstruct(out.loadings);
    rec.abs_err = abs_error(x, recon);
    rec.rel_err = rel_error(x, recon);
    rec.surrogate = *rec.abs_err * *rec.abs_err;
    out.trace.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

BaselineResult run_als(const DenseTensor& x, const BaselineSettings& settings) {
  return run_sweeps(x, settings, [&settings](const DenseTensor& t, const LoadingSet& l) {
    return als_sweep(t, l, settings.factor);
  });
}

BaselineResult run_mu(const DenseTensor& x, const BaselineSettings& settings) {
  return run_sweeps(x, settings,
                    [](const DenseTensor& t, const LoadingSet& l) { return mu_sweep(t, l); });
}

}  // namespace ocpdl
