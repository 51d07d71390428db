#include "ocpdl/dict_update.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ocpdl {

namespace {

// Contracts `data` (a tensor of shape `shape`) with factor columns r of every
// mode except `skip` (pass skip = -1 to contract all modes). Returns the
// remaining vector (or a 1-element vector for a full contraction). Modes are
// contracted from the highest down so lower mode positions stay valid.
std::vector<double> contract_columns(const double* data, const Shape& shape,
                                     const LoadingSet& loadings, std::int64_t skip,
                                     std::int64_t r, std::vector<double>& buf) {
  const std::int64_t n = static_cast<std::int64_t>(shape.size());
  std::vector<double> cur(data, data + shape_size(shape));
  Shape cur_shape = shape;
  for (std::int64_t k = n - 1; k >= 0; --k) {
    if (k == skip) continue;
    const std::int64_t d = shape[static_cast<std::size_t>(k)];
    const std::int64_t len = shape_size(cur_shape);
    const std::int64_t lo = [&] {
      std::int64_t s = 1;
      for (std::int64_t j = 0; j < k; ++j) s *= cur_shape[static_cast<std::size_t>(j)];
      return s;
    }();
    const std::int64_t hi = len / (lo * d);
    buf.assign(static_cast<std::size_t>(lo * hi), 0.0);
    const Matrix& f = loadings.factor(k);
    for (std::int64_t h = 0; h < hi; ++h) {
      double* dst = buf.data() + h * lo;
      for (std::int64_t i = 0; i < d; ++i) {
        const double w = f(i, r);
        const double* src = cur.data() + (h * d + i) * lo;
        for (std::int64_t p = 0; p < lo; ++p) dst[p] += w * src[p];
      }
    }
    cur.swap(buf);
    cur_shape.erase(cur_shape.begin() + k);
  }
  return cur;
}

void check_aggregate_shapes(const Matrix& a, const DenseTensor& b, const LoadingSet& loadings) {
  const std::int64_t rank = loadings.rank();
  if (a.rows() != rank || a.cols() != rank) {
    throw ShapeError("aggregate matrix must be rank x rank");
  }
  if (b.mode_count() != loadings.mode_count() + 1) {
    throw ShapeError("aggregate tensor must have one atom mode after the data modes");
  }
  for (std::int64_t j = 0; j < loadings.mode_count(); ++j) {
    if (b.dim(j) != loadings.dim(j)) {
      throw ShapeError("aggregate tensor mode " + std::to_string(j) + " has extent " +
                       std::to_string(b.dim(j)) + ", loadings expect " +
                       std::to_string(loadings.dim(j)));
    }
  }
  if (b.dim(b.mode_count() - 1) != rank) {
    throw ShapeError("aggregate tensor's last mode must equal the rank");
  }
}

Matrix other_factor_gram(const Matrix& a, const LoadingSet& loadings, std::int64_t mode) {
  Matrix gram = a;
  for (std::int64_t k = 0; k < loadings.mode_count(); ++k) {
    if (k == mode) continue;
    Matrix fg = loadings.factor(k).transpose() * loadings.factor(k);
    fg = 0.5 * (fg + fg.transpose());
    gram = gram.cwiseProduct(fg);
  }
  return Matrix(0.5 * (gram + gram.transpose()));
}

}  // namespace

ModeQuadratic mode_quadratic(const Matrix& a, const DenseTensor& b, const LoadingSet& loadings,
                             std::int64_t mode) {
  check_aggregate_shapes(a, b, loadings);
  if (mode < 0 || mode >= loadings.mode_count()) {
    throw ShapeError("mode " + std::to_string(mode) + " out of range");
  }
  ModeQuadratic quad;
  quad.mode = mode;
  quad.gram = other_factor_gram(a, loadings, mode);
  const std::int64_t rank = loadings.rank();
  const Shape data_shape = loadings.shape();
  const std::int64_t block = shape_size(data_shape);
  quad.rhs.resize(loadings.dim(mode), rank);
  std::vector<double> buf;
  for (std::int64_t r = 0; r < rank; ++r) {
    const std::vector<double> col =
        contract_columns(b.data() + r * block, data_shape, loadings, mode, r, buf);
    quad.rhs.col(r) = Eigen::Map<const Vector>(col.data(), static_cast<Eigen::Index>(col.size()));
  }
  return quad;
}

ModeQuadratic mode_quadratic_full(const DenseTensor& x, const LoadingSet& loadings,
                                  std::int64_t mode) {
  if (x.shape() != loadings.shape()) {
    throw ShapeError("data tensor shape " + shape_to_string(x.shape()) +
                     " does not match loadings " + shape_to_string(loadings.shape()));
  }
  if (mode < 0 || mode >= loadings.mode_count()) {
    throw ShapeError("mode " + std::to_string(mode) + " out of range");
  }
  ModeQuadratic quad;
  quad.mode = mode;
  quad.gram = other_factor_gram(Matrix::Ones(loadings.rank(), loadings.rank()), loadings, mode);
  quad.rhs.resize(loadings.dim(mode), loadings.rank());
  std::vector<double> buf;
  for (std::int64_t r = 0; r < loadings.rank(); ++r) {
    const std::vector<double> col = contract_columns(x.data(), x.shape(), loadings, mode, r, buf);
    quad.rhs.col(r) = Eigen::Map<const Vector>(col.data(), static_cast<Eigen::Index>(col.size()));
  }
  return quad;
}

Matrix update_factor(const Matrix& u, const ModeQuadratic& quad, const FactorSettings& settings) {
  if (!quad.gram.allFinite() || !quad.rhs.allFinite()) {
    throw NumericError("factor update received non-finite aggregates");
  }
  if (u.cols() != quad.gram.rows() || u.rows() != quad.rhs.rows() ||
      quad.gram.rows() != quad.gram.cols() || quad.rhs.cols() != quad.gram.cols()) {
    throw ShapeError("factor/quadratic shape mismatch");
  }
  if (settings.u_max <= 0) throw ConfigError("u_max must be positive");
  if (settings.max_sweeps < 1) throw ConfigError("max_sweeps must be at least 1");

  Matrix cur = u.cwiseMax(0.0).cwiseMin(settings.u_max);
  const std::int64_t rank = quad.gram.rows();
  for (int sweep = 0; sweep < settings.max_sweeps; ++sweep) {
    const Matrix prev = cur;
    for (std::int64_t i = 0; i < rank; ++i) {
      const double step = 1.0 / (quad.gram(i, i) + 1.0);
      const Vector grad = cur * quad.gram.col(i) - quad.rhs.col(i);
      cur.col(i) = (cur.col(i) - step * grad).cwiseMax(0.0).cwiseMin(settings.u_max);
    }
    if (!cur.allFinite()) throw NumericError("factor update iterate became non-finite");
    if ((cur - prev).norm() <= settings.tol * (1.0 + cur.norm())) break;
  }
  return cur;
}

double surrogate_quadratic(const Matrix& a, const DenseTensor& b, const LoadingSet& loadings) {
  check_aggregate_shapes(a, b, loadings);
  const double trace_term = a.cwiseProduct(code_gram(loadings)).sum();
  const Shape data_shape = loadings.shape();
  const std::int64_t block = shape_size(data_shape);
  double inner = 0.0;
  std::vector<double> buf;
  for (std::int64_t r = 0; r < loadings.rank(); ++r) {
    const std::vector<double> full =
        contract_columns(b.data() + r * block, data_shape, loadings, -1, r, buf);
    inner += full[0];
  }
  return trace_term - 2.0 * inner;
}

double quadratic_value(const Matrix& u, const ModeQuadratic& quad) {
  return (u * quad.gram).cwiseProduct(u).sum() - 2.0 * quad.rhs.cwiseProduct(u).sum();
}

LoadingSet sweep_loadings(const Matrix& a, const DenseTensor& b, const LoadingSet& loadings,
                          const FactorSettings& settings, SweepMode mode,
                          SweepDiagnostics* diagnostics) {
  check_aggregate_shapes(a, b, loadings);
  LoadingSet work = loadings;
  if (diagnostics != nullptr) {
    diagnostics->gram_min_eigenvalue.clear();
    diagnostics->displacement_sq.clear();
  }
  for (std::int64_t j = 0; j < loadings.mode_count(); ++j) {
    const ModeQuadratic quad = mode == SweepMode::sequential ? mode_quadratic(a, b, work, j)
                                                             : mode_quadratic(a, b, loadings, j);
    const Matrix updated = update_factor(work.factor(j), quad, settings);
    if (diagnostics != nullptr) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(quad.gram, Eigen::EigenvaluesOnly);
      diagnostics->gram_min_eigenvalue.push_back(es.eigenvalues().minCoeff());
      diagnostics->displacement_sq.push_back((updated - work.factor(j)).squaredNorm());
    }
    work.factor(j) = updated;
  }
  return work;
}

}  // namespace ocpdl
