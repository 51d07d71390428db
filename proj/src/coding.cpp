#include "ocpdl/coding.hpp"

#include <algorithm>
#include <cmath>

namespace ocpdl {

namespace {

void check_batch_shape(const DenseTensor& batch, const LoadingSet& loadings) {
  if (batch.mode_count() != loadings.mode_count() + 1) {
    throw ShapeError("minibatch must have one sample mode after the " +
                     std::to_string(loadings.mode_count()) + " data modes, got order " +
                     std::to_string(batch.mode_count()));
  }
  for (std::int64_t j = 0; j < loadings.mode_count(); ++j) {
    if (batch.dim(j) != loadings.dim(j)) {
      throw ShapeError("minibatch mode " + std::to_string(j) + " has extent " +
                       std::to_string(batch.dim(j)) + ", loadings expect " +
                       std::to_string(loadings.dim(j)));
    }
  }
}

// <slice s, atom r> without forming the atom: contract the trailing data mode
// first so each pass shrinks the buffer.
double slice_atom_inner(const double* slice, const Shape& shape, const LoadingSet& loadings,
                        std::int64_t r, std::vector<double>& buf_a, std::vector<double>& buf_b) {
  const std::int64_t n = loadings.mode_count();
  std::int64_t len = shape_size(shape);
  buf_a.assign(slice, slice + len);
  double* cur = buf_a.data();
  double* next = nullptr;
  for (std::int64_t j = n - 1; j >= 0; --j) {
    const std::int64_t d = shape[static_cast<std::size_t>(j)];
    const std::int64_t block = len / d;
    const Matrix& f = loadings.factor(j);
    buf_b.assign(static_cast<std::size_t>(block), 0.0);
    next = buf_b.data();
    for (std::int64_t k = 0; k < d; ++k) {
      const double w = f(k, r);
      const double* src = cur + k * block;
      for (std::int64_t p = 0; p < block; ++p) next[p] += w * src[p];
    }
    std::swap(buf_a, buf_b);
    cur = buf_a.data();
    len = block;
  }
  return cur[0];
}

}  // namespace

Matrix code_gram(const LoadingSet& loadings, double ridge) {
  Matrix g = Matrix::Ones(loadings.rank(), loadings.rank());
  for (std::int64_t j = 0; j < loadings.mode_count(); ++j) {
    Matrix fg = loadings.factor(j).transpose() * loadings.factor(j);
    fg = 0.5 * (fg + fg.transpose());  // exact symmetry
    g = g.cwiseProduct(fg);
  }
  if (ridge != 0.0) g.diagonal().array() += ridge;
  return g;
}

Matrix code_rhs(const DenseTensor& batch, const LoadingSet& loadings) {
  check_batch_shape(batch, loadings);
  const std::int64_t b = batch.dim(batch.mode_count() - 1);
  const std::int64_t block = batch.size() / b;
  const Shape data_shape(batch.shape().begin(), batch.shape().end() - 1);
  Matrix p(loadings.rank(), b);
  std::vector<double> buf_a, buf_b;
  for (std::int64_t s = 0; s < b; ++s) {
    const double* slice = batch.data() + s * block;
    for (std::int64_t r = 0; r < loadings.rank(); ++r) {
      p(r, s) = slice_atom_inner(slice, data_shape, loadings, r, buf_a, buf_b);
    }
  }
  return p;
}

CodingResult sparse_code(const DenseTensor& batch, const LoadingSet& loadings,
                         const CodingSettings& settings, const CodeMatrix* start) {
  check_batch_shape(batch, loadings);
  if (settings.lambda < 0) throw ConfigError("coding lambda must be nonnegative");
  if (settings.c_max <= 0) throw ConfigError("coding c_max must be positive");
  if (settings.max_iters < 1) throw ConfigError("coding max_iters must be at least 1");
  if (!batch.all_finite()) throw NumericError("minibatch has non-finite entries");

  const Matrix g = code_gram(loadings, settings.ridge);
  const double trace = g.trace();
  if (!(trace > 0.0)) {
    throw DegenerateDictionaryError("dictionary Gram has zero trace (all-zero loadings)");
  }
  const Matrix p = code_rhs(batch, loadings);
  const std::int64_t b = batch.dim(batch.mode_count() - 1);

  CodeMatrix c;
  if (start != nullptr) {
    if (start->rows() != loadings.rank() || start->cols() != b) {
      throw ShapeError("warm-start code has the wrong shape");
    }
    c = start->cwiseMax(0.0).cwiseMin(settings.c_max);
  } else {
    c = CodeMatrix::Zero(loadings.rank(), b);
  }

  const double eta = 1.0 / (2.0 * trace);
  int it = 0;
  for (; it < settings.max_iters; ++it) {
    Matrix grad = 2.0 * (g * c - p);
    grad.array() += settings.lambda;
    CodeMatrix next = (c - eta * grad).cwiseMax(0.0).cwiseMin(settings.c_max);
    if (!next.allFinite()) throw NumericError("coding iterate became non-finite");
    const double delta = (next - c).norm();
    c.swap(next);
    if (delta <= settings.tol * (1.0 + c.norm())) {
      ++it;
      break;
    }
  }

  CodingResult out;
  const Matrix g_plain = settings.ridge == 0.0 ? g : code_gram(loadings, 0.0);
  const double xsq = batch.vec().squaredNorm();
  const double fit = xsq - 2.0 * (p.array() * c.array()).sum() + (c.array() * (g_plain * c).array()).sum();
  out.fit = std::max(fit, 0.0);
  out.objective = out.fit + settings.lambda * c.sum();
  out.iterations = it;
  out.code = std::move(c);
  return out;
}

double coding_objective(const DenseTensor& batch, const LoadingSet& loadings, const Matrix& code,
                        double lambda) {
  check_batch_shape(batch, loadings);
  const std::int64_t b = batch.dim(batch.mode_count() - 1);
  if (code.rows() != loadings.rank() || code.cols() != b) {
    throw ShapeError("code shape does not match loadings and batch");
  }
  const Matrix g = code_gram(loadings, 0.0);
  const Matrix p = code_rhs(batch, loadings);
  const double xsq = batch.vec().squaredNorm();
  const double fit =
      xsq - 2.0 * (p.array() * code.array()).sum() + (code.array() * (g * code).array()).sum();
  return std::max(fit, 0.0) + lambda * code.sum();
}

}  // namespace ocpdl
