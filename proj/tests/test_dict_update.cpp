#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ocpdl/dict_update.hpp"
#include "oracles.hpp"

using namespace ocpdl;

namespace {

DenseTensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  DenseTensor t{shape};
  for (std::int64_t p = 0; p < t.size(); ++p) t[p] = rng.uniform(lo, hi);
  return t;
}

Matrix random_psd(std::int64_t n, Rng& rng) {
  Matrix c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) c(i, j) = rng.uniform(-1.0, 1.0);
  }
  return c * c.transpose();
}

// Aggregate tensor with random slices, shape = loadings shape + rank.
DenseTensor random_aggregate(const LoadingSet& l, Rng& rng) {
  Shape shape = l.shape();
  shape.push_back(l.rank());
  return random_tensor(shape, rng);
}

}  // namespace

TEST_CASE("single-mode quadratic degenerates to the raw aggregates") {
  Rng rng(201);
  const LoadingSet l = random_loadings({4}, 3, rng);
  const Matrix a = random_psd(3, rng);
  const DenseTensor b = random_tensor({4, 3}, rng);
  const ModeQuadratic quad = mode_quadratic(a, b, l, 0);
  CHECK((quad.gram - a).cwiseAbs().maxCoeff() < 1e-15);
  const Matrix want = tensor_to_matrix(b);
  CHECK((quad.rhs - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hand-computed two-mode gram") {
  Matrix u1(2, 2), u2(3, 2);
  u1 << 1, 2, 3, 4;
  u2 << 1, 0, 0, 1, 1, 1;
  const LoadingSet l({u1, u2});
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  Rng rng(203);
  const DenseTensor b = random_tensor({2, 3, 2}, rng);
  const ModeQuadratic quad = mode_quadratic(a, b, l, 1);
  Matrix want(2, 2);
  want << 20, 14, 14, 40;
  CHECK((quad.gram - want).cwiseAbs().maxCoeff() < 1e-12);

  // rhs column r contracts slice r with the other mode's column r.
  for (std::int64_t r = 0; r < 2; ++r) {
    for (std::int64_t i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < 2; ++k) acc += u1(k, r) * b.at({k, i, r});
      CHECK(quad.rhs(i, r) == doctest::Approx(acc).epsilon(1e-14));
    }
  }
}

TEST_CASE("atom-tensor aggregate reproduces column norms") {
  Rng rng(207);
  for (int rep = 0; rep < 30; ++rep) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.uniform_index(2));
    Shape shape;
    for (std::int64_t j = 0; j < n; ++j) {
      shape.push_back(2 + static_cast<std::int64_t>(rng.uniform_index(3)));
    }
    const std::int64_t rank = 1 + static_cast<std::int64_t>(rng.uniform_index(3));
    const LoadingSet l = random_loadings(shape, rank, rng);
    const DenseTensor b = cp_out(l);
    const std::int64_t j = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    const ModeQuadratic quad = mode_quadratic(random_psd(rank, rng), b, l, j);
    for (std::int64_t r = 0; r < rank; ++r) {
      double scale = 1.0;
      for (std::int64_t k = 0; k < n; ++k) {
        if (k != j) scale *= l.factor(k).col(r).squaredNorm();
      }
      const Vector want = l.factor(j).col(r) * scale;
      CHECK((quad.rhs.col(r) - want).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + want.norm()));
    }
  }
}

TEST_CASE("aggregation is homogeneous and preserves PSD") {
  Rng rng(211);
  const LoadingSet l = random_loadings({3, 4}, 3, rng);
  const Matrix a = random_psd(3, rng);
  const DenseTensor b = random_aggregate(l, rng);
  const ModeQuadratic base = mode_quadratic(a, b, l, 0);

  const ModeQuadratic scaled_a = mode_quadratic(Matrix(2.5 * a), b, l, 0);
  CHECK((scaled_a.gram - 2.5 * base.gram).cwiseAbs().maxCoeff() <
        1e-14 * base.gram.cwiseAbs().maxCoeff());
  CHECK((scaled_a.rhs - base.rhs).cwiseAbs().maxCoeff() == 0.0);

  DenseTensor b_scaled = b;
  b_scaled.vec() *= 2.5;
  const ModeQuadratic scaled_b = mode_quadratic(a, b_scaled, l, 0);
  CHECK((scaled_b.rhs - 2.5 * base.rhs).cwiseAbs().maxCoeff() <
        1e-12 * (1.0 + base.rhs.cwiseAbs().maxCoeff()));

  CHECK((base.gram - base.gram.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(base.gram, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("aggregation rejects mismatched shapes") {
  Rng rng(213);
  const LoadingSet l = random_loadings({3, 4}, 2, rng);
  const Matrix a = random_psd(2, rng);
  CHECK_THROWS_AS(mode_quadratic(a, random_tensor({3, 4, 3}, rng), l, 0), ShapeError);
  CHECK_THROWS_AS(mode_quadratic(a, random_tensor({3, 5, 2}, rng), l, 0), ShapeError);
  CHECK_THROWS_AS(mode_quadratic(a, random_tensor({3, 4}, rng), l, 0), ShapeError);
  CHECK_THROWS_AS(mode_quadratic(random_psd(3, rng), random_tensor({3, 4, 2}, rng), l, 0), ShapeError);
  CHECK_THROWS_AS(mode_quadratic(a, random_tensor({3, 4, 2}, rng), l, 2), ShapeError);
}

TEST_CASE("stationary interior factor stays put") {
  Rng rng(217);
  const Matrix gram = random_psd(3, rng) + 0.5 * Matrix::Identity(3, 3);
  Matrix u(4, 3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    for (Eigen::Index i = 0; i < 4; ++i) u(i, j) = rng.uniform(0.5, 2.0);
  }
  ModeQuadratic quad;
  quad.gram = gram;
  quad.rhs = u * gram;  // gradient vanishes at u
  quad.mode = 0;
  FactorSettings s;
  s.tol = 1e-14;
  s.max_sweeps = 500;
  const Matrix out = update_factor(u, quad, s);
  CHECK((out - u).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank-one column iteration reaches the interior minimizer") {
  ModeQuadratic quad;
  quad.gram = Matrix::Constant(1, 1, 2.0);
  quad.rhs = Matrix::Zero(2, 1);
  quad.rhs(0, 0) = 6.0;
  quad.mode = 0;
  const Matrix start = Matrix::Zero(2, 1);

  // One literal sweep from zero: u <- 0 - (0*2 - 6)/(2+1) = 2.
  FactorSettings one;
  one.max_sweeps = 1;
  one.tol = 0.0;
  const Matrix first = update_factor(start, quad, one);
  CHECK(first(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(first(1, 0) == 0.0);

  // The fixed point of the step is the true minimizer of 2u^2 - 12u.
  FactorSettings full;
  full.max_sweeps = 200;
  full.tol = 1e-15;
  const Matrix limit = update_factor(start, quad, full);
  CHECK(limit(0, 0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(limit(1, 0) == 0.0);
}

TEST_CASE("negative rhs pins the factor at the orthant boundary") {
  Rng rng(219);
  ModeQuadratic quad;
  quad.gram = random_psd(2, rng);
  quad.rhs = -Matrix::Ones(3, 2);
  quad.mode = 0;
  const Matrix out = update_factor(Matrix::Zero(3, 2), quad, FactorSettings{});
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dead atoms are left untouched") {
  ModeQuadratic quad;
  quad.gram = Matrix::Zero(2, 2);
  quad.gram(0, 0) = 3.0;
  quad.rhs = Matrix::Zero(2, 2);
  quad.rhs(0, 0) = 6.0;
  quad.rhs(1, 0) = 3.0;
  quad.mode = 0;
  Matrix u(2, 2);
  u << 0.5, 0.7, 0.25, 0.9;
  FactorSettings s;
  s.max_sweeps = 50;
  const Matrix out = update_factor(u, quad, s);
  CHECK(out(0, 1) == u(0, 1));
  CHECK(out(1, 1) == u(1, 1));
  CHECK(out.col(0).isApprox(quad.rhs.col(0) / 3.0, 1e-6));
}

TEST_CASE("factor update never increases its quadratic") {
  Rng rng(223);
  for (int rep = 0; rep < 40; ++rep) {
    const std::int64_t rank = 1 + static_cast<std::int64_t>(rng.uniform_index(4));
    const std::int64_t rows = 2 + static_cast<std::int64_t>(rng.uniform_index(4));
    ModeQuadratic quad;
    quad.gram = random_psd(rank, rng);
    quad.rhs.resize(rows, rank);
    Matrix u(rows, rank);
    for (Eigen::Index j = 0; j < rank; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        quad.rhs(i, j) = rng.uniform(-2.0, 2.0);
        u(i, j) = rng.uniform(0.0, 2.0);
      }
    }
    quad.mode = 0;
    FactorSettings s;
    s.max_sweeps = 1 + static_cast<int>(rng.uniform_index(30));
    const Matrix out = update_factor(u, quad, s);
    const double before = quadratic_value(u, quad);
    const double after = quadratic_value(out, quad);
    CHECK(after <= before + 1e-12 * (1.0 + std::abs(before)));
    CHECK(out.minCoeff() >= 0.0);
    CHECK(out.maxCoeff() <= s.u_max);
  }
}

TEST_CASE("update_factor rejects bad inputs") {
  ModeQuadratic quad;
  quad.gram = Matrix::Identity(2, 2);
  quad.rhs = Matrix::Ones(3, 2);
  CHECK_THROWS_AS(update_factor(Matrix::Zero(2, 2), quad, FactorSettings{}), ShapeError);
  quad.rhs(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(update_factor(Matrix::Zero(3, 2), quad, FactorSettings{}), NumericError);
  quad.rhs(0, 0) = 0.0;
  FactorSettings bad;
  bad.u_max = 0.0;
  CHECK_THROWS_AS(update_factor(Matrix::Zero(3, 2), quad, bad), ConfigError);
}

TEST_CASE("surrogate energy vanishes on zero aggregates") {
  Rng rng(227);
  const LoadingSet l = random_loadings({3, 2}, 2, rng);
  const Matrix a = Matrix::Zero(2, 2);
  const DenseTensor b{Shape{3, 2, 2}};
  CHECK(surrogate_quadratic(a, b, l) == 0.0);
}

TEST_CASE("surrogate energy matches the expanded square") {
  Rng rng(229);
  for (int rep = 0; rep < 30; ++rep) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.uniform_index(2));
    Shape shape;
    for (std::int64_t j = 0; j < n; ++j) {
      shape.push_back(2 + static_cast<std::int64_t>(rng.uniform_index(3)));
    }
    const std::int64_t rank = 1 + static_cast<std::int64_t>(rng.uniform_index(3));
    const std::int64_t batch = 1 + static_cast<std::int64_t>(rng.uniform_index(3));
    const LoadingSet l = random_loadings(shape, rank, rng);
    Shape batch_shape = shape;
    batch_shape.push_back(batch);
    const DenseTensor x = random_tensor(batch_shape, rng, 0.0, 1.0);
    Matrix c(rank, batch);
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = rng.uniform(0.0, 1.5);
    }

    const Matrix a = c * c.transpose();
    const DenseTensor b = mode_product(x, c, n);  // contract the sample mode with C
    const double g = surrogate_quadratic(a, b, l);
    const DenseTensor recon = cp_eval(l, c);
    const double want = std::pow(abs_error(x, recon), 2) - x.vec().squaredNorm();
    CHECK(g == doctest::Approx(want).epsilon(1e-8));

    // Per-mode reformulation agrees for every mode.
    for (std::int64_t j = 0; j < n; ++j) {
      const ModeQuadratic quad = mode_quadratic(a, b, l, j);
      CHECK(quadratic_value(l.factor(j), quad) == doctest::Approx(g).epsilon(1e-8));
    }
  }
}

TEST_CASE("a full sweep descends with second-order growth") {
  Rng rng(233);
  for (int rep = 0; rep < 20; ++rep) {
    const Shape shape{3, 4, 2};
    const std::int64_t rank = 2 + static_cast<std::int64_t>(rng.uniform_index(2));
    const LoadingSet l = random_loadings(shape, rank, rng);
    Matrix c(rank, 3);
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = rng.uniform(0.0, 1.0);
    }
    Shape batch_shape = shape;
    batch_shape.push_back(3);
    const DenseTensor x = random_tensor(batch_shape, rng, 0.0, 1.0);
    const Matrix a = c * c.transpose();
    const DenseTensor b = mode_product(x, c, 3);

    FactorSettings s;
    s.tol = 1e-12;
    s.max_sweeps = 500;
    SweepDiagnostics diag;
    const LoadingSet after = sweep_loadings(a, b, l, s, SweepMode::sequential, &diag);

    const double before_val = surrogate_quadratic(a, b, l);
    const double after_val = surrogate_quadratic(a, b, after);
    double growth = 0.0;
    for (std::size_t j = 0; j < diag.displacement_sq.size(); ++j) {
      growth += diag.gram_min_eigenvalue[j] * diag.displacement_sq[j];
    }
    CHECK(before_val - after_val >= growth - 1e-6);
    CHECK(before_val - after_val >= -1e-9);
  }
}
