#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ocpdl/baselines.hpp"

using namespace ocpdl;

namespace {

LoadingSet positive_loadings(const Shape& shape, std::int64_t rank, Rng& rng,
                             double floor = 0.2) {
  std::vector<Matrix> factors;
  for (const std::int64_t dim : shape) {
    Matrix f(dim, rank);
    for (std::int64_t i = 0; i < dim; ++i)
      for (std::int64_t r = 0; r < rank; ++r) f(i, r) = floor + rng.uniform01();
    factors.emplace_back(std::move(f));
  }
  return LoadingSet(std::move(factors));
}

double objective(const DenseTensor& x, const LoadingSet& l) {
  const double err = abs_error(x, cp_reconstruct(l));
  return err * err;
}

}  // namespace

TEST_CASE("reconstruction matches the atom-by-atom sum") {
  Rng rng(3);
  const LoadingSet l = positive_loadings({3, 4, 2}, 2, rng);
  const DenseTensor x = cp_reconstruct(l);
  CHECK(x.shape() == Shape{3, 4, 2});
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 4; ++j)
      for (std::int64_t k = 0; k < 2; ++k) {
        double want = 0.0;
        for (std::int64_t r = 0; r < 2; ++r)
          want += l.factor(0)(i, r) * l.factor(1)(j, r) * l.factor(2)(k, r);
        CHECK(x.at({i, j, k}) == doctest::Approx(want).epsilon(1e-14));
      }
}

TEST_CASE("alternating pass keeps an exact factorization exact") {
  Rng rng(7);
  const LoadingSet truth = positive_loadings({4, 3, 5}, 2, rng);
  const DenseTensor x = cp_reconstruct(truth);
  FactorSettings settings;
  const LoadingSet after = als_sweep(x, truth, settings);
  CHECK(objective(x, after) <= 1e-18);
  CHECK(loading_distance(after, truth) <= 1e-9);
}

TEST_CASE("alternating pass solves a rank-1 positive problem") {
  Rng rng(11);
  const LoadingSet truth = positive_loadings({2, 2, 2}, 1, rng);
  const DenseTensor x = cp_reconstruct(truth);
  FactorSettings settings;
  LoadingSet l = positive_loadings({2, 2, 2}, 1, rng);
  double rel = 1.0;
  for (int s = 0; s < 50 && rel > 1e-6; ++s) {
    l = als_sweep(x, l, settings);
    rel = rel_error(x, cp_reconstruct(l));
  }
  CHECK(rel <= 1e-6);
}

TEST_CASE("interior alternating update matches the normal equations") {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const LoadingSet truth = positive_loadings({4, 3, 3}, 2, rng, 0.3);
    const DenseTensor x = cp_reconstruct(truth);
    LoadingSet l = truth;
    // Perturb one mode and re-solve it with everything else held at truth.
    const std::int64_t j = static_cast<std::int64_t>(rng.uniform_index(3));
    Matrix& f = l.factor(j);
    for (std::int64_t i = 0; i < f.rows(); ++i)
      for (std::int64_t r = 0; r < f.cols(); ++r) f(i, r) = 0.3 + rng.uniform01();

    const ModeQuadratic quad = mode_quadratic_full(x, l, j);
    const Matrix unconstrained =
        quad.gram.completeOrthogonalDecomposition().pseudoInverse() * quad.rhs.transpose();
    REQUIRE(unconstrained.minCoeff() > 0.0);  // truth is strictly positive

    FactorSettings settings;
    settings.tol = 1e-12;
    settings.max_sweeps = 2000;
    const Matrix solved = update_factor(l.factor(j), quad, settings);
    CHECK((solved - unconstrained.transpose()).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("multiplicative pass holds exact positive factorizations fixed") {
  Rng rng(17);
  const LoadingSet truth = positive_loadings({3, 4, 2}, 2, rng, 0.3);
  const DenseTensor x = cp_reconstruct(truth);
  const LoadingSet after = mu_sweep(x, truth);
  CHECK(loading_distance(after, truth) <= 1e-10);
}

TEST_CASE("multiplicative updates never revive a zero entry") {
  Rng rng(19);
  LoadingSet l = positive_loadings({3, 3, 3}, 2, rng);
  l.factor(1)(2, 0) = 0.0;
  const DenseTensor x = cp_reconstruct(positive_loadings({3, 3, 3}, 2, rng));
  LoadingSet cur = l;
  for (int s = 0; s < 5; ++s) {
    cur = mu_sweep(x, cur);
    CHECK(cur.factor(1)(2, 0) == 0.0);
    for (std::int64_t j = 0; j < 3; ++j) CHECK(cur.factor(j).minCoeff() >= 0.0);
  }
}

TEST_CASE("multiplicative pass solves a rank-1 positive problem") {
  Rng rng(23);
  const LoadingSet truth = positive_loadings({2, 2, 2}, 1, rng);
  const DenseTensor x = cp_reconstruct(truth);
  LoadingSet l = positive_loadings({2, 2, 2}, 1, rng);
  double rel = 1.0;
  for (int s = 0; s < 500 && rel > 1e-4; ++s) {
    l = mu_sweep(x, l);
    rel = rel_error(x, cp_reconstruct(l));
  }
  CHECK(rel <= 1e-4);
}

TEST_CASE("both offline passes are monotone on random problems") {
  Rng rng(29);
  FactorSettings settings;
  for (int rep = 0; rep < 8; ++rep) {
    Shape shape{3, 4, 3};
    DenseTensor x{shape};
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();

    LoadingSet als = positive_loadings(shape, 2, rng);
    LoadingSet mu = als;
    double als_obj = objective(x, als);
    double mu_obj = objective(x, mu);
    for (int s = 0; s < 10; ++s) {
      als = als_sweep(x, als, settings);
      const double next_als = objective(x, als);
      CHECK(next_als <= als_obj + 1e-9);
      als_obj = next_als;

      mu = mu_sweep(x, mu);
      const double next_mu = objective(x, mu);
      CHECK(next_mu <= mu_obj + 1e-9);
      mu_obj = next_mu;
    }
  }
}

TEST_CASE("offline passes reject mismatched shapes and negative data") {
  Rng rng(31);
  const LoadingSet l = positive_loadings({3, 4}, 2, rng);
  FactorSettings settings;
  CHECK_THROWS_AS(als_sweep(DenseTensor{Shape{4, 3}}, l, settings), ShapeError);
  CHECK_THROWS_AS(mu_sweep(DenseTensor{Shape{3, 4, 2}}, l), ShapeError);
  DenseTensor negative{Shape{3, 4}};
  negative[0] = -1.0;
  CHECK_THROWS_AS(mu_sweep(negative, l), NumericError);
  Rng rng1(1);
  const LoadingSet one_mode = random_loadings(Shape{4}, 2, rng1);
  CHECK_THROWS_AS(cp_reconstruct(one_mode), ShapeError);
}

TEST_CASE("refit recovers the held-out last factor of exact data") {
  Rng rng(37);
  const LoadingSet truth = positive_loadings({4, 3, 6}, 2, rng, 0.3);
  const DenseTensor x = cp_reconstruct(truth);
  const LoadingSet partial({truth.factor(0), truth.factor(1)});
  CodingSettings coding;
  coding.tol = 1e-12;
  coding.max_iters = 200000;
  const LoadingSet full = refit_last_mode(x, partial, coding);
  REQUIRE(full.mode_count() == 3);
  CHECK((full.factor(2) - truth.factor(2)).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(rel_error(x, cp_reconstruct(full)) <= 1e-6);
}

TEST_CASE("refit maps the zero tensor to a zero factor") {
  Rng rng(41);
  const LoadingSet partial = positive_loadings({3, 4}, 2, rng);
  const LoadingSet full = refit_last_mode(DenseTensor{Shape{3, 4, 5}}, partial, {});
  CHECK(full.factor(2).rows() == 5);
  CHECK(full.factor(2).norm() == 0.0);
}

TEST_CASE("refit with one slice is a single coding call") {
  Rng rng(43);
  const LoadingSet partial = positive_loadings({3, 4}, 2, rng);
  DenseTensor x{Shape{3, 4, 1}};
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();
  CodingSettings coding;
  coding.lambda = 0.1;
  const LoadingSet full = refit_last_mode(x, partial, coding);
  const CodingResult direct = sparse_code(x, partial, coding);
  CHECK((full.factor(2).transpose().array() == direct.code.array()).all());
}

TEST_CASE("sweep runners trace errors and reproduce bit for bit") {
  Rng rng(47);
  const LoadingSet truth = positive_loadings({4, 4, 4}, 2, rng);
  const DenseTensor x = cp_reconstruct(truth);
  BaselineSettings settings;
  settings.rank = 2;
  settings.sweeps = 12;
  settings.seed = 5;

  const BaselineResult a = run_als(x, settings);
  const BaselineResult b = run_als(x, settings);
  REQUIRE(a.trace.size() == 12);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].t == static_cast<std::int64_t>(i) + 1);
    REQUIRE(a.trace[i].rel_err.has_value());
    CHECK(*a.trace[i].rel_err == *b.trace[i].rel_err);
    if (i > 0) CHECK(*a.trace[i].abs_err <= *a.trace[i - 1].abs_err + 1e-9);
  }
  CHECK(*a.trace.back().rel_err < *a.trace.front().rel_err);

  const BaselineResult m = run_mu(x, settings);
  REQUIRE(m.trace.size() == 12);
  for (std::size_t i = 1; i < m.trace.size(); ++i)
    CHECK(*m.trace[i].abs_err <= *m.trace[i - 1].abs_err + 1e-9);

  BaselineSettings bad;
  bad.rank = 0;
  CHECK_THROWS_AS(run_als(x, bad), ConfigError);
}
