#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ocpdl/errors.hpp"
#include "ocpdl/rng.hpp"

namespace ocpdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense real tensor stored with the FIRST index fastest: the linear offset of
// (i_1, ..., i_n) is i_1 + I_1*(i_2 + I_2*(i_3 + ...)). Every reshape in the
// library (vectorize, unfold, Khatri-Rao, checkpoints) uses this one layout.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);                      // zero-filled
  DenseTensor(Shape shape, std::vector<double> data);

  std::int64_t mode_count() const { return static_cast<std::int64_t>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::int64_t mode) const;
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double operator[](std::int64_t p) const { return data_[static_cast<std::size_t>(p)]; }
  double& operator[](std::int64_t p) { return data_[static_cast<std::size_t>(p)]; }
  double at(std::span<const std::int64_t> index) const;
  double& at(std::span<const std::int64_t> index);
  double at(std::initializer_list<std::int64_t> index) const;
  double& at(std::initializer_list<std::int64_t> index);

  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  // Eigen view of the flat storage.
  Eigen::Map<const Vector> vec() const;
  Eigen::Map<Vector> vec();

  double frobenius_norm() const;
  double min_value() const;
  bool all_finite() const;

 private:
  std::int64_t linear_index(std::span<const std::int64_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

// Flat copy in storage order (first index fastest).
std::vector<double> vectorize(const DenseTensor& t);
// Inverse of vectorize; data length must equal the shape's size.
DenseTensor refold(std::span<const double> data, Shape shape);

// Mode-m matricization, dim(m) rows; columns enumerate the remaining modes in
// ascending order with the earliest one fastest.
Matrix unfold(const DenseTensor& t, std::int64_t mode);
// Inverse of unfold for a tensor of the given shape.
DenseTensor fold_mode(const Matrix& m, std::int64_t mode, const Shape& shape);

// Contract mode `mode` with matrix m (cols == dim(mode)); that mode's extent
// becomes m.rows().
DenseTensor mode_product(const DenseTensor& t, const Matrix& m, std::int64_t mode);
// Contract mode `mode` with a vector, dropping that mode.
DenseTensor mode_contract(const DenseTensor& t, const Vector& v, std::int64_t mode);

Matrix hadamard(const Matrix& a, const Matrix& b);

// Column-wise Khatri-Rao product, (I*J) x R with the FIRST argument's index
// fastest: out(i + I*j, r) = a(i,r) * b(j,r).
Matrix khatri_rao(const Matrix& a, const Matrix& b);

// One factor matrix per mode, all sharing the column count (the rank).
class LoadingSet {
 public:
  LoadingSet() = default;
  explicit LoadingSet(std::vector<Matrix> factors);

  std::int64_t mode_count() const { return static_cast<std::int64_t>(factors_.size()); }
  std::int64_t rank() const { return rank_; }
  std::int64_t dim(std::int64_t mode) const;
  Shape shape() const;

  const Matrix& factor(std::int64_t mode) const;
  Matrix& factor(std::int64_t mode);
  const std::vector<Matrix>& factors() const { return factors_; }

  double frobenius_norm() const;
  bool all_finite() const;

 private:
  std::vector<Matrix> factors_;
  std::int64_t rank_ = 0;
};

// Uniform [0,1) entries, reproducible from the generator state.
LoadingSet random_loadings(const Shape& shape, std::int64_t rank, Rng& rng);

double loading_distance(const LoadingSet& a, const LoadingSet& b);

// Atom tensor: shape (I_1, ..., I_n, R); slice r along the last mode is the
// outer product of the factors' r-th columns.
DenseTensor cp_out(const LoadingSet& loadings);

// Reconstruction from codes: shape (I_1, ..., I_n, b) for an R x b code
// matrix; batch sample s is sum_r code(r,s) * atom_r.
DenseTensor cp_eval(const LoadingSet& loadings, const Matrix& code);

double abs_error(const DenseTensor& x, const DenseTensor& xhat);
// ||x - xhat||_F / max(||x||_F, 1e-12)
double rel_error(const DenseTensor& x, const DenseTensor& xhat);

// Slice fixing the last index, shape loses the last mode.
DenseTensor slice_last_mode(const DenseTensor& t, std::int64_t index);
// Gather slices along the last mode into a new tensor (repeats allowed).
DenseTensor gather_last_mode(const DenseTensor& t, std::span<const std::int64_t> indices);
// Stack equal-shaped tensors along a fresh trailing mode.
DenseTensor stack_last_mode(const std::vector<DenseTensor>& parts);

// --- DTF1 file format --------------------------------------------------
// ASCII header line "DTF1 n I_1 ... I_n\n" followed by prod(I_j) IEEE-754
// binary64 values, little-endian, in storage order.

void write_dtf1(const DenseTensor& t, const std::filesystem::path& path);
DenseTensor read_dtf1(const std::filesystem::path& path);

void write_dtf1(const Matrix& m, const std::filesystem::path& path);
Matrix read_dtf1_matrix(const std::filesystem::path& path);

Matrix tensor_to_matrix(const DenseTensor& t);
DenseTensor matrix_to_tensor(const Matrix& m);

}  // namespace ocpdl
