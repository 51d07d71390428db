#include "ocpdl/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "DTF1 payload I/O assumes a little-endian host");

namespace ocpdl {

namespace {

void check_shape_valid(const Shape& shape) {
  for (std::int64_t d : shape) {
    if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
  }
}

void check_mode(const Shape& shape, std::int64_t mode) {
  if (mode < 0 || mode >= static_cast<std::int64_t>(shape.size())) {
    throw ShapeError("mode " + std::to_string(mode) + " out of range for order " +
                     std::to_string(shape.size()) + " tensor");
  }
}

// Product of dims strictly below `mode` (the stride of that mode).
std::int64_t stride_below(const Shape& shape, std::int64_t mode) {
  std::int64_t s = 1;
  for (std::int64_t j = 0; j < mode; ++j) s *= shape[static_cast<std::size_t>(j)];
  return s;
}

}  // namespace

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape_valid(shape_);
  data_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape_valid(shape_);
  if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
  }
}

std::int64_t DenseTensor::dim(std::int64_t mode) const {
  check_mode(shape_, mode);
  return shape_[static_cast<std::size_t>(mode)];
}

std::int64_t DenseTensor::linear_index(std::span<const std::int64_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index order " + std::to_string(index.size()) + " does not match tensor order " +
                     std::to_string(shape_.size()));
  }
  std::int64_t p = 0;
  std::int64_t stride = 1;
  for (std::size_t j = 0; j < shape_.size(); ++j) {
    if (index[j] < 0 || index[j] >= shape_[j]) {
      throw ShapeError("index " + std::to_string(index[j]) + " out of range for mode " +
                       std::to_string(j));
    }
    p += index[j] * stride;
    stride *= shape_[j];
  }
  return p;
}

double DenseTensor::at(std::span<const std::int64_t> index) const {
  return data_[static_cast<std::size_t>(linear_index(index))];
}

double& DenseTensor::at(std::span<const std::int64_t> index) {
  return data_[static_cast<std::size_t>(linear_index(index))];
}

double DenseTensor::at(std::initializer_list<std::int64_t> index) const {
  return at(std::span<const std::int64_t>(index.begin(), index.size()));
}

double& DenseTensor::at(std::initializer_list<std::int64_t> index) {
  return at(std::span<const std::int64_t>(index.begin(), index.size()));
}

Eigen::Map<const Vector> DenseTensor::vec() const {
  return Eigen::Map<const Vector>(data_.data(), static_cast<Eigen::Index>(data_.size()));
}

Eigen::Map<Vector> DenseTensor::vec() {
  return Eigen::Map<Vector>(data_.data(), static_cast<Eigen::Index>(data_.size()));
}

double DenseTensor::frobenius_norm() const { return vec().norm(); }

double DenseTensor::min_value() const {
  if (data_.empty()) throw ShapeError("min_value of empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

bool DenseTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> vectorize(const DenseTensor& t) { return t.values(); }

DenseTensor refold(std::span<const double> data, Shape shape) {
  return DenseTensor(std::move(shape), std::vector<double>(data.begin(), data.end()));
}

Matrix unfold(const DenseTensor& t, std::int64_t mode) {
  check_mode(t.shape(), mode);
  const Shape& shape = t.shape();
  const std::int64_t dim = shape[static_cast<std::size_t>(mode)];
  const std::int64_t lo_count = stride_below(shape, mode);
  const std::int64_t hi_count = t.size() / (lo_count * dim);
  Matrix out(dim, lo_count * hi_count);
  const double* src = t.data();
  for (std::int64_t hi = 0; hi < hi_count; ++hi) {
    for (std::int64_t i = 0; i < dim; ++i) {
      const double* block = src + (hi * dim + i) * lo_count;
      for (std::int64_t lo = 0; lo < lo_count; ++lo) out(i, lo + hi * lo_count) = block[lo];
    }
  }
  return out;
}

DenseTensor fold_mode(const Matrix& m, std::int64_t mode, const Shape& shape) {
  check_shape_valid(shape);
  check_mode(shape, mode);
  const std::int64_t dim = shape[static_cast<std::size_t>(mode)];
  const std::int64_t lo_count = stride_below(shape, mode);
  const std::int64_t total = shape_size(shape);
  const std::int64_t hi_count = total / (lo_count * dim);
  if (m.rows() != dim || m.cols() != lo_count * hi_count) {
    throw ShapeError("fold_mode: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " does not match shape " + shape_to_string(shape) + " at mode " +
                     std::to_string(mode));
  }
  DenseTensor out{shape};
  double* dst = out.data();
  for (std::int64_t hi = 0; hi < hi_count; ++hi) {
    for (std::int64_t i = 0; i < dim; ++i) {
      double* block = dst + (hi * dim + i) * lo_count;
      for (std::int64_t lo = 0; lo < lo_count; ++lo) block[lo] = m(i, lo + hi * lo_count);
    }
  }
  return out;
}

DenseTensor mode_product(const DenseTensor& t, const Matrix& m, std::int64_t mode) {
  check_mode(t.shape(), mode);
  if (m.cols() != t.dim(mode)) {
    throw ShapeError("mode_product: matrix has " + std::to_string(m.cols()) +
                     " columns, mode extent is " + std::to_string(t.dim(mode)));
  }
  if (m.rows() < 1) throw ShapeError("mode_product: matrix must have at least one row");
  Matrix contracted = m * unfold(t, mode);
  Shape out_shape = t.shape();
  out_shape[static_cast<std::size_t>(mode)] = m.rows();
  return fold_mode(contracted, mode, out_shape);
}

DenseTensor mode_contract(const DenseTensor& t, const Vector& v, std::int64_t mode) {
  check_mode(t.shape(), mode);
  if (v.size() != t.dim(mode)) {
    throw ShapeError("mode_contract: vector length " + std::to_string(v.size()) +
                     " does not match mode extent " + std::to_string(t.dim(mode)));
  }
  const Shape& shape = t.shape();
  const std::int64_t dim = shape[static_cast<std::size_t>(mode)];
  const std::int64_t lo_count = stride_below(shape, mode);
  const std::int64_t hi_count = t.size() / (lo_count * dim);
  Shape out_shape;
  for (std::int64_t j = 0; j < t.mode_count(); ++j) {
    if (j != mode) out_shape.push_back(shape[static_cast<std::size_t>(j)]);
  }
  std::vector<double> out(static_cast<std::size_t>(lo_count * hi_count), 0.0);
  const double* src = t.data();
  for (std::int64_t hi = 0; hi < hi_count; ++hi) {
    double* dst = out.data() + hi * lo_count;
    for (std::int64_t i = 0; i < dim; ++i) {
      const double w = v[i];
      const double* block = src + (hi * dim + i) * lo_count;
      for (std::int64_t lo = 0; lo < lo_count; ++lo) dst[lo] += w * block[lo];
    }
  }
  return DenseTensor(std::move(out_shape), std::move(out));
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("hadamard: shapes " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     " differ");
  }
  return a.cwiseProduct(b);
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("khatri_rao: column counts " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.cols()) + " differ");
  }
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.cols(); ++r) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        out(i + a.rows() * j, r) = a(i, r) * b(j, r);
      }
    }
  }
  return out;
}

LoadingSet::LoadingSet(std::vector<Matrix> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw ShapeError("loading set needs at least one factor");
  rank_ = factors_[0].cols();
  if (rank_ < 1) throw ShapeError("loading set rank must be at least 1");
  for (const Matrix& f : factors_) {
    if (f.cols() != rank_) throw ShapeError("loading factors must share a column count");
    if (f.rows() < 1) throw ShapeError("loading factor must have at least one row");
    if (!f.allFinite()) throw NumericError("loading factor has non-finite entries");
  }
}

std::int64_t LoadingSet::dim(std::int64_t mode) const {
  if (mode < 0 || mode >= mode_count()) {
    throw ShapeError("loading mode " + std::to_string(mode) + " out of range");
  }
  return factors_[static_cast<std::size_t>(mode)].rows();
}

Shape LoadingSet::shape() const {
  Shape s;
  for (const Matrix& f : factors_) s.push_back(f.rows());
  return s;
}

const Matrix& LoadingSet::factor(std::int64_t mode) const {
  if (mode < 0 || mode >= mode_count()) {
    throw ShapeError("loading mode " + std::to_string(mode) + " out of range");
  }
  return factors_[static_cast<std::size_t>(mode)];
}

Matrix& LoadingSet::factor(std::int64_t mode) {
  if (mode < 0 || mode >= mode_count()) {
    throw ShapeError("loading mode " + std::to_string(mode) + " out of range");
  }
  return factors_[static_cast<std::size_t>(mode)];
}

double LoadingSet::frobenius_norm() const {
  double sq = 0.0;
  for (const Matrix& f : factors_) sq += f.squaredNorm();
  return std::sqrt(sq);
}

bool LoadingSet::all_finite() const {
  return std::all_of(factors_.begin(), factors_.end(),
                     [](const Matrix& f) { return f.allFinite(); });
}

LoadingSet random_loadings(const Shape& shape, std::int64_t rank, Rng& rng) {
  check_shape_valid(shape);
  if (rank < 1) throw ShapeError("rank must be at least 1");
  std::vector<Matrix> factors;
  factors.reserve(shape.size());
  for (std::int64_t d : shape) {
    Matrix f(d, rank);
    for (Eigen::Index r = 0; r < f.cols(); ++r) {
      for (Eigen::Index i = 0; i < f.rows(); ++i) f(i, r) = rng.uniform01();
    }
    factors.push_back(std::move(f));
  }
  return LoadingSet(std::move(factors));
}

double loading_distance(const LoadingSet& a, const LoadingSet& b) {
  if (a.mode_count() != b.mode_count() || a.rank() != b.rank()) {
    throw ShapeError("loading_distance: incompatible loading sets");
  }
  double sq = 0.0;
  for (std::int64_t j = 0; j < a.mode_count(); ++j) {
    if (a.factor(j).rows() != b.factor(j).rows()) {
      throw ShapeError("loading_distance: factor shapes differ at mode " + std::to_string(j));
    }
    sq += (a.factor(j) - b.factor(j)).squaredNorm();
  }
  return std::sqrt(sq);
}

namespace {

// Writes the rank-1 tensor of the factors' r-th columns into dst
// (length prod(shape)), first mode fastest.
void rank_one_column(const LoadingSet& loadings, std::int64_t r, double* dst) {
  dst[0] = 1.0;
  std::int64_t len = 1;
  for (std::int64_t j = 0; j < loadings.mode_count(); ++j) {
    const Matrix& f = loadings.factor(j);
    const std::int64_t d = f.rows();
    for (std::int64_t k = d - 1; k >= 0; --k) {
      const double w = f(k, r);
      double* out = dst + k * len;
      if (k == 0) {
        for (std::int64_t i = 0; i < len; ++i) dst[i] *= w;
      } else {
        for (std::int64_t i = 0; i < len; ++i) out[i] = dst[i] * w;
      }
    }
    len *= d;
  }
}

}  // namespace

DenseTensor cp_out(const LoadingSet& loadings) {
  Shape out_shape = loadings.shape();
  const std::int64_t block = shape_size(out_shape);
  out_shape.push_back(loadings.rank());
  DenseTensor out{out_shape};
  for (std::int64_t r = 0; r < loadings.rank(); ++r) {
    rank_one_column(loadings, r, out.data() + r * block);
  }
  return out;
}

DenseTensor cp_eval(const LoadingSet& loadings, const Matrix& code) {
  if (code.rows() != loadings.rank()) {
    throw ShapeError("cp_eval: code has " + std::to_string(code.rows()) + " rows, rank is " +
                     std::to_string(loadings.rank()));
  }
  if (code.cols() < 1) throw ShapeError("cp_eval: code needs at least one column");
  Shape out_shape = loadings.shape();
  const std::int64_t block = shape_size(out_shape);
  out_shape.push_back(code.cols());
  DenseTensor out{out_shape};
  std::vector<double> atom(static_cast<std::size_t>(block));
  for (std::int64_t r = 0; r < loadings.rank(); ++r) {
    rank_one_column(loadings, r, atom.data());
    for (Eigen::Index s = 0; s < code.cols(); ++s) {
      const double w = code(r, s);
      if (w == 0.0) continue;
      double* dst = out.data() + s * block;
      for (std::int64_t p = 0; p < block; ++p) dst[p] += w * atom[static_cast<std::size_t>(p)];
    }
  }
  return out;
}

double abs_error(const DenseTensor& x, const DenseTensor& xhat) {
  if (x.shape() != xhat.shape()) {
    throw ShapeError("abs_error: shapes " + shape_to_string(x.shape()) + " and " +
                     shape_to_string(xhat.shape()) + " differ");
  }
  return (x.vec() - xhat.vec()).norm();
}

double rel_error(const DenseTensor& x, const DenseTensor& xhat) {
  return abs_error(x, xhat) / std::max(x.frobenius_norm(), 1e-12);
}

DenseTensor slice_last_mode(const DenseTensor& t, std::int64_t index) {
  if (t.mode_count() < 1) throw ShapeError("slice_last_mode: tensor has no modes");
  const std::int64_t last = t.mode_count() - 1;
  const std::int64_t count = t.dim(last);
  if (index < 0 || index >= count) {
    throw ShapeError("slice_last_mode: index " + std::to_string(index) + " out of range");
  }
  Shape out_shape(t.shape().begin(), t.shape().end() - 1);
  const std::int64_t block = t.size() / count;
  std::vector<double> data(t.data() + index * block, t.data() + (index + 1) * block);
  return DenseTensor(std::move(out_shape), std::move(data));
}

DenseTensor gather_last_mode(const DenseTensor& t, std::span<const std::int64_t> indices) {
  if (t.mode_count() < 1) throw ShapeError("gather_last_mode: tensor has no modes");
  if (indices.empty()) throw ShapeError("gather_last_mode: empty index list");
  const std::int64_t last = t.mode_count() - 1;
  const std::int64_t count = t.dim(last);
  const std::int64_t block = t.size() / count;
  Shape out_shape = t.shape();
  out_shape.back() = static_cast<std::int64_t>(indices.size());
  DenseTensor out{out_shape};
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const std::int64_t idx = indices[s];
    if (idx < 0 || idx >= count) {
      throw ShapeError("gather_last_mode: index " + std::to_string(idx) + " out of range");
    }
    std::memcpy(out.data() + static_cast<std::int64_t>(s) * block, t.data() + idx * block,
                static_cast<std::size_t>(block) * sizeof(double));
  }
  return out;
}

DenseTensor stack_last_mode(const std::vector<DenseTensor>& parts) {
  if (parts.empty()) throw ShapeError("stack_last_mode: empty list");
  const Shape& base = parts[0].shape();
  for (const DenseTensor& p : parts) {
    if (p.shape() != base) throw ShapeError("stack_last_mode: member shapes differ");
  }
  Shape out_shape = base;
  out_shape.push_back(static_cast<std::int64_t>(parts.size()));
  DenseTensor out{out_shape};
  const std::int64_t block = parts[0].size();
  for (std::size_t s = 0; s < parts.size(); ++s) {
    std::memcpy(out.data() + static_cast<std::int64_t>(s) * block, parts[s].data(),
                static_cast<std::size_t>(block) * sizeof(double));
  }
  return out;
}

void write_dtf1(const DenseTensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::ostringstream header;
  header << "DTF1 " << t.mode_count();
  for (std::int64_t d : t.shape()) header << ' ' << d;
  header << '\n';
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.size())));
  if (!out) throw IoError("short write to " + path.string());
}

DenseTensor read_dtf1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw IoError(path.string() + ": missing header");
  std::istringstream hs(header);
  std::string magic;
  std::int64_t n = 0;
  if (!(hs >> magic >> n) || magic != "DTF1") {
    throw IoError(path.string() + ": bad magic, expected DTF1");
  }
  if (n < 1) throw IoError(path.string() + ": tensor order must be positive");
  Shape shape(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < n; ++j) {
    if (!(hs >> shape[static_cast<std::size_t>(j)])) {
      throw IoError(path.string() + ": truncated header");
    }
    if (shape[static_cast<std::size_t>(j)] <= 0) {
      throw IoError(path.string() + ": non-positive dimension in header");
    }
  }
  std::string trailing;
  if (hs >> trailing) throw IoError(path.string() + ": trailing tokens in header");
  const std::int64_t count = shape_size(shape);
  std::vector<double> data(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(sizeof(double) * data.size()));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * data.size())) {
    throw IoError(path.string() + ": truncated payload");
  }
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw IoError(path.string() + ": trailing bytes after payload");
  }
  return DenseTensor(std::move(shape), std::move(data));
}

Matrix tensor_to_matrix(const DenseTensor& t) {
  if (t.mode_count() != 2) {
    throw ShapeError("tensor_to_matrix: expected 2 modes, got " + std::to_string(t.mode_count()));
  }
  return Eigen::Map<const Matrix>(t.data(), t.dim(0), t.dim(1));
}

DenseTensor matrix_to_tensor(const Matrix& m) {
  DenseTensor out{Shape{m.rows(), m.cols()}};
  Eigen::Map<Matrix>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

void write_dtf1(const Matrix& m, const std::filesystem::path& path) {
  write_dtf1(matrix_to_tensor(m), path);
}

Matrix read_dtf1_matrix(const std::filesystem::path& path) {
  return tensor_to_matrix(read_dtf1(path));
}

}  // namespace ocpdl
