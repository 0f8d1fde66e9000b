#include "rsrae/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rsrae/error.hpp"

namespace rsrae {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(what) + ": expected a matrix, got shape " + shape_string(t.shape()));
    }
}

constexpr std::array<char, 8> kMagic = {'R', 'S', 'R', 'K', 'T', 'N', 'S', 'R'};

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
        throw IoError("tensor stream truncated");
    }
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
    }
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
    }
    if (element_count(shape_) != data_.size()) {
        throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                         " values");
    }
}

Tensor Tensor::checked(Shape shape, std::vector<double> data) {
    Tensor t(std::move(shape), std::move(data));
    if (!t.all_finite()) throw NumericError("tensor input contains NaN or Inf");
    return t;
}

Tensor Tensor::vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) throw ShapeError("matrix literal must be non-empty");
    const std::size_t cols = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw ShapeError("ragged matrix literal");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor(Shape{rows.size(), cols}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

std::size_t Tensor::rows() const {
    require_matrix(*this, "rows");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    require_matrix(*this, "cols");
    return shape_[1];
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const {
    // x - x is 0 for finite x and NaN otherwise; the sum vectorizes.
    double acc = 0.0;
    for (double v : data_) acc += v - v;
    return acc == 0.0;
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
    require_matrix(*this, "slice_rows");
    if (begin >= end || end > shape_[0]) throw ShapeError("row slice out of range");
    const std::size_t c = shape_[1];
    return Tensor(Shape{end - begin, c},
                  std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                                      data_.begin() + static_cast<std::ptrdiff_t>(end * c)));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> index) const {
    require_matrix(*this, "gather_rows");
    if (index.empty()) throw ShapeError("gather_rows with empty index");
    const std::size_t c = shape_[1];
    std::vector<double> out;
    out.reserve(index.size() * c);
    for (auto r : index) {
        if (r >= shape_[0]) throw ShapeError("gather_rows index out of range");
        auto first = data_.begin() + static_cast<std::ptrdiff_t>(r * c);
        out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(c));
    }
    return Tensor(Shape{index.size(), c}, std::move(out));
}

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul(a, b, false, false); }

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t inner_a = transpose_a ? a.rows() : a.cols();
    const std::size_t inner_b = transpose_b ? b.cols() : b.rows();
    if (inner_a != inner_b) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + (transpose_a ? "^T" : "") + " x " +
                         shape_string(b.shape()) + (transpose_b ? "^T" : ""));
    }
    // Eigen's small-product kernels peel loops by address; copying into its own
    // aligned storage fixes the summation order.
    const RowMat ma = Eigen::Map<const RowMat>(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                                               static_cast<Eigen::Index>(a.cols()));
    const RowMat mb = Eigen::Map<const RowMat>(b.data().data(), static_cast<Eigen::Index>(b.rows()),
                                               static_cast<Eigen::Index>(b.cols()));
    RowMat mo;
    if (transpose_a && transpose_b) mo.noalias() = ma.transpose() * mb.transpose();
    else if (transpose_a) mo.noalias() = ma.transpose() * mb;
    else if (transpose_b) mo.noalias() = ma * mb.transpose();
    else mo.noalias() = ma * mb;
    Tensor out(Shape{static_cast<std::size_t>(mo.rows()), static_cast<std::size_t>(mo.cols())});
    std::copy(mo.data(), mo.data() + mo.size(), out.data().begin());
    return out;
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const std::size_t r = a.rows();
    const std::size_t c = a.cols();
    Tensor out(Shape{c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(j, i) = a(i, j);
    return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("subtract: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor operator*(double s, const Tensor& a) {
    Tensor out = a;
    for (auto& v : out.data()) v *= s;
    return out;
}

double frobenius_norm(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v * v;
    return std::sqrt(acc);
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (double v : t.data()) put_le<double>(out, v);
    if (!out) throw IoError("failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw IoError("bad tensor magic (expected RSRKTNSR)");
    }
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 16) throw IoError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
        d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
        if (d == 0) throw IoError("tensor file has a zero dimension");
    }
    std::vector<double> data(element_count(shape));
    for (auto& v : data) v = get_le<double>(in);
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_tensor(out, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_tensor(in);
}

}  // namespace rsrae
