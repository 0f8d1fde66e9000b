#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rsrae {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Rank 0 is a scalar holding one value.
class Tensor {
public:
    Tensor() : Tensor(Shape{}) {}
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor vector(std::vector<double> v);
    // Nested initializer: matrix({{1, 2}, {3, 4}}).
    static Tensor matrix(const std::vector<std::vector<double>>& rows);
    static Tensor identity(std::size_t n);

    // Same as the data constructor but rejects NaN/Inf entries.
    static Tensor checked(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    // Matrix helpers; require rank 2.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    // Value of a rank-0 or single-element tensor.
    double item() const;

    bool all_finite() const;
    bool operator==(const Tensor& other) const = default;

    // Rows [begin, end) of a rank-2 tensor.
    Tensor slice_rows(std::size_t begin, std::size_t end) const;
    // Rows picked by index, in the given order.
    Tensor gather_rows(std::span<const std::size_t> index) const;
    Tensor row(std::size_t r) const { return slice_rows(r, r + 1); }

private:
    Shape shape_;
    std::vector<double> data_;
};

// Plain value arithmetic used by the tape and by model code outside of training.
Tensor matmul(const Tensor& a, const Tensor& b);
// op(a) op(b) with op = transpose where flagged. Operands are staged in aligned
// buffers, so rounding never depends on where the tensors happen to live.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b);
Tensor transpose(const Tensor& a);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
double frobenius_norm(const Tensor& a);
double max_abs(const Tensor& a);

// Binary format: magic "RSRKTNSR", u32 rank, u64 dims, little-endian f64 payload.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace rsrae
