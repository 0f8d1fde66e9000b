#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rsrae/tensor.hpp"

namespace rsrae {

enum class Activation {
    None,
    Tanh,
    Relu,
    LeakyRelu,  // param = negative slope alpha
    InvSqrt,    // 1 / sqrt(x + param); used for batch-norm scaling
};

struct ActivationSpec {
    Activation kind = Activation::None;
    double param = 0.0;

    static ActivationSpec none() { return {}; }
    static ActivationSpec tanh() { return {Activation::Tanh, 0.0}; }
    static ActivationSpec relu() { return {Activation::Relu, 0.0}; }
    static ActivationSpec leaky_relu(double alpha) { return {Activation::LeakyRelu, alpha}; }
    static ActivationSpec inv_sqrt(double eps) { return {Activation::InvSqrt, eps}; }

    bool operator==(const ActivationSpec&) const = default;
};

double apply_activation(const ActivationSpec& act, double x);
// Derivative given the input x and the output y = f(x).
double activation_derivative(const ActivationSpec& act, double x, double y);

std::string activation_name(const ActivationSpec& act);
// Parses "none", "tanh", "relu", "leaky_relu" (alpha supplied separately).
ActivationSpec parse_activation(const std::string& name, double alpha);

// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = 0;
};

class Tape;

// Leaf gradients produced by one backward pass.
class Gradients {
public:
    const Tensor& operator[](Var leaf) const;
    bool contains(Var leaf) const;

private:
    friend class Tape;
    std::vector<std::optional<Tensor>> grads_;
};

// Define-by-run recorder: every primitive is evaluated eagerly and appended in
// topological order. Tracked leaves receive gradients on backward().
class Tape {
public:
    enum class Op {
        Leaf,
        MatMul,
        Add,
        AddBias,       // matrix + row vector broadcast over rows
        Activate,
        RowNorm,       // row-wise L2 norm, N x M -> N
        Sum,           // all entries -> scalar
        Scale,         // scalar multiple
        Square,        // elementwise square
        Transpose,
        ScaleColumns,  // matrix * row vector broadcast over rows
    };

    Var leaf(Tensor value, bool tracked = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var add_bias(Var x, Var bias);
    Var activate(Var x, ActivationSpec act);
    Var row_norm(Var x);
    Var sum(Var x);
    Var scale(Var x, double s);
    Var square(Var x);
    Var transpose(Var x);
    Var scale_columns(Var x, Var s);

    // Composites built from the primitives above.
    Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

    const Tensor& value(Var v) const;
    std::size_t size() const { return nodes_.size(); }
    Op op(Var v) const { return node(v).op; }

    // Seeds d(output) = 1; output must hold a single value.
    Gradients backward(Var output) const;
    Gradients backward(Var output, const Tensor& seed) const;

private:
    struct Node {
        Op op = Op::Leaf;
        std::size_t lhs = 0;
        std::size_t rhs = 0;
        double param = 0.0;
        ActivationSpec act;
        Tensor value;
        bool tracked = false;
    };

    const Node& node(Var v) const;
    Var push(Node n);

    std::vector<Node> nodes_;
};

// Central differences of a scalar function, one coordinate at a time.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& point,
                                  double step);

}  // namespace rsrae
