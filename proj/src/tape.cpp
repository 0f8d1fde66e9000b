#include "rsrae/tape.hpp"

#include <cmath>

#include "rsrae/error.hpp"

namespace rsrae {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
    }
}

void accumulate(std::optional<Tensor>& slot, const Tensor& g) {
    if (!slot) {
        slot = g;
        return;
    }
    auto dst = slot->data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

double apply_activation(const ActivationSpec& act, double x) {
    switch (act.kind) {
        case Activation::None: return x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::LeakyRelu: return x > 0.0 ? x : act.param * x;
        case Activation::InvSqrt: return 1.0 / std::sqrt(x + act.param);
    }
    return x;
}

double activation_derivative(const ActivationSpec& act, double x, double y) {
    switch (act.kind) {
        case Activation::None: return 1.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::LeakyRelu: return x > 0.0 ? 1.0 : act.param;
        case Activation::InvSqrt: return -0.5 * y * y * y;
    }
    return 1.0;
}

std::string activation_name(const ActivationSpec& act) {
    switch (act.kind) {
        case Activation::None: return "none";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::InvSqrt: return "inv_sqrt";
    }
    return "none";
}

ActivationSpec parse_activation(const std::string& name, double alpha) {
    if (name == "none" || name == "linear") return ActivationSpec::none();
    if (name == "tanh") return ActivationSpec::tanh();
    if (name == "relu") return ActivationSpec::relu();
    if (name == "leaky_relu") {
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw ConfigError("leaky_relu alpha must lie in (0, 1), got " + std::to_string(alpha));
        }
        return ActivationSpec::leaky_relu(alpha);
    }
    throw ConfigError("unknown activation '" + name + "'");
}

const Tensor& Gradients::operator[](Var leaf) const {
    if (!contains(leaf)) throw Error("no gradient recorded for node " + std::to_string(leaf.id));
    return *grads_[leaf.id];
}

bool Gradients::contains(Var leaf) const { return leaf.id < grads_.size() && grads_[leaf.id].has_value(); }

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) throw Error("variable " + std::to_string(v.id) + " is not on this tape");
    return nodes_[v.id];
}

Var Tape::push(Node n) {
    if (!n.value.all_finite()) {
        throw NumericError("non-finite value produced at tape node " + std::to_string(nodes_.size()));
    }
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool tracked) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.tracked = tracked;
    return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Var Tape::matmul(Var a, Var b) {
    const auto& na = node(a);
    const auto& nb = node(b);
    Node n;
    n.op = Op::MatMul;
    n.lhs = a.id;
    n.rhs = b.id;
    n.value = rsrae::matmul(na.value, nb.value);
    n.tracked = na.tracked || nb.tracked;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const auto& na = node(a);
    const auto& nb = node(b);
    Node n;
    n.op = Op::Add;
    n.lhs = a.id;
    n.rhs = b.id;
    n.value = na.value + nb.value;
    n.tracked = na.tracked || nb.tracked;
    return push(std::move(n));
}

Var Tape::add_bias(Var x, Var bias) {
    const auto& nx = node(x);
    const auto& nb = node(bias);
    require_rank(nx.value, 2, "add_bias");
    const std::size_t r = nx.value.rows();
    const std::size_t c = nx.value.cols();
    if (nb.value.size() != c) {
        throw ShapeError("add_bias: " + shape_string(nx.value.shape()) + " with bias " +
                         shape_string(nb.value.shape()));
    }
    Node n;
    n.op = Op::AddBias;
    n.lhs = x.id;
    n.rhs = bias.id;
    n.value = nx.value;
    double* out = n.value.data().data();
    const double* b = nb.value.data().data();
    for (std::size_t i = 0; i < r; ++i, out += c)
        for (std::size_t j = 0; j < c; ++j) out[j] += b[j];
    n.tracked = nx.tracked || nb.tracked;
    return push(std::move(n));
}

Var Tape::activate(Var x, ActivationSpec act) {
    const auto& nx = node(x);
    Node n;
    n.op = Op::Activate;
    n.lhs = x.id;
    n.act = act;
    n.value = nx.value;
    auto values = n.value.data();
    switch (act.kind) {
        case Activation::Tanh:
            for (auto& v : values) v = std::tanh(v);
            break;
        case Activation::LeakyRelu:
            for (auto& v : values) v = v > 0.0 ? v : act.param * v;
            break;
        default:
            for (auto& v : values) v = apply_activation(act, v);
    }
    n.tracked = nx.tracked;
    return push(std::move(n));
}

Var Tape::row_norm(Var x) {
    const auto& nx = node(x);
    require_rank(nx.value, 2, "row_norm");
    const std::size_t r = nx.value.rows();
    const std::size_t c = nx.value.cols();
    Node n;
    n.op = Op::RowNorm;
    n.lhs = x.id;
    n.value = Tensor(Shape{r});
    const double* src = nx.value.data().data();
    for (std::size_t i = 0; i < r; ++i, src += c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += src[j] * src[j];
        n.value[i] = std::sqrt(acc);
    }
    n.tracked = nx.tracked;
    return push(std::move(n));
}

Var Tape::sum(Var x) {
    const auto& nx = node(x);
    Node n;
    n.op = Op::Sum;
    n.lhs = x.id;
    double acc = 0.0;
    for (double v : nx.value.data()) acc += v;
    n.value = Tensor::scalar(acc);
    n.tracked = nx.tracked;
    return push(std::move(n));
}

Var Tape::scale(Var x, double s) {
    const auto& nx = node(x);
    Node n;
    n.op = Op::Scale;
    n.lhs = x.id;
    n.param = s;
    n.value = s * nx.value;
    n.tracked = nx.tracked;
    return push(std::move(n));
}

Var Tape::square(Var x) {
    const auto& nx = node(x);
    Node n;
    n.op = Op::Square;
    n.lhs = x.id;
    n.value = nx.value;
    for (auto& v : n.value.data()) v *= v;
    n.tracked = nx.tracked;
    return push(std::move(n));
}

Var Tape::transpose(Var x) {
    const auto& nx = node(x);
    Node n;
    n.op = Op::Transpose;
    n.lhs = x.id;
    n.value = rsrae::transpose(nx.value);
    n.tracked = nx.tracked;
    return push(std::move(n));
}

Var Tape::scale_columns(Var x, Var s) {
    const auto& nx = node(x);
    const auto& ns = node(s);
    require_rank(nx.value, 2, "scale_columns");
    const std::size_t r = nx.value.rows();
    const std::size_t c = nx.value.cols();
    if (ns.value.size() != c) {
        throw ShapeError("scale_columns: " + shape_string(nx.value.shape()) + " with scale " +
                         shape_string(ns.value.shape()));
    }
    Node n;
    n.op = Op::ScaleColumns;
    n.lhs = x.id;
    n.rhs = s.id;
    n.value = nx.value;
    double* out = n.value.data().data();
    const double* sc = ns.value.data().data();
    for (std::size_t i = 0; i < r; ++i, out += c)
        for (std::size_t j = 0; j < c; ++j) out[j] *= sc[j];
    n.tracked = nx.tracked || ns.tracked;
    return push(std::move(n));
}

Gradients Tape::backward(Var output) const {
    if (output.id >= nodes_.size()) throw Error("backward called before forward: output is not on the tape");
    const auto& out = nodes_[output.id].value;
    if (out.size() != 1) {
        throw ShapeError("backward without a seed needs a single-valued output, got " + shape_string(out.shape()));
    }
    return backward(output, Tensor(out.shape(), 1.0));
}

Gradients Tape::backward(Var output, const Tensor& seed) const {
    if (nodes_.empty() || output.id >= nodes_.size()) {
        throw Error("backward called before forward: output is not on the tape");
    }
    if (seed.shape() != nodes_[output.id].value.shape()) {
        throw ShapeError("seed shape " + shape_string(seed.shape()) + " does not match output shape " +
                         shape_string(nodes_[output.id].value.shape()));
    }

    std::vector<std::optional<Tensor>> grads(output.id + 1);
    grads[output.id] = seed;

    for (std::size_t k = output.id + 1; k-- > 0;) {
        const Node& n = nodes_[k];
        if (!grads[k] || !n.tracked || n.op == Op::Leaf) continue;
        const Tensor& g = *grads[k];
        const Node& a = nodes_[n.lhs];

        switch (n.op) {
            case Op::Leaf: break;
            case Op::MatMul: {
                const Node& b = nodes_[n.rhs];
                if (a.tracked) {
                    accumulate(grads[n.lhs], rsrae::matmul(g, b.value, false, true));
                }
                if (b.tracked) {
                    accumulate(grads[n.rhs], rsrae::matmul(a.value, g, true, false));
                }
                break;
            }
            case Op::Add: {
                if (a.tracked) accumulate(grads[n.lhs], g);
                if (nodes_[n.rhs].tracked) accumulate(grads[n.rhs], g);
                break;
            }
            case Op::AddBias: {
                const Node& b = nodes_[n.rhs];
                if (a.tracked) accumulate(grads[n.lhs], g);
                if (b.tracked) {
                    Tensor gb(b.value.shape());
                    const std::size_t rows = g.rows(), cols = g.cols();
                    const double* src = g.data().data();
                    for (std::size_t i = 0; i < rows; ++i, src += cols)
                        for (std::size_t j = 0; j < cols; ++j) gb[j] += src[j];
                    accumulate(grads[n.rhs], gb);
                }
                break;
            }
            case Op::Activate: {
                Tensor ga = g;
                auto gv = ga.data();
                const auto xs = a.value.data();
                const auto ys = n.value.data();
                switch (n.act.kind) {
                    case Activation::Tanh:
                        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= 1.0 - ys[i] * ys[i];
                        break;
                    case Activation::LeakyRelu:
                        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= xs[i] > 0.0 ? 1.0 : n.act.param;
                        break;
                    default:
                        for (std::size_t i = 0; i < gv.size(); ++i)
                            gv[i] *= activation_derivative(n.act, xs[i], ys[i]);
                }
                accumulate(grads[n.lhs], ga);
                break;
            }
            case Op::RowNorm: {
                // Zero subgradient where the row norm vanishes.
                Tensor ga(a.value.shape());
                const std::size_t rows = ga.rows(), cols = ga.cols();
                for (std::size_t i = 0; i < rows; ++i) {
                    const double norm = n.value[i];
                    if (norm == 0.0) continue;
                    const double coef = g[i] / norm;
                    for (std::size_t j = 0; j < cols; ++j) ga(i, j) = coef * a.value(i, j);
                }
                accumulate(grads[n.lhs], ga);
                break;
            }
            case Op::Sum: {
                accumulate(grads[n.lhs], Tensor(a.value.shape(), g.item()));
                break;
            }
            case Op::Scale: {
                accumulate(grads[n.lhs], n.param * g);
                break;
            }
            case Op::Square: {
                Tensor ga(a.value.shape());
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = 2.0 * a.value[i] * g[i];
                accumulate(grads[n.lhs], ga);
                break;
            }
            case Op::Transpose: {
                accumulate(grads[n.lhs], rsrae::transpose(g));
                break;
            }
            case Op::ScaleColumns: {
                const Node& s = nodes_[n.rhs];
                const std::size_t rows = g.rows(), cols = g.cols();
                if (a.tracked) {
                    Tensor ga(a.value.shape());
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < cols; ++j) ga(i, j) = g(i, j) * s.value[j];
                    accumulate(grads[n.lhs], ga);
                }
                if (s.tracked) {
                    Tensor gs(s.value.shape());
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < cols; ++j) gs[j] += g(i, j) * a.value(i, j);
                    accumulate(grads[n.rhs], gs);
                }
                break;
            }
        }
        if (n.op != Op::Leaf) grads[k].reset();
    }

    Gradients result;
    result.grads_.resize(output.id + 1);
    for (std::size_t k = 0; k <= output.id; ++k) {
        const Node& n = nodes_[k];
        if (n.op != Op::Leaf || !n.tracked) continue;
        result.grads_[k] = grads[k] ? std::move(*grads[k]) : Tensor(n.value.shape());
    }
    return result;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& point,
                                  double step) {
    if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
    Tensor grad(point.shape());
    Tensor probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double x = point[i];
        probe[i] = x + step;
        const double fp = f(probe);
        probe[i] = x - step;
        const double fm = f(probe);
        probe[i] = x;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("non-finite function value while probing coordinate " + std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

}  // namespace rsrae
