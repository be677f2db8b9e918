#pragma once

// Minimal reverse-mode differentiation over Tensor4 values. Covers exactly the
// primitives the reconstruction networks use.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dautomap/conv.hpp"
#include "dautomap/tensor.hpp"

namespace dautomap {

/// Reinterprets (B, 2A, 1, W) block-layout channels (reals 0..A-1, imaginaries A..2A-1)
/// as an A x W complex grid and returns its transpose as (B, 2, W, A). With conjugate
/// set the imaginary plane is negated, giving the conjugate transpose.
template <class Scalar>
Tensor4<Scalar> conj_transpose(const Tensor4<Scalar>& x, bool conjugate = true) {
    if (x.channels() % 2 != 0)
        throw DimensionError("conj_transpose: channel count " + std::to_string(x.channels()) + " is odd");
    if (x.height() != 1)
        throw DimensionError("conj_transpose: expected height 1, got " + std::to_string(x.height()));
    const Index A = x.channels() / 2, W = x.width();
    Tensor4<Scalar> out(x.batch(), 2, W, A);
    const Scalar sign = conjugate ? Scalar(-1) : Scalar(1);
    for (Index b = 0; b < x.batch(); ++b) {
        Eigen::Map<const RowMatrix<Scalar>> re(x.data() + x.offset(b, 0, 0, 0), A, W);
        Eigen::Map<const RowMatrix<Scalar>> im(x.data() + x.offset(b, A, 0, 0), A, W);
        out.plane(b, 0) = re.transpose();
        out.plane(b, 1) = sign * im.transpose();
    }
    return out;
}

/// Adjoint of conj_transpose: (B, 2, W, A) -> (B, 2A, 1, W).
template <class Scalar>
Tensor4<Scalar> conj_transpose_adjoint(const Tensor4<Scalar>& g, bool conjugate = true) {
    const Index W = g.height(), A = g.width();
    Tensor4<Scalar> out(g.batch(), 2 * A, 1, W);
    const Scalar sign = conjugate ? Scalar(-1) : Scalar(1);
    for (Index b = 0; b < g.batch(); ++b) {
        Eigen::Map<RowMatrix<Scalar>> re(out.data() + out.offset(b, 0, 0, 0), A, W);
        Eigen::Map<RowMatrix<Scalar>> im(out.data() + out.offset(b, A, 0, 0), A, W);
        re = g.plane(b, 0).transpose();
        im = sign * g.plane(b, 1).transpose();
    }
    return out;
}


/// Handle to a value recorded on a GradTape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

template <class Scalar>
class Gradients {
public:
    using Tensor = Tensor4<Scalar>;

    explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

    /// Gradient of a trainable leaf (zero-filled if the loss does not depend on it).
    const Tensor& operator[](Var v) const {
        if (v.id >= grads_.size() || !grads_[v.id])
            throw ContractError("no gradient recorded for variable " + std::to_string(v.id));
        return *grads_[v.id];
    }

private:
    std::vector<std::optional<Tensor>> grads_;
};

template <class Scalar_>
class GradTape {
public:
    using Scalar = Scalar_;
    using Tensor = Tensor4<Scalar>;

    GradTape() = default;
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    Var leaf(Tensor value, bool trainable = false) {
        return push(std::move(value), trainable, trainable, {}, {});
    }

    const Tensor& value(Var v) const { return node(v).value; }
    std::size_t size() const noexcept { return nodes_.size(); }

    Var conv2d(Var input, Var kernel, Var bias, Padding pad) {
        Tensor out = dautomap::conv2d(value(input), value(kernel), value(bias), pad);
        return push(std::move(out), false, any_grad({input, kernel, bias}), {input, kernel, bias},
                    [this, input, kernel, bias, pad](const Tensor& g, Sink& sink) {
                        const bool need_in = node(input).requires_grad;
                        auto grads = conv2d_backward(value(input), value(kernel), g, pad, need_in);
                        if (need_in) sink.add(input, std::move(grads.input));
                        sink.add(kernel, std::move(grads.kernel));
                        sink.add(bias, std::move(grads.bias));
                    });
    }

    Var conv2d_valid(Var input, Var kernel, Var bias) { return conv2d(input, kernel, bias, Padding{}); }

    Var conv2d_same(Var input, Var kernel, Var bias) {
        return conv2d(input, kernel, bias, same_padding(value(kernel).shape()));
    }

    Var relu(Var x) {
        Tensor out = dautomap::relu(value(x));
        relu_inputs_.push_back(x);
        return push(std::move(out), false, node(x).requires_grad, {x}, [this, x](const Tensor& g, Sink& sink) {
            sink.add(x, relu_backward(value(x), g));
        });
    }

    Var tanh(Var x) {
        Tensor out(value(x).shape());
        out.array() = value(x).array().tanh();
        const Var result = push(std::move(out), false, node(x).requires_grad, {x}, {});
        nodes_[result.id].backward = [this, x, result](const Tensor& g, Sink& sink) {
            Tensor dx(g.shape());
            dx.array() = g.array() * (Scalar(1) - value(result).array().square());
            sink.add(x, std::move(dx));
        };
        return result;
    }

    /// (B, 2A, 1, W) block-layout complex columns -> (B, 2, W, A) transposed grid.
    /// With conjugate set, the imaginary plane is negated.
    Var conj_transpose(Var x, bool conjugate = true) {
        Tensor out = dautomap::conj_transpose(value(x), conjugate);
        return push(std::move(out), false, node(x).requires_grad, {x},
                    [this, x, conjugate](const Tensor& g, Sink& sink) {
                        sink.add(x, dautomap::conj_transpose_adjoint(g, conjugate));
                    });
    }

    Var reshape(Var x, const Shape& shape) {
        Tensor out = value(x).reshaped(shape);
        const Shape original = value(x).shape();
        return push(std::move(out), false, node(x).requires_grad, {x},
                    [x, original](const Tensor& g, Sink& sink) { sink.add(x, g.reshaped(original)); });
    }

    /// x: (B, 1, 1, Din), weight: (1, 1, Dout, Din), bias: (1, 1, 1, Dout) -> (B, 1, 1, Dout).
    Var linear(Var x, Var weight, Var bias) {
        const Tensor& in = value(x);
        const Tensor& w = value(weight);
        const Index din = w.width(), dout = w.height();
        if (in.channels() != 1 || in.height() != 1 || in.width() != din)
            throw DimensionError("linear: input " + in.shape().str() + " incompatible with weight " + w.shape().str());
        if (value(bias).size() != dout)
            throw DimensionError("linear: bias size " + std::to_string(value(bias).size()) + " != " + std::to_string(dout));
        Tensor out(in.batch(), 1, 1, dout);
        auto in_m = Eigen::Map<const RowMatrix<Scalar>>(in.data(), in.batch(), din);
        auto w_m = Eigen::Map<const RowMatrix<Scalar>>(w.data(), dout, din);
        auto b_v = Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(value(bias).data(), dout);
        Eigen::Map<RowMatrix<Scalar>> out_m(out.data(), in.batch(), dout);
        out_m.noalias() = in_m * w_m.transpose();
        out_m.rowwise() += b_v;
        return push(std::move(out), false, any_grad({x, weight, bias}), {x, weight, bias},
                    [this, x, weight, bias, din, dout](const Tensor& g, Sink& sink) {
                        const Tensor& in_v = value(x);
                        auto g_m = Eigen::Map<const RowMatrix<Scalar>>(g.data(), g.batch(), dout);
                        auto in_m2 = Eigen::Map<const RowMatrix<Scalar>>(in_v.data(), in_v.batch(), din);
                        auto w_m2 = Eigen::Map<const RowMatrix<Scalar>>(value(weight).data(), dout, din);
                        if (node(x).requires_grad) {
                            Tensor dx(in_v.shape());
                            Eigen::Map<RowMatrix<Scalar>>(dx.data(), in_v.batch(), din).noalias() = g_m * w_m2;
                            sink.add(x, std::move(dx));
                        }
                        Tensor dw(value(weight).shape());
                        Eigen::Map<RowMatrix<Scalar>>(dw.data(), dout, din).noalias() = g_m.transpose() * in_m2;
                        sink.add(weight, std::move(dw));
                        Tensor db = Tensor::vector(dout);
                        Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(db.data(), dout) = g_m.colwise().sum();
                        sink.add(bias, std::move(db));
                    });
    }

    Var add(Var a, Var b) {
        require_same_shape(value(a).shape(), value(b).shape(), "add");
        Tensor out(value(a).shape());
        out.array() = value(a).array() + value(b).array();
        return push(std::move(out), false, any_grad({a, b}), {a, b}, [a, b](const Tensor& g, Sink& sink) {
            sink.add(a, Tensor(g));
            sink.add(b, Tensor(g));
        });
    }

    Var scale(Var x, Scalar s) {
        Tensor out(value(x).shape());
        out.array() = value(x).array() * s;
        return push(std::move(out), false, node(x).requires_grad, {x}, [x, s](const Tensor& g, Sink& sink) {
            Tensor dx(g.shape());
            dx.array() = g.array() * s;
            sink.add(x, std::move(dx));
        });
    }

    /// Scalar (1,1,1,1) sum of all entries.
    Var sum(Var x) {
        Tensor out(1, 1, 1, 1, value(x).array().sum());
        const Shape shape = value(x).shape();
        return push(std::move(out), false, node(x).requires_grad, {x}, [x, shape](const Tensor& g, Sink& sink) {
            sink.add(x, Tensor(shape, g[0]));
        });
    }

    /// Scalar mean squared difference.
    Var mse(Var pred, Var target) {
        require_same_shape(value(pred).shape(), value(target).shape(), "mse");
        const Index n = value(pred).size();
        const Scalar loss = (value(pred).array() - value(target).array()).square().sum() / Scalar(n);
        return push(Tensor(1, 1, 1, 1, loss), false, any_grad({pred, target}), {pred, target},
                    [this, pred, target, n](const Tensor& g, Sink& sink) {
                        Tensor d(value(pred).shape());
                        d.array() = (value(pred).array() - value(target).array()) * (Scalar(2) * g[0] / Scalar(n));
                        if (node(target).requires_grad) {
                            Tensor dt(d.shape());
                            dt.array() = -d.array();
                            sink.add(target, std::move(dt));
                        }
                        sink.add(pred, std::move(d));
                    });
    }

    /// Scalar mean of |x|; subgradient 0 at x == 0.
    Var mean_abs(Var x) {
        const Index n = value(x).size();
        const Scalar v = value(x).array().abs().sum() / Scalar(n);
        return push(Tensor(1, 1, 1, 1, v), false, node(x).requires_grad, {x}, [this, x, n](const Tensor& g, Sink& sink) {
            Tensor d(value(x).shape());
            d.array() = value(x).array().sign() * (g[0] / Scalar(n));
            sink.add(x, std::move(d));
        });
    }

    /// Reverse sweep from a scalar. Every trainable leaf receives a gradient.
    Gradients<Scalar> backward(Var loss) const {
        if (value(loss).size() != 1)
            throw ContractError("backward: loss must be scalar, got shape " + value(loss).shape().str());
        Sink sink(nodes_);
        sink.add(loss, Tensor(1, 1, 1, 1, Scalar(1)));
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            const Node& n = nodes_[i];
            if (!sink.grads[i] || !n.requires_grad || !n.backward) continue;
            n.backward(*sink.grads[i], sink);
        }
        std::vector<std::optional<Tensor>> out(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!nodes_[i].trainable) continue;
            out[i] = sink.grads[i] ? std::move(*sink.grads[i]) : Tensor(nodes_[i].value.shape());
        }
        return Gradients<Scalar>(std::move(out));
    }

    /// Hash of the on/off pattern of every ReLU input. Finite-difference checks use it
    /// to detect perturbations that cross a kink.
    std::uint64_t relu_pattern_hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (Var v : relu_inputs_) {
            for (Index i = 0; i < value(v).size(); ++i) {
                h ^= value(v)[i] > Scalar(0) ? 1u : 0u;
                h *= 1099511628211ull;
            }
        }
        return h;
    }

private:
    struct Node;

    struct Sink {
        explicit Sink(const std::vector<Node>& nodes) : grads(nodes.size()) {}

        void add(Var v, Tensor&& g) {
            auto& slot = grads[v.id];
            if (!slot)
                slot = std::move(g);
            else
                slot->array() += g.array();
        }

        std::vector<std::optional<Tensor>> grads;
    };

    using Backward = std::function<void(const Tensor&, Sink&)>;

    struct Node {
        Tensor value;
        bool trainable = false;
        bool requires_grad = false;
        std::vector<Var> inputs;
        Backward backward;
    };

    const Node& node(Var v) const {
        if (v.id >= nodes_.size()) throw ContractError("unknown tape variable " + std::to_string(v.id));
        return nodes_[v.id];
    }

    bool any_grad(std::initializer_list<Var> vars) const {
        for (Var v : vars)
            if (node(v).requires_grad) return true;
        return false;
    }

    Var push(Tensor value, bool trainable, bool requires_grad, std::vector<Var> inputs, Backward backward) {
        nodes_.push_back(Node{std::move(value), trainable, requires_grad, std::move(inputs), std::move(backward)});
        return Var{nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
    std::vector<Var> relu_inputs_;
};

}  // namespace dautomap
