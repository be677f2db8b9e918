#pragma once

// Adam and RMSProp over a list of named parameter tensors.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dautomap/tensor.hpp"

namespace dautomap {

enum class OptimizerKind : std::uint8_t { adam = 0, rmsprop = 1 };

inline std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "rmsprop"; }

inline OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "rmsprop") return OptimizerKind::rmsprop;
    throw ConfigError("unknown optimizer \"" + std::string(name) + "\" (expected adam or rmsprop)");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double alpha = 0.99;
    double eps = 1e-8;
    /// Global L2 gradient clip; 0 disables.
    double max_grad_norm = 0.0;

    /// Adam: lr 1e-3. RMSProp: lr 2e-5.
    static OptimizerConfig defaults(OptimizerKind kind) {
        OptimizerConfig c;
        c.kind = kind;
        c.lr = kind == OptimizerKind::adam ? 1e-3 : 2e-5;
        return c;
    }
};

/// Adam (bias-corrected):
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// RMSProp:
///   v = alpha v + (1 - alpha) g^2,  p -= lr * g / (sqrt(v) + eps)
template <class Scalar>
class Optimizer {
public:
    Optimizer(OptimizerConfig config, const std::vector<ConstNamedTensor<Scalar>>& params) : config_(config) {
        if (!(config.lr >= 0) || !(config.eps > 0)) throw ConfigError("optimizer: lr must be >= 0 and eps > 0");
        if (!(config.max_grad_norm >= 0)) throw ConfigError("optimizer: max_grad_norm must be >= 0");
        for (const auto& p : params) {
            names_.push_back(p.name);
            first_.emplace_back(p.tensor->shape());
            if (config.kind == OptimizerKind::adam) second_.emplace_back(p.tensor->shape());
        }
    }

    const OptimizerConfig& config() const noexcept { return config_; }
    std::uint64_t steps() const noexcept { return step_; }

    /// One update. grads[i] pairs with params[i]; names and shapes must match construction.
    void step(const std::vector<NamedTensor<Scalar>>& params, const std::vector<Tensor4<Scalar>>& grads) {
        if (params.size() != names_.size() || grads.size() != names_.size())
            throw ContractError("optimizer: expected " + std::to_string(names_.size()) + " parameters and gradients");
        double norm2 = 0;
        for (std::size_t i = 0; i < grads.size(); ++i) {
            if (params[i].name != names_[i]) throw ContractError("optimizer: parameter " + std::to_string(i) +
                                                                 " is " + params[i].name + ", expected " + names_[i]);
            require_same_shape(grads[i].shape(), first_[i].shape(), "optimizer gradient");
            require_same_shape(params[i].tensor->shape(), first_[i].shape(), "optimizer parameter");
            if (!grads[i].array().isFinite().all())
                throw TrainingError("non-finite gradient in " + names_[i]);
            norm2 += grads[i].array().template cast<double>().square().sum();
        }
        Scalar clip(1);
        if (config_.max_grad_norm > 0 && std::sqrt(norm2) > config_.max_grad_norm)
            clip = Scalar(config_.max_grad_norm / std::sqrt(norm2));

        ++step_;
        const Scalar lr(config_.lr), eps(config_.eps);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            auto& m = first_[i].array();
            const auto g = (grads[i].array() * clip).eval();
            if (config_.kind == OptimizerKind::adam) {
                const Scalar b1(config_.beta1), b2(config_.beta2);
                const Scalar c1 = Scalar(1.0 - std::pow(config_.beta1, double(step_)));
                const Scalar c2 = Scalar(1.0 - std::pow(config_.beta2, double(step_)));
                auto& v = second_[i].array();
                m = b1 * m + (Scalar(1) - b1) * g;
                v = b2 * v + (Scalar(1) - b2) * g.square();
                params[i].tensor->array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            } else {
                const Scalar a(config_.alpha);
                m = a * m + (Scalar(1) - a) * g.square();
                params[i].tensor->array() -= lr * g / (m.sqrt() + eps);
            }
        }
    }

    /// State tensors for checkpoints: "<param>.m", "<param>.v" (Adam) or "<param>.sq" (RMSProp).
    std::vector<NamedTensor<Scalar>> state() {
        std::vector<NamedTensor<Scalar>> out;
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (config_.kind == OptimizerKind::adam) {
                out.push_back({names_[i] + ".m", &first_[i]});
                out.push_back({names_[i] + ".v", &second_[i]});
            } else {
                out.push_back({names_[i] + ".sq", &first_[i]});
            }
        }
        return out;
    }

    void set_steps(std::uint64_t steps) noexcept { step_ = steps; }

private:
    OptimizerConfig config_;
    std::vector<std::string> names_;
    std::vector<Tensor4<Scalar>> first_;
    std::vector<Tensor4<Scalar>> second_;
    std::uint64_t step_ = 0;
};

}  // namespace dautomap
