#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "memo/errors.hpp"
#include "memo/rng.hpp"

namespace memo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kTanh, kIdentity };

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::kTanh;
};

// Ordered dense layers with chained dimensions. Any mutable access bumps the
// version counter, which invalidates tapes recorded against older parameters.
class ParamStore {
public:
    ParamStore() = default;

    void add_layer(Matrix weight, Vector bias, Activation activation);

    int num_layers() const { return static_cast<int>(layers_.size()); }
    int input_dim() const;
    int output_dim() const;
    std::size_t param_count() const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers_mut() {
        ++version_;
        return layers_;
    }

    std::uint64_t version() const { return version_; }
    void bump_version() { ++version_; }

private:
    std::vector<Layer> layers_;
    std::uint64_t version_ = 0;
};

struct LayerGrad {
    Matrix weight;
    Vector bias;
};

class GradStore {
public:
    GradStore() = default;
    static GradStore zeros_like(const ParamStore& params);

    void set_zero();
    void add(const GradStore& other);
    void scale(double factor);
    double squared_norm() const;
    bool all_finite() const;

    std::vector<LayerGrad>& layers() { return layers_; }
    const std::vector<LayerGrad>& layers() const { return layers_; }

private:
    std::vector<LayerGrad> layers_;
};

struct AdamState {
    std::vector<LayerGrad> m;
    std::vector<LayerGrad> v;
    long step = 0;

    static AdamState zeros_like(const ParamStore& params);
};

struct AdamVecState {
    Vector m;
    Vector v;
    long step = 0;

    static AdamVecState zeros(int dim);
};

// Record of one forward pass; consumed by exactly one backward pass.
class MlpTape {
public:
    bool valid() const { return params_ != nullptr; }

private:
    friend Vector mlp_forward(const ParamStore&, const Vector&, MlpTape*);
    friend Vector mlp_backward(const MlpTape&, const Vector&, GradStore&);

    const ParamStore* params_ = nullptr;
    std::uint64_t version_ = 0;
    Vector input_;
    std::vector<Vector> post_;  // post-activation outputs per layer
    mutable bool consumed_ = false;
};

// Batched flavor: rows are samples. Backward accumulates the *sum* of
// per-sample parameter gradients; callers scale the output gradient for means.
class BatchTape {
public:
    bool valid() const { return params_ != nullptr; }

private:
    friend Matrix mlp_forward_batch(const ParamStore&, const Matrix&, BatchTape*);
    friend Matrix mlp_backward_batch(const BatchTape&, const Matrix&, GradStore&);

    const ParamStore* params_ = nullptr;
    std::uint64_t version_ = 0;
    Matrix input_;
    std::vector<Matrix> post_;
    mutable bool consumed_ = false;
};

Vector mlp_forward(const ParamStore& params, const Vector& x, MlpTape* tape = nullptr);

// Returns dL/dx and accumulates parameter gradients into `grads`.
Vector mlp_backward(const MlpTape& tape, const Vector& output_grad, GradStore& grads);

Matrix mlp_forward_batch(const ParamStore& params, const Matrix& x, BatchTape* tape = nullptr);
Matrix mlp_backward_batch(const BatchTape& tape, const Matrix& output_grad, GradStore& grads);

// Householder QR of a seeded Gaussian matrix with sign correction on R's
// diagonal. rows <= cols gives M*M^T = gain^2*I, rows > cols M^T*M = gain^2*I.
Matrix orthogonal_init(int rows, int cols, double gain, Rng& rng);

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
void adam_step_vec(Vector& param, const Vector& grad, AdamVecState& state, double lr,
                   double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Orthogonally initialized MLP with zero biases. dims = {in, h1, ..., out},
// one activation and gain per layer.
ParamStore make_mlp(const std::vector<int>& dims, const std::vector<Activation>& activations,
                    const std::vector<double>& gains, Rng& rng);

// Bitwise equality of every weight and bias.
bool exactly_equal(const ParamStore& a, const ParamStore& b);

}  // namespace memo
