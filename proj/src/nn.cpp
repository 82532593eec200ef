#include "memo/nn.hpp"

#include <cmath>
#include <cstring>

namespace memo {

void ParamStore::add_layer(Matrix weight, Vector bias, Activation activation) {
    if (weight.rows() != bias.size()) {
        throw DimensionError("layer bias length does not match weight rows");
    }
    if (!layers_.empty() && layers_.back().weight.rows() != weight.cols()) {
        throw DimensionError("layer input dim does not chain with previous output dim");
    }
    layers_.push_back(Layer{std::move(weight), std::move(bias), activation});
    ++version_;
}

int ParamStore::input_dim() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int ParamStore::output_dim() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t ParamStore::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) {
        n += static_cast<std::size_t>(l.weight.size()) + static_cast<std::size_t>(l.bias.size());
    }
    return n;
}

GradStore GradStore::zeros_like(const ParamStore& params) {
    GradStore g;
    for (const Layer& l : params.layers()) {
        g.layers_.push_back(LayerGrad{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                                      Vector::Zero(l.bias.size())});
    }
    return g;
}

void GradStore::set_zero() {
    for (LayerGrad& l : layers_) {
        l.weight.setZero();
        l.bias.setZero();
    }
}

void GradStore::add(const GradStore& other) {
    if (other.layers_.size() != layers_.size()) {
        throw DimensionError("gradient stores have different layer counts");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].weight += other.layers_[i].weight;
        layers_[i].bias += other.layers_[i].bias;
    }
}

void GradStore::scale(double factor) {
    for (LayerGrad& l : layers_) {
        l.weight *= factor;
        l.bias *= factor;
    }
}

double GradStore::squared_norm() const {
    double s = 0.0;
    for (const LayerGrad& l : layers_) {
        s += l.weight.squaredNorm() + l.bias.squaredNorm();
    }
    return s;
}

bool GradStore::all_finite() const {
    for (const LayerGrad& l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

AdamState AdamState::zeros_like(const ParamStore& params) {
    AdamState s;
    for (const Layer& l : params.layers()) {
        s.m.push_back(LayerGrad{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                                Vector::Zero(l.bias.size())});
        s.v.push_back(LayerGrad{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                                Vector::Zero(l.bias.size())});
    }
    return s;
}

AdamVecState AdamVecState::zeros(int dim) {
    AdamVecState s;
    s.m = Vector::Zero(dim);
    s.v = Vector::Zero(dim);
    return s;
}

namespace {

inline void apply_activation_inplace(Vector& v, Activation act) {
    if (act == Activation::kTanh) {
        v = v.array().tanh();
    }
}

inline void apply_activation_inplace(Matrix& m, Activation act) {
    if (act == Activation::kTanh) {
        m = m.array().tanh();
    }
}

}  // namespace

Vector mlp_forward(const ParamStore& params, const Vector& x, MlpTape* tape) {
    if (params.num_layers() == 0) throw DimensionError("empty parameter store");
    if (x.size() != params.input_dim()) {
        throw DimensionError("input size does not match first layer input dim");
    }
    if (tape) {
        tape->params_ = &params;
        tape->version_ = params.version();
        tape->input_ = x;
        tape->post_.clear();
        tape->post_.reserve(params.num_layers());
        tape->consumed_ = false;
    }
    Vector h = x;
    for (const Layer& l : params.layers()) {
        Vector z = l.weight * h + l.bias;
        apply_activation_inplace(z, l.activation);
        if (tape) tape->post_.push_back(z);
        h = std::move(z);
    }
    return h;
}

Vector mlp_backward(const MlpTape& tape, const Vector& output_grad, GradStore& grads) {
    if (!tape.valid()) throw StaleTapeError("backward on an empty tape");
    if (tape.consumed_) throw StaleTapeError("tape already consumed by a backward pass");
    if (tape.version_ != tape.params_->version()) {
        throw StaleTapeError("parameters mutated since the forward pass");
    }
    const ParamStore& params = *tape.params_;
    if (output_grad.size() != params.output_dim()) {
        throw DimensionError("loss gradient size does not match output dim");
    }
    if (grads.layers().size() != static_cast<std::size_t>(params.num_layers())) {
        throw DimensionError("gradient store shape does not match parameters");
    }
    tape.consumed_ = true;

    Vector delta = output_grad;
    for (int i = params.num_layers() - 1; i >= 0; --i) {
        const Layer& l = params.layers()[i];
        if (l.activation == Activation::kTanh) {
            delta.array() *= 1.0 - tape.post_[i].array().square();
        }
        const Vector& in = (i == 0) ? tape.input_ : tape.post_[i - 1];
        grads.layers()[i].weight.noalias() += delta * in.transpose();
        grads.layers()[i].bias += delta;
        delta = l.weight.transpose() * delta;
    }
    return delta;
}

Matrix mlp_forward_batch(const ParamStore& params, const Matrix& x, BatchTape* tape) {
    if (params.num_layers() == 0) throw DimensionError("empty parameter store");
    if (x.cols() != params.input_dim()) {
        throw DimensionError("input cols do not match first layer input dim");
    }
    if (tape) {
        tape->params_ = &params;
        tape->version_ = params.version();
        tape->input_ = x;
        tape->post_.clear();
        tape->post_.reserve(params.num_layers());
        tape->consumed_ = false;
    }
    Matrix h = x;
    for (const Layer& l : params.layers()) {
        Matrix z = (h * l.weight.transpose()).rowwise() + l.bias.transpose();
        apply_activation_inplace(z, l.activation);
        if (tape) tape->post_.push_back(z);
        h = std::move(z);
    }
    return h;
}

Matrix mlp_backward_batch(const BatchTape& tape, const Matrix& output_grad, GradStore& grads) {
    if (!tape.valid()) throw StaleTapeError("backward on an empty tape");
    if (tape.consumed_) throw StaleTapeError("tape already consumed by a backward pass");
    if (tape.version_ != tape.params_->version()) {
        throw StaleTapeError("parameters mutated since the forward pass");
    }
    const ParamStore& params = *tape.params_;
    if (output_grad.cols() != params.output_dim() || output_grad.rows() != tape.input_.rows()) {
        throw DimensionError("loss gradient shape does not match forward output");
    }
    if (grads.layers().size() != static_cast<std::size_t>(params.num_layers())) {
        throw DimensionError("gradient store shape does not match parameters");
    }
    tape.consumed_ = true;

    Matrix delta = output_grad;
    for (int i = params.num_layers() - 1; i >= 0; --i) {
        const Layer& l = params.layers()[i];
        if (l.activation == Activation::kTanh) {
            delta.array() *= 1.0 - tape.post_[i].array().square();
        }
        const Matrix& in = (i == 0) ? tape.input_ : tape.post_[i - 1];
        grads.layers()[i].weight.noalias() += delta.transpose() * in;
        grads.layers()[i].bias += delta.colwise().sum().transpose();
        delta = delta * l.weight;
    }
    return delta;
}

Matrix orthogonal_init(int rows, int cols, double gain, Rng& rng) {
    if (rows < 1 || cols < 1) throw DimensionError("orthogonal_init needs positive dimensions");
    if (!(gain > 0.0)) throw DimensionError("orthogonal_init needs positive gain");

    const int n = std::max(rows, cols);
    const int m = std::min(rows, cols);
    Matrix a(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            a(i, j) = rng.gaussian();
        }
    }

    // Householder QR with explicit reflectors.
    std::vector<Vector> reflectors(m);
    Vector r_diag(m);
    for (int k = 0; k < m; ++k) {
        Vector x = a.col(k).tail(n - k);
        double norm_x = x.norm();
        if (norm_x == 0.0) {
            r_diag(k) = 0.0;
            continue;
        }
        double alpha = x(0) >= 0.0 ? -norm_x : norm_x;
        Vector v = x;
        v(0) -= alpha;
        double norm_v = v.norm();
        if (norm_v > 0.0) {
            v /= norm_v;
            a.bottomRightCorner(n - k, m - k) -=
                2.0 * v * (v.transpose() * a.bottomRightCorner(n - k, m - k));
            reflectors[k] = std::move(v);
        }
        r_diag(k) = a(k, k);
    }

    Matrix q = Matrix::Identity(n, m);
    for (int k = m - 1; k >= 0; --k) {
        if (reflectors[k].size() == 0) continue;
        const Vector& v = reflectors[k];
        q.bottomRows(n - k) -= 2.0 * v * (v.transpose() * q.bottomRows(n - k));
    }
    for (int j = 0; j < m; ++j) {
        if (r_diag(j) < 0.0) q.col(j) = -q.col(j);
    }

    if (rows >= cols) return gain * q;
    return gain * q.transpose();
}

namespace {

void check_congruent(const ParamStore& params, const GradStore& grads, const AdamState& state) {
    const std::size_t n = params.layers().size();
    if (grads.layers().size() != n || state.m.size() != n || state.v.size() != n) {
        throw DimensionError("adam_step: layer counts differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Layer& l = params.layers()[i];
        const LayerGrad& g = grads.layers()[i];
        if (g.weight.rows() != l.weight.rows() || g.weight.cols() != l.weight.cols() ||
            g.bias.size() != l.bias.size()) {
            throw DimensionError("adam_step: gradient shape mismatch");
        }
        if (state.m[i].weight.rows() != l.weight.rows() ||
            state.m[i].weight.cols() != l.weight.cols()) {
            throw DimensionError("adam_step: moment shape mismatch");
        }
    }
}

template <typename TParam, typename TGrad>
inline void adam_update_array(TParam& p, const TGrad& g, TParam& m, TParam& v, double lr,
                              double beta1, double beta2, double eps, long step) {
    m.array() = beta1 * m.array() + (1.0 - beta1) * g.array();
    v.array() = beta2 * v.array() + (1.0 - beta2) * g.array().square();
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (!(lr > 0.0)) throw DimensionError("adam_step: learning rate must be positive");
    check_congruent(params, grads, state);
    ++state.step;
    auto& layers = params.layers_mut();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        adam_update_array(layers[i].weight, grads.layers()[i].weight, state.m[i].weight,
                          state.v[i].weight, lr, beta1, beta2, eps, state.step);
        adam_update_array(layers[i].bias, grads.layers()[i].bias, state.m[i].bias,
                          state.v[i].bias, lr, beta1, beta2, eps, state.step);
    }
}

void adam_step_vec(Vector& param, const Vector& grad, AdamVecState& state, double lr, double beta1,
                   double beta2, double eps) {
    if (param.size() != grad.size() || param.size() != state.m.size()) {
        throw DimensionError("adam_step_vec: shape mismatch");
    }
    if (!(lr > 0.0)) throw DimensionError("adam_step_vec: learning rate must be positive");
    ++state.step;
    adam_update_array(param, grad, state.m, state.v, lr, beta1, beta2, eps, state.step);
}

ParamStore make_mlp(const std::vector<int>& dims, const std::vector<Activation>& activations,
                    const std::vector<double>& gains, Rng& rng) {
    if (dims.size() < 2 || activations.size() != dims.size() - 1 ||
        gains.size() != dims.size() - 1) {
        throw DimensionError("make_mlp: dims/activations/gains lengths inconsistent");
    }
    ParamStore params;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        params.add_layer(orthogonal_init(dims[i + 1], dims[i], gains[i], rng),
                         Vector::Zero(dims[i + 1]), activations[i]);
    }
    return params;
}

bool exactly_equal(const ParamStore& a, const ParamStore& b) {
    if (a.num_layers() != b.num_layers()) return false;
    for (int i = 0; i < a.num_layers(); ++i) {
        const Layer& la = a.layers()[i];
        const Layer& lb = b.layers()[i];
        if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols() ||
            la.bias.size() != lb.bias.size() || la.activation != lb.activation) {
            return false;
        }
        if (std::memcmp(la.weight.data(), lb.weight.data(),
                        sizeof(double) * static_cast<std::size_t>(la.weight.size())) != 0) {
            return false;
        }
        if (std::memcmp(la.bias.data(), lb.bias.data(),
                        sizeof(double) * static_cast<std::size_t>(la.bias.size())) != 0) {
            return false;
        }
    }
    return true;
}

}  // namespace memo
