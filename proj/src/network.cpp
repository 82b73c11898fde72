#include "maskaudit/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>

#include "maskaudit/errors.hpp"
#include "maskaudit/masking.hpp"
#include "maskaudit/rng.hpp"

namespace maskaudit::net {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void validate_layer(const Layer& layer) {
    std::visit(overloaded{
                   [](const Dense& d) {
                       if (d.W.rows() == 0 || d.W.cols() == 0) {
                           throw ShapeError("dense layer: empty weight matrix");
                       }
                       if (d.b.size() != d.W.rows()) {
                           throw ShapeError("dense layer: bias size does not match rows");
                       }
                   },
                   [](const Sigmoid& s) { mask::require_gain(s.gain); },
                   [](const Staircase& s) { mask::require_levels(s.levels); },
                   [](const RampStaircase& r) {
                       mask::require_levels(r.levels);
                       mask::require_delta(r.delta);
                   },
                   [](const auto&) {},
               },
               layer);
}

template <class T>
std::vector<std::vector<T>>& acts_of(EvalWorkspace& ws) {
    if constexpr (std::is_same_v<T, double>) {
        return ws.acts_d;
    } else {
        return ws.acts_f;
    }
}

template <class T>
std::pair<std::vector<T>*, std::vector<T>*> cot_of(EvalWorkspace& ws) {
    if constexpr (std::is_same_v<T, double>) {
        return {&ws.cot_d_a, &ws.cot_d_b};
    } else {
        return {&ws.cot_f_a, &ws.cot_f_b};
    }
}

template <class T>
void apply_layer(const Layer& layer, const std::vector<T>& in, std::vector<T>& out) {
    std::visit(
        overloaded{
            [&](const Dense& d) {
                const std::size_t rows = d.W.rows();
                const std::size_t cols = d.W.cols();
                out.resize(rows);
                for (std::size_t i = 0; i < rows; ++i) {
                    T acc = static_cast<T>(d.b[i]);
                    const double* w = d.W.row(i).data();
                    for (std::size_t j = 0; j < cols; ++j) {
                        acc += static_cast<T>(w[j]) * in[j];
                    }
                    out[i] = acc;
                }
            },
            [&](const Relu&) {
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) {
                    out[i] = in[i] > T(0) ? in[i] : T(0);
                }
            },
            [&](const Sigmoid& s) {
                const T g = static_cast<T>(s.gain);
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) {
                    out[i] = mask::sigmoid_eval_t(in[i], g);
                }
            },
            [&](const Staircase& s) {
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) {
                    out[i] = mask::staircase_eval_t(in[i], s.levels);
                }
            },
            [&](const RampStaircase& r) {
                const T dl = static_cast<T>(r.delta);
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) {
                    out[i] = mask::ramp_staircase_eval_t(in[i], r.levels, dl);
                }
            },
            [&](const Identity&) { out.assign(in.begin(), in.end()); },
        },
        layer);
}

template <class T>
void backward_layer(const Layer& layer, const std::vector<T>& in, const std::vector<T>& cot,
                    std::vector<T>& cot_in, BackwardMode mode) {
    std::visit(
        overloaded{
            [&](const Dense& d) {
                const std::size_t rows = d.W.rows();
                const std::size_t cols = d.W.cols();
                cot_in.assign(cols, T(0));
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* w = d.W.row(i).data();
                    const T c = cot[i];
                    for (std::size_t j = 0; j < cols; ++j) {
                        cot_in[j] += static_cast<T>(w[j]) * c;
                    }
                }
            },
            [&](const Relu&) {
                cot_in.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) {
                    cot_in[i] = in[i] > T(0) ? cot[i] : T(0);
                }
            },
            [&](const Sigmoid& s) {
                const T g = static_cast<T>(s.gain);
                cot_in.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) {
                    const T sig = mask::sigmoid_eval_t(in[i], g);
                    cot_in[i] = cot[i] * g * sig * (T(1) - sig);
                }
            },
            [&](const Staircase&) {
                if (mode == BackwardMode::bpda) {
                    cot_in.assign(cot.begin(), cot.end());
                } else {
                    cot_in.assign(in.size(), T(0));
                }
            },
            [&](const RampStaircase& r) {
                if (mode == BackwardMode::bpda) {
                    cot_in.assign(cot.begin(), cot.end());
                } else {
                    const T dl = static_cast<T>(r.delta);
                    cot_in.resize(in.size());
                    for (std::size_t i = 0; i < in.size(); ++i) {
                        cot_in[i] = cot[i] * mask::ramp_staircase_grad_t(in[i], r.levels, dl);
                    }
                }
            },
            [&](const Identity&) { cot_in.assign(cot.begin(), cot.end()); },
        },
        layer);
}

template <class T>
void forward_core(const Model& m, std::span<const double> x, EvalWorkspace& ws) {
    auto& acts = acts_of<T>(ws);
    acts.resize(m.layers.size() + 1);
    acts[0].resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) acts[0][i] = static_cast<T>(x[i]);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        apply_layer<T>(m.layers[l], acts[l], acts[l + 1]);
    }
}

template <class T>
void backward_core(const Model& m, int i, int j, std::vector<double>& grad, EvalWorkspace& ws) {
    auto& acts = acts_of<T>(ws);
    auto [ca, cb] = cot_of<T>(ws);
    std::vector<T>* cot = ca;
    std::vector<T>* cot_next = cb;
    cot->assign(m.num_classes, T(0));
    (*cot)[static_cast<std::size_t>(i)] = T(1);
    (*cot)[static_cast<std::size_t>(j)] -= T(1);
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        backward_layer<T>(m.layers[l], acts[l], *cot, *cot_next, m.backward_mode);
        std::swap(cot, cot_next);
    }
    grad.resize(cot->size());
    for (std::size_t k = 0; k < cot->size(); ++k) grad[k] = static_cast<double>((*cot)[k]);
}

void require_classes(const Model& m, int i, int j) {
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= m.num_classes ||
        static_cast<std::size_t>(j) >= m.num_classes) {
        throw ArgumentError("class index out of range");
    }
    if (i == j) throw ArgumentError("head gradient needs two distinct class indices");
}

void require_input(const Model& m, std::span<const double> x) {
    if (x.size() != m.input_dim) {
        throw ShapeError("input size " + std::to_string(x.size()) + " does not match input_dim " +
                         std::to_string(m.input_dim));
    }
    check_finite(x, "model input");
}

} // namespace

void Model::validate() const {
    if (input_dim == 0) throw ShapeError("model: input_dim must be >= 1");
    if (num_classes < 2) throw ShapeError("model: num_classes must be >= 2");
    std::size_t width = input_dim;
    for (const Layer& layer : layers) {
        validate_layer(layer);
        if (const auto* d = std::get_if<Dense>(&layer)) {
            if (d->W.cols() != width) {
                throw ShapeError("dense layer expects width " + std::to_string(d->W.cols()) +
                                 " but receives " + std::to_string(width));
            }
        }
        width = layer_out_dim(layer, width);
    }
    if (width != num_classes) {
        throw ShapeError("model output width " + std::to_string(width) +
                         " does not match num_classes " + std::to_string(num_classes));
    }
}

void forward_into(const Model& m, std::span<const double> x, std::vector<double>& logits,
                  EvalWorkspace& ws) {
    require_input(m, x);
    if (m.precision == Precision::f32) {
        forward_core<float>(m, x, ws);
        const auto& out = ws.acts_f.back();
        logits.assign(out.begin(), out.end());
    } else {
        forward_core<double>(m, x, ws);
        logits = ws.acts_d.back();
    }
}

Vector forward(const Model& m, const Vector& x) {
    m.validate();
    EvalWorkspace ws;
    std::vector<double> logits;
    forward_into(m, x.span(), logits, ws);
    return Vector(std::move(logits));
}

int predict(const Model& m, const Vector& x) {
    EvalWorkspace ws;
    std::vector<double> logits;
    forward_into(m, x.span(), logits, ws);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double margin(const Model& m, const Vector& x, int i, int j) {
    require_classes(m, i, j);
    EvalWorkspace ws;
    std::vector<double> logits;
    forward_into(m, x.span(), logits, ws);
    return logits[static_cast<std::size_t>(i)] - logits[static_cast<std::size_t>(j)];
}

void head_gradient_into(const Model& m, std::span<const double> x, int i, int j,
                        std::vector<double>& grad, EvalWorkspace& ws) {
    require_input(m, x);
    require_classes(m, i, j);
    if (m.precision == Precision::f32) {
        forward_core<float>(m, x, ws);
        backward_core<float>(m, i, j, grad, ws);
    } else {
        forward_core<double>(m, x, ws);
        backward_core<double>(m, i, j, grad, ws);
    }
}

Vector scalar_head_gradient(const Model& m, const Vector& x, int i, int j) {
    m.validate();
    EvalWorkspace ws;
    std::vector<double> grad;
    head_gradient_into(m, x.span(), i, j, grad, ws);
    return Vector(std::move(grad));
}

Vector finite_diff_gradient(const Model& m, const Vector& x, int i, int j, double step) {
    m.validate();
    require_classes(m, i, j);
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw ArgumentError("finite difference step must be finite and > 0");
    }
    EvalWorkspace ws;
    std::vector<double> logits;
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    const auto head = [&](double& out) {
        forward_into(m, probe, logits, ws);
        out = logits[static_cast<std::size_t>(i)] - logits[static_cast<std::size_t>(j)];
    };
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double orig = probe[k];
        double up = 0.0;
        double down = 0.0;
        probe[k] = orig + step;
        head(up);
        probe[k] = orig - step;
        head(down);
        probe[k] = orig;
        grad[k] = (up - down) / (2.0 * step);
    }
    return Vector(std::move(grad));
}

const Dense* as_single_dense(const Model& m) {
    const Dense* found = nullptr;
    for (const Layer& layer : m.layers) {
        if (const auto* d = std::get_if<Dense>(&layer)) {
            if (found != nullptr) return nullptr;
            found = d;
        } else if (!std::holds_alternative<Identity>(layer)) {
            return nullptr;
        }
    }
    return found;
}

// ---- toy data ----------------------------------------------------------------

Dataset make_blobs(std::uint64_t seed, int n_per_class, int d, int num_classes,
                   double separation) {
    if (n_per_class < 0) throw ArgumentError("make_blobs: n_per_class must be >= 0");
    if (d < 1) throw ArgumentError("make_blobs: dimension must be >= 1");
    if (num_classes < 2) throw ArgumentError("make_blobs: num_classes must be >= 2");
    if (num_classes > d) {
        throw ArgumentError("make_blobs: num_classes must be <= dimension for distinct centers");
    }
    if (!std::isfinite(separation) || separation < 0.0) {
        throw DomainError("make_blobs: separation must be finite and >= 0");
    }
    rng::Stream rs(seed);
    Dataset data;
    data.dim = static_cast<std::size_t>(d);
    data.num_classes = static_cast<std::size_t>(num_classes);
    data.seed = seed;
    data.points.reserve(static_cast<std::size_t>(n_per_class) * num_classes);
    data.labels.reserve(data.points.capacity());
    for (int k = 0; k < num_classes; ++k) {
        for (int i = 0; i < n_per_class; ++i) {
            std::vector<double> p(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) {
                const double center = (j == k) ? separation : 0.0;
                p[static_cast<std::size_t>(j)] = center + rs.normal();
            }
            data.points.emplace_back(std::move(p));
            data.labels.push_back(k);
        }
    }
    return data;
}

// ---- toy training -------------------------------------------------------------

namespace {

struct DenseGrad {
    Matrix dW;
    Vector db;
};

double softmax_ce(const std::vector<double>& logits, int label, std::vector<double>& probs) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    probs.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        probs[k] = std::exp(logits[k] - mx);
        z += probs[k];
    }
    for (double& p : probs) p /= z;
    return -std::log(probs[static_cast<std::size_t>(label)] + 1e-300);
}

} // namespace

Model train_toy(const ArchSpec& arch, const Dataset& data, double lr, int epochs,
                std::uint64_t seed) {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ArgumentError("train_toy: lr must be > 0");
    if (epochs < 0) throw ArgumentError("train_toy: epochs must be >= 0");
    if (arch.activation != "relu" && arch.activation != "sigmoid") {
        throw ArgumentError("train_toy: activation must be \"relu\" or \"sigmoid\"");
    }
    for (int h : arch.hidden) {
        if (h < 1) throw ArgumentError("train_toy: hidden widths must be >= 1");
    }
    if (data.points.empty()) throw ArgumentError("train_toy: empty dataset");
    if (data.points.size() != data.labels.size()) {
        throw ShapeError("train_toy: points/labels size mismatch");
    }
    for (int y : data.labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= data.num_classes) {
            throw ArgumentError("train_toy: label out of range");
        }
    }

    // Build layer widths input -> hidden... -> classes.
    std::vector<std::size_t> widths;
    widths.push_back(data.dim);
    for (int h : arch.hidden) widths.push_back(static_cast<std::size_t>(h));
    widths.push_back(data.num_classes);

    rng::Stream rs(seed);
    Model m;
    m.input_dim = data.dim;
    m.num_classes = data.num_classes;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        Matrix W(fan_out, fan_in);
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < fan_out; ++i) {
            for (std::size_t j = 0; j < fan_in; ++j) W(i, j) = scale * rs.normal();
        }
        m.layers.emplace_back(Dense{std::move(W), Vector(fan_out)});
        const bool last = (l + 2 == widths.size());
        if (!last) {
            if (arch.activation == "relu") {
                m.layers.emplace_back(Relu{});
            } else {
                m.layers.emplace_back(Sigmoid{arch.gain});
            }
        }
    }
    m.validate();

    const std::size_t n = data.points.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    EvalWorkspace ws;
    std::vector<double> probs;
    std::vector<double> cot, cot_in;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        // Gradient slots per layer (empty for non-dense layers).
        std::vector<DenseGrad> grads(m.layers.size());
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            if (const auto* dl = std::get_if<Dense>(&m.layers[l])) {
                grads[l].dW = Matrix(dl->W.rows(), dl->W.cols());
                grads[l].db = Vector(dl->b.size());
            }
        }
        double loss = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            forward_core<double>(m, data.points[s].span(), ws);
            loss += softmax_ce(ws.acts_d.back(), data.labels[s], probs);
            cot = probs;
            cot[static_cast<std::size_t>(data.labels[s])] -= 1.0;
            for (std::size_t l = m.layers.size(); l-- > 0;) {
                const std::vector<double>& in = ws.acts_d[l];
                if (auto* dl = std::get_if<Dense>(&m.layers[l])) {
                    for (std::size_t i = 0; i < dl->W.rows(); ++i) {
                        for (std::size_t j = 0; j < dl->W.cols(); ++j) {
                            grads[l].dW(i, j) += cot[i] * in[j];
                        }
                        grads[l].db[i] += cot[i];
                    }
                }
                backward_layer<double>(m.layers[l], in, cot, cot_in, BackwardMode::exact);
                std::swap(cot, cot_in);
            }
        }
        loss *= inv_n;
        if (!std::isfinite(loss)) {
            throw TrainingError("train_toy: loss diverged at epoch " + std::to_string(epoch));
        }
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            if (auto* dl = std::get_if<Dense>(&m.layers[l])) {
                for (std::size_t i = 0; i < dl->W.rows(); ++i) {
                    for (std::size_t j = 0; j < dl->W.cols(); ++j) {
                        dl->W(i, j) -= lr * inv_n * grads[l].dW(i, j);
                    }
                    dl->b[i] -= lr * inv_n * grads[l].db[i];
                }
                for (double v : dl->W.raw()) {
                    if (!std::isfinite(v)) {
                        throw TrainingError("train_toy: weights diverged at epoch " +
                                            std::to_string(epoch));
                    }
                }
            }
        }
    }
    return m;
}

double dataset_accuracy(const Model& m, const Dataset& data) {
    if (data.points.empty()) throw ArgumentError("dataset_accuracy: empty dataset");
    m.validate();
    EvalWorkspace ws;
    std::vector<double> logits;
    std::size_t hits = 0;
    for (std::size_t s = 0; s < data.points.size(); ++s) {
        forward_into(m, data.points[s].span(), logits, ws);
        const int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                                          logits.begin());
        if (pred == data.labels[s]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.points.size());
}

} // namespace maskaudit::net
