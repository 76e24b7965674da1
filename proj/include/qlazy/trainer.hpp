// Copyright 2026 The qlazy Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
/**
 * @file
 * Full-batch gradient descent on the quantum model and on its first-order
 * Taylor expansion around the initial parameters, with per-step traces of
 * the quantities that measure lazy training.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "kernel.hpp"
#include "lightcone.hpp"
#include "parallel.hpp"

namespace qlazy {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Name recorded in output metadata for the random engine in use.
inline constexpr const char *kRngName = "mt19937_64";

/// SplitMix64 step, used to derive independent streams from one seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// theta_j i.i.d. Uniform[-2pi, 2pi].
inline ParamVector random_params(std::size_t p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-kTwoPi, kTwoPi);
    ParamVector theta(p);
    for (double &t : theta) {
        t = u(rng);
    }
    return theta;
}

struct RandomUniformSource {
    std::uint64_t seed;
};
struct TeacherSource {
    std::uint64_t seed;
    ParamVector teacher_theta;
};
struct ExternalSource {
    std::string name;
};
using DatasetProvenance =
    std::variant<RandomUniformSource, TeacherSource, ExternalSource>;

struct Dataset {
    std::vector<FeatureVector> x;
    std::vector<double> y;
    DatasetProvenance provenance{ExternalSource{"inline"}};

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
    [[nodiscard]] std::size_t dim() const noexcept {
        return x.empty() ? 0 : x.front().size();
    }

    void validate() const {
        if (x.empty()) {
            throw InvalidArgument("Dataset: no points");
        }
        if (x.size() != y.size()) {
            throw InvalidArgument("Dataset: feature/label count mismatch");
        }
        for (const auto &row : x) {
            if (row.size() != dim() || row.empty()) {
                throw InvalidArgument("Dataset: inconsistent feature dimension");
            }
        }
    }
};

/// x coordinates Uniform[-2pi, 2pi], labels Uniform[-1, 1].
inline Dataset make_random_dataset(std::size_t n, std::size_t d,
                                   std::uint64_t seed) {
    if (n == 0 || d == 0) {
        throw InvalidArgument("make_random_dataset: n and d must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-kTwoPi, kTwoPi);
    std::uniform_real_distribution<double> uy(-1.0, 1.0);
    Dataset ds;
    ds.provenance = RandomUniformSource{seed};
    for (std::size_t i = 0; i < n; ++i) {
        FeatureVector row(d);
        for (double &v : row) {
            v = ux(rng);
        }
        ds.x.push_back(std::move(row));
        ds.y.push_back(uy(rng));
    }
    return ds;
}

/**
 * Random inputs labelled by the model itself at random teacher parameters.
 * The teacher parameters only survive in the provenance record.
 */
inline Dataset make_teacher_dataset(const LightConeModel &model, std::size_t n,
                                    std::uint64_t seed) {
    const auto d = static_cast<std::size_t>(model.circuit().feature_dim());
    Dataset ds = make_random_dataset(n, d, seed);
    ParamVector teacher = random_params(
        static_cast<std::size_t>(model.num_params()), derive_seed(seed, 1));
    for (std::size_t i = 0; i < n; ++i) {
        ds.y[i] = model.eval(teacher, ds.x[i]);
    }
    ds.provenance = TeacherSource{seed, std::move(teacher)};
    return ds;
}

/// (1/n) sum_i (1/2)(outputs_i - y_i)^2.
inline double loss(std::span<const double> outputs, std::span<const double> y) {
    if (outputs.size() != y.size()) {
        throw InvalidArgument("loss: " + std::to_string(outputs.size()) +
                              " outputs for " + std::to_string(y.size()) +
                              " labels");
    }
    if (outputs.empty()) {
        throw InvalidArgument("loss: empty outputs");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = outputs[i] - y[i];
        s += 0.5 * r * r;
    }
    return s / static_cast<double>(y.size());
}

inline double loss(std::span<const double> outputs, const Dataset &data) {
    return loss(outputs, std::span<const double>(data.y));
}

/// ||theta - theta0|| / ||theta0||; 0 when both are equal, inf if theta0 = 0.
inline double relative_change(std::span<const double> theta,
                              std::span<const double> theta0) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double d = theta[j] - theta0[j];
        num += d * d;
        den += theta0[j] * theta0[j];
    }
    if (num == 0.0) {
        return 0.0;
    }
    if (den == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::sqrt(num / den);
}

struct TraceMetadata {
    std::string model;
    double eta{1.0};
    std::uint64_t seed{0};
    int m{0};
    int depth{0};
    std::string observable;
};

struct KernelSnapshot {
    std::size_t step;
    Eigen::MatrixXd gram;
};

/// Per-step record; index t holds the state before update t+1.
struct TrainingTrace {
    TraceMetadata meta;
    std::vector<ParamVector> params;
    std::vector<double> loss;
    std::vector<std::vector<double>> outputs;
    std::vector<double> param_rel_change;
    std::vector<KernelSnapshot> kernels;

    [[nodiscard]] std::size_t steps() const noexcept { return loss.size(); }

    [[nodiscard]] const KernelSnapshot *kernel_at(std::size_t step) const {
        for (const auto &k : kernels) {
            if (k.step == step) {
                return &k;
            }
        }
        return nullptr;
    }
};

struct TrainOptions {
    /// Gram snapshot every `kernel_stride` steps (and at the last step);
    /// 0 disables snapshots.
    std::size_t kernel_stride{10};
};

inline TraceMetadata model_metadata(const LightConeModel &model,
                                    std::string kind, double eta,
                                    std::uint64_t seed) {
    TraceMetadata meta;
    meta.model = std::move(kind);
    meta.eta = eta;
    meta.seed = seed;
    meta.m = model.circuit().num_qubits();
    meta.depth = model.circuit().depth();
    meta.observable = to_string(model.observable().kind());
    return meta;
}

/// theta <- theta - eta grad L for `iterations` steps.
inline TrainingTrace train_quantum(const LightConeModel &model,
                                   const Dataset &data, ParamVector theta0,
                                   double eta, std::size_t iterations,
                                   const TrainOptions &options = {},
                                   std::uint64_t seed = 0) {
    data.validate();
    if (!(eta > 0.0)) {
        throw InvalidArgument("train_quantum: learning rate must be positive");
    }
    const std::size_t n = data.size();
    const auto p = static_cast<std::size_t>(model.num_params());
    if (theta0.size() != p) {
        throw InvalidArgument("train_quantum: theta0 has wrong length");
    }
    TrainingTrace trace;
    trace.meta = model_metadata(model, "quantum", eta, seed);
    ParamVector theta = theta0;
    std::vector<ValueAndGradient> vg(n);
    for (std::size_t t = 0;; ++t) {
        parallel_for(n, [&](std::size_t i) {
            vg[i] = value_and_gradient(model, theta, data.x[i]);
        });
        std::vector<double> outputs(n);
        for (std::size_t i = 0; i < n; ++i) {
            outputs[i] = vg[i].value;
        }
        trace.params.push_back(theta);
        trace.loss.push_back(loss(outputs, data));
        trace.param_rel_change.push_back(relative_change(theta, theta0));
        trace.outputs.push_back(outputs);
        const bool snapshot =
            options.kernel_stride > 0 &&
            (t % options.kernel_stride == 0 || t == iterations);
        if (snapshot) {
            Eigen::MatrixXd jac(static_cast<Eigen::Index>(n),
                                static_cast<Eigen::Index>(p));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < p; ++j) {
                    jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        vg[i].grad.values[j];
                }
            }
            trace.kernels.push_back({t, gram_from_jacobian(jac).entries});
        }
        if (t == iterations) {
            break;
        }
        // grad L = (1/n) sum_i (f_i - y_i) grad f_i, assembled in index order.
        std::vector<double> grad(p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = (outputs[i] - data.y[i]) / static_cast<double>(n);
            for (std::size_t j = 0; j < p; ++j) {
                grad[j] += r * vg[i].grad.values[j];
            }
        }
        for (std::size_t j = 0; j < p; ++j) {
            theta[j] -= eta * grad[j];
        }
    }
    return trace;
}

/**
 * fbar(theta0 + offset, x_i) = base_i + features_i . offset.
 */
struct LinearizedModel {
    ParamVector theta0;
    Eigen::VectorXd base;
    Eigen::MatrixXd features;
    Eigen::VectorXd offset;

    [[nodiscard]] Eigen::VectorXd predict() const { return base + features * offset; }

    /// Tangent kernel at theta0, fixed for the linear model.
    [[nodiscard]] Eigen::MatrixXd gram() const {
        return gram_from_jacobian(features).entries;
    }
};

inline LinearizedModel linearize(const LightConeModel &model, const Dataset &data,
                                 const ParamVector &theta0) {
    data.validate();
    const std::size_t n = data.size();
    const auto p = static_cast<std::size_t>(model.num_params());
    LinearizedModel lin;
    lin.theta0 = theta0;
    lin.base.resize(static_cast<Eigen::Index>(n));
    lin.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    lin.offset = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    parallel_for(n, [&](std::size_t i) {
        const auto vg = value_and_gradient(model, theta0, data.x[i]);
        lin.base(static_cast<Eigen::Index>(i)) = vg.value;
        for (std::size_t j = 0; j < p; ++j) {
            lin.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                vg.grad.values[j];
        }
    });
    return lin;
}

/// Gradient descent on the linear model's loss, starting at offset = 0.
inline TrainingTrace train_linear(LinearizedModel model, const Dataset &data,
                                  double eta, std::size_t iterations,
                                  TraceMetadata meta = {}) {
    data.validate();
    if (!(eta > 0.0)) {
        throw InvalidArgument("train_linear: learning rate must be positive");
    }
    const auto n = static_cast<Eigen::Index>(data.size());
    if (model.base.size() != n) {
        throw InvalidArgument("train_linear: model was built for another dataset");
    }
    const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), n);
    model.offset.setZero();
    meta.model = "linear";
    meta.eta = eta;
    TrainingTrace trace;
    trace.meta = std::move(meta);
    const ParamVector &theta0 = model.theta0;
    for (std::size_t t = 0;; ++t) {
        const Eigen::VectorXd out = model.predict();
        std::vector<double> outputs(out.data(), out.data() + n);
        ParamVector theta(theta0);
        for (std::size_t j = 0; j < theta.size(); ++j) {
            theta[j] += model.offset(static_cast<Eigen::Index>(j));
        }
        trace.loss.push_back(loss(outputs, data));
        trace.param_rel_change.push_back(relative_change(theta, theta0));
        trace.params.push_back(std::move(theta));
        trace.outputs.push_back(std::move(outputs));
        if (t == iterations) {
            break;
        }
        const Eigen::VectorXd grad =
            model.features.transpose() * (out - y) / static_cast<double>(n);
        model.offset -= eta * grad;
    }
    return trace;
}

/**
 * Gradient-flow solution of the linear model from offset 0:
 * F(t) = Y + exp(-(t/n) K) (F(0) - Y), K = J J^T, via eigendecomposition.
 */
inline std::vector<double> closed_form_linear_outputs(const LinearizedModel &model,
                                                      const Dataset &data,
                                                      double t) {
    const auto n = static_cast<Eigen::Index>(data.size());
    if (model.base.size() != n) {
        throw InvalidArgument(
            "closed_form_linear_outputs: model was built for another dataset");
    }
    if (t == 0.0) {
        return {model.base.data(), model.base.data() + n};
    }
    const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.gram());
    const Eigen::VectorXd decay =
        (-(t / static_cast<double>(n)) * es.eigenvalues().array()).exp();
    const Eigen::MatrixXd &v = es.eigenvectors();
    const Eigen::VectorXd f =
        y + v * decay.asDiagonal() * (v.transpose() * (model.base - y));
    return {f.data(), f.data() + n};
}

struct StepMetrics {
    std::size_t step;
    double loss_quantum;
    double loss_linear;
    /// RMS output gap between the quantum and linear models.
    double delta;
    double param_rel_change;
    std::optional<double> kernel_drift_max;
    std::optional<double> kernel_drift_fro;

    [[nodiscard]] double loss_gap() const {
        return std::abs(loss_quantum - loss_linear);
    }
};

inline std::vector<StepMetrics> compare_traces(const TrainingTrace &quantum,
                                               const TrainingTrace &linear) {
    if (quantum.steps() != linear.steps()) {
        throw InvalidArgument("compare_traces: traces have different lengths");
    }
    const KernelSnapshot *k0 = quantum.kernel_at(0);
    std::vector<StepMetrics> out;
    out.reserve(quantum.steps());
    for (std::size_t t = 0; t < quantum.steps(); ++t) {
        const auto &fq = quantum.outputs[t];
        const auto &fl = linear.outputs[t];
        if (fq.size() != fl.size()) {
            throw InvalidArgument("compare_traces: traces use different datasets");
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < fq.size(); ++i) {
            sq += (fq[i] - fl[i]) * (fq[i] - fl[i]);
        }
        StepMetrics s{t,
                      quantum.loss[t],
                      linear.loss[t],
                      std::sqrt(sq / static_cast<double>(fq.size())),
                      quantum.param_rel_change[t],
                      std::nullopt,
                      std::nullopt};
        if (const KernelSnapshot *kt = quantum.kernel_at(t); kt && k0) {
            const Eigen::MatrixXd diff = kt->gram - k0->gram;
            s.kernel_drift_max = diff.cwiseAbs().maxCoeff();
            s.kernel_drift_fro = diff.norm();
        }
        out.push_back(s);
    }
    return out;
}

/// Summary maxima over a run.
struct CompareSummary {
    double max_delta{0.0};
    double max_loss_gap{0.0};
    double max_kernel_drift_max{0.0};
    double max_kernel_drift_fro{0.0};
    double final_param_rel_change{0.0};
    double final_loss_quantum{0.0};
    double final_loss_linear{0.0};
};

inline CompareSummary summarize(std::span<const StepMetrics> metrics) {
    CompareSummary s;
    for (const auto &m : metrics) {
        s.max_delta = std::max(s.max_delta, m.delta);
        s.max_loss_gap = std::max(s.max_loss_gap, m.loss_gap());
        if (m.kernel_drift_max) {
            s.max_kernel_drift_max = std::max(s.max_kernel_drift_max, *m.kernel_drift_max);
            s.max_kernel_drift_fro = std::max(s.max_kernel_drift_fro, *m.kernel_drift_fro);
        }
    }
    if (!metrics.empty()) {
        s.final_param_rel_change = metrics.back().param_rel_change;
        s.final_loss_quantum = metrics.back().loss_quantum;
        s.final_loss_linear = metrics.back().loss_linear;
    }
    return s;
}

/// max over t and j of |theta_j(t+1) - theta_j(t)| / eta.
inline double max_param_step(const TrainingTrace &trace) {
    double best = 0.0;
    for (std::size_t t = 1; t < trace.params.size(); ++t) {
        for (std::size_t j = 0; j < trace.params[t].size(); ++j) {
            best = std::max(best, std::abs(trace.params[t][j] - trace.params[t - 1][j]));
        }
    }
    return best / trace.meta.eta;
}

/// Shortest decimal text that round-trips the double.
inline std::string format_number(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

inline constexpr const char *kTraceCsvHeader =
    "step,loss_quantum,loss_linear,delta,param_rel_change,kernel_drift_max,"
    "kernel_drift_fro";

inline void write_trace_csv(std::ostream &os, std::span<const StepMetrics> metrics) {
    os << kTraceCsvHeader << '\n';
    for (const auto &m : metrics) {
        os << m.step << ',' << format_number(m.loss_quantum) << ','
           << format_number(m.loss_linear) << ',' << format_number(m.delta) << ','
           << format_number(m.param_rel_change) << ',';
        if (m.kernel_drift_max) {
            os << format_number(*m.kernel_drift_max);
        }
        os << ',';
        if (m.kernel_drift_fro) {
            os << format_number(*m.kernel_drift_fro);
        }
        os << '\n';
    }
}

} // namespace qlazy
