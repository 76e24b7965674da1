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
 * Parameter-shift gradients, the tangent kernel
 * K(x, x') = grad f(theta, x) . grad f(theta, x'), and Gram matrices.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "circuit.hpp"
#include "lightcone.hpp"
#include "parallel.hpp"

namespace qlazy {

/// Per-term partial derivatives: d f_k / d theta_j for j in N_k.
struct TermGradient {
    std::vector<int> params;
    std::vector<double> values;
};

struct GradientVector {
    std::vector<double> values;
    /// Union of all N_k; entries outside it are exactly zero.
    std::vector<int> support;
};

/**
 * d <P_k> / d theta_j for every j in N_k by the two-term shift rule
 * [f(angle + pi/2) - f(angle - pi/2)] / 2. A parameter driving several gates
 * receives one shift pair per occurrence.
 *
 * The unshifted prefix state is advanced once and copied at each
 * parameterized gate, so only the suffix is re-simulated per shift.
 */
inline TermGradient term_gradient(const LightConeModel &model, std::size_t k,
                                  std::span<const double> theta,
                                  const EncodedFeatures &xhat) {
    constexpr double kShift = std::numbers::pi / 2.0;
    const LightCone &cone = model.cones()[k];
    check_cone_width(cone, model.dense_cap());
    TermGradient out;
    out.params = cone.param_indices;
    out.values.assign(out.params.size(), 0.0);
    const auto &gates = cone.local_gates;
    auto shifted = [&](const StateVector &prefix, std::size_t i, double delta) {
        StateVector s = prefix;
        apply_cone_gate(s, gates[i], theta, xhat, delta);
        for (std::size_t r = i + 1; r < gates.size(); ++r) {
            apply_cone_gate(s, gates[r], theta, xhat);
        }
        return cone_term_value(cone, s);
    };
    StateVector prefix = StateVector::zero(cone.cone_qubits);
    for (std::size_t i = 0; i < gates.size(); ++i) {
        const ConeGate &g = gates[i];
        if (const auto *p = std::get_if<ParamAngle>(&g.angle)) {
            if (!is_rotation(g.kind)) {
                throw InvalidArgument(
                    "gradient: parameterized gate is not a Pauli rotation");
            }
            const double d =
                0.5 * (shifted(prefix, i, kShift) - shifted(prefix, i, -kShift));
            const auto slot = std::lower_bound(out.params.begin(),
                                               out.params.end(), p->index) -
                              out.params.begin();
            out.values[static_cast<std::size_t>(slot)] += d;
        }
        apply_cone_gate(prefix, g, theta, xhat);
    }
    return out;
}

inline std::vector<TermGradient>
term_gradients(const LightConeModel &model, std::span<const double> theta,
               std::span<const double> x) {
    const EncodedFeatures xhat = model.prepare(theta, x);
    std::vector<TermGradient> out;
    out.reserve(model.cones().size());
    for (std::size_t k = 0; k < model.cones().size(); ++k) {
        out.push_back(term_gradient(model, k, theta, xhat));
    }
    return out;
}

/// Assembles grad f = normalization * sum_k w_k grad f_k.
inline GradientVector assemble_gradient(const LightConeModel &model,
                                        std::span<const TermGradient> terms) {
    GradientVector g;
    g.values.assign(static_cast<std::size_t>(model.num_params()), 0.0);
    std::vector<char> seen(g.values.size(), 0);
    const double norm = model.observable().normalization();
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const double c = norm * model.observable().terms()[k].weight;
        for (std::size_t i = 0; i < terms[k].params.size(); ++i) {
            const auto j = static_cast<std::size_t>(terms[k].params[i]);
            g.values[j] += c * terms[k].values[i];
            seen[j] = 1;
        }
    }
    for (std::size_t j = 0; j < seen.size(); ++j) {
        if (seen[j] != 0) {
            g.support.push_back(static_cast<int>(j));
        }
    }
    return g;
}

inline GradientVector gradient(const LightConeModel &model,
                               std::span<const double> theta,
                               std::span<const double> x) {
    const auto terms = term_gradients(model, theta, x);
    return assemble_gradient(model, terms);
}

inline GradientVector gradient(const Circuit &circuit,
                               std::span<const double> theta,
                               std::span<const double> x, const Observable &obs) {
    return gradient(LightConeModel(circuit, obs), theta, x);
}

/// Value and gradient of f at one point from a single pass over the cones.
struct ValueAndGradient {
    double value{0.0};
    GradientVector grad;
};

inline ValueAndGradient value_and_gradient(const LightConeModel &model,
                                           std::span<const double> theta,
                                           std::span<const double> x) {
    const EncodedFeatures xhat = model.prepare(theta, x);
    ValueAndGradient out;
    out.value = model.eval_encoded(theta, xhat);
    std::vector<TermGradient> terms;
    terms.reserve(model.cones().size());
    for (std::size_t k = 0; k < model.cones().size(); ++k) {
        terms.push_back(term_gradient(model, k, theta, xhat));
    }
    out.grad = assemble_gradient(model, terms);
    return out;
}

/// Plain dot product of the two gradient vectors.
inline double tangent_kernel_dot(const LightConeModel &model,
                                 std::span<const double> theta,
                                 std::span<const double> x,
                                 std::span<const double> x2) {
    const auto g1 = gradient(model, theta, x);
    const auto g2 = gradient(model, theta, x2);
    double s = 0.0;
    for (std::size_t j = 0; j < g1.values.size(); ++j) {
        s += g1.values[j] * g2.values[j];
    }
    return s;
}

/**
 * Sparse form: sum over (k, k', j) in the overlap index of
 * c_k c_k' d_j f_k(x) d_j f_k'(x'), with c_k = normalization * w_k.
 */
inline double tangent_kernel_sparse(const LightConeModel &model,
                                    const ConeOverlapIndex &overlap,
                                    std::span<const TermGradient> gx,
                                    std::span<const TermGradient> gx2) {
    auto lookup = [](const TermGradient &t, int j) {
        const auto it = std::lower_bound(t.params.begin(), t.params.end(), j);
        return t.values[static_cast<std::size_t>(it - t.params.begin())];
    };
    const double norm = model.observable().normalization();
    const auto &terms = model.observable().terms();
    double s = 0.0;
    for (const auto &tr : overlap.triples) {
        s += terms[tr.k].weight * terms[tr.k2].weight * lookup(gx[tr.k], tr.param) *
             lookup(gx2[tr.k2], tr.param);
    }
    return norm * norm * s;
}

inline double tangent_kernel(const LightConeModel &model,
                             std::span<const double> theta,
                             std::span<const double> x,
                             std::span<const double> x2) {
    const auto gx = term_gradients(model, theta, x);
    const auto gx2 = term_gradients(model, theta, x2);
    return tangent_kernel_sparse(model, model.overlap_index(), gx, gx2);
}

inline double tangent_kernel(const Circuit &circuit,
                             std::span<const double> theta,
                             std::span<const double> x,
                             std::span<const double> x2, const Observable &obs) {
    return tangent_kernel(LightConeModel(circuit, obs), theta, x, x2);
}

/// FNV-1a over the raw bytes of every feature value.
inline std::uint64_t dataset_fingerprint(std::span<const FeatureVector> xs) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto &x : xs) {
        for (double v : x) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ULL;
            }
        }
        h ^= 0xffU;
        h *= 1099511628211ULL;
    }
    return h;
}

struct GramMatrix {
    Eigen::MatrixXd entries;
    std::uint64_t fingerprint{0};

    [[nodiscard]] Eigen::Index size() const noexcept { return entries.rows(); }

    [[nodiscard]] double max_asymmetry() const {
        return (entries - entries.transpose()).cwiseAbs().maxCoeff();
    }

    /// Ascending eigenvalues.
    [[nodiscard]] Eigen::VectorXd eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(entries,
                                                          Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    [[nodiscard]] double min_eigenvalue() const { return eigenvalues()(0); }

    /// Number of eigenvalues strictly above `threshold`.
    [[nodiscard]] int numerical_rank(double threshold) const {
        const Eigen::VectorXd ev = eigenvalues();
        int r = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            r += ev(i) > threshold ? 1 : 0;
        }
        return r;
    }
};

/// Gram matrix J J^T from per-point gradient rows (n x p).
inline GramMatrix gram_from_jacobian(const Eigen::MatrixXd &jacobian,
                                     std::uint64_t fingerprint = 0) {
    const Eigen::Index n = jacobian.rows();
    GramMatrix g;
    g.fingerprint = fingerprint;
    g.entries.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = jacobian.row(i).dot(jacobian.row(j));
            g.entries(i, j) = v;
            g.entries(j, i) = v;
        }
    }
    return g;
}

/// n x p matrix of gradient rows, one row per data point.
inline Eigen::MatrixXd jacobian(const LightConeModel &model,
                                std::span<const double> theta,
                                std::span<const FeatureVector> xs) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(xs.size()), model.num_params());
    parallel_for(xs.size(), [&](std::size_t i) {
        const auto g = gradient(model, theta, xs[i]);
        for (std::size_t j = 0; j < g.values.size(); ++j) {
            rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                g.values[j];
        }
    });
    return rows;
}

inline GramMatrix gram_matrix(const LightConeModel &model,
                              std::span<const double> theta,
                              std::span<const FeatureVector> xs) {
    if (xs.empty()) {
        throw InvalidArgument("gram_matrix: empty dataset");
    }
    return gram_from_jacobian(jacobian(model, theta, xs), dataset_fingerprint(xs));
}

} // namespace qlazy
