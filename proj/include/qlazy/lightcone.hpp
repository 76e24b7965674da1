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
 * Causal-cone slicing for local observables.
 *
 * For an observable term P_k, only gates inside its backward light cone can
 * change <P_k>. Each term is evaluated on the cone sub-circuit alone, which
 * for a depth-L circuit on a bounded-degree graph has O(1) width independent
 * of the total number of qubits.
 */
#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "circuit.hpp"
#include "statevector.hpp"

namespace qlazy {

/// A gate of a cone sub-circuit, relabelled to local wires.
struct ConeGate {
    GateKind kind;
    int w0;
    int w1;
    AngleSource angle;
};

struct LightCone {
    std::size_t term_index{0};
    /// Ascending global qubit labels; local wire i is cone_qubits[i].
    std::vector<int> cone_qubits;
    /// Included gates in forward (circuit) order, global labels.
    std::vector<Gate> cone_gates;
    /// `cone_gates` relabelled to local wires.
    std::vector<ConeGate> local_gates;
    /// N_k: ascending parameter indices driving the cone.
    std::vector<int> param_indices;
    std::vector<int> feature_indices;
    /// Local wires of the term support, aligned with `paulis`.
    std::vector<int> term_wires;
    std::string paulis;

    [[nodiscard]] int width() const noexcept {
        return static_cast<int>(cone_qubits.size());
    }
};

/**
 * Backward pass from the term's support. A layer contributes every gate that
 * touches the current support set, which then grows by those gates' targets.
 *
 * With `prune_diagonal` set and a Z-only term, the operator stays diagonal
 * until the first non-diagonal gate is met; diagonal gates (CZ, RZ) seen
 * before that point commute with it and are dropped.
 */
inline LightCone compute_lightcone(const Circuit &circuit, const Observable &obs,
                                   std::size_t k, bool prune_diagonal = true) {
    if (k >= obs.num_terms()) {
        throw InvalidArgument("compute_lightcone: term index " +
                              std::to_string(k) + " out of range");
    }
    const PauliTerm &term = obs.terms()[k];
    const int m = circuit.num_qubits();
    std::vector<char> in_cone(static_cast<std::size_t>(m), 0);
    for (int q : term.support) {
        if (q >= m) {
            throw InvalidArgument("compute_lightcone: term support outside circuit");
        }
        in_cone[static_cast<std::size_t>(q)] = 1;
    }
    bool diagonal = prune_diagonal && term.z_only();

    const auto &layers = circuit.layers();
    std::vector<std::vector<const Gate *>> picked(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        bool saw_non_diagonal = false;
        for (const Gate &g : layers[l]) {
            const bool touches =
                in_cone[static_cast<std::size_t>(g.q0)] != 0 ||
                (g.kind == GateKind::CZ &&
                 in_cone[static_cast<std::size_t>(g.q1)] != 0);
            if (!touches || (diagonal && is_diagonal(g.kind))) {
                continue;
            }
            picked[l].push_back(&g);
            saw_non_diagonal = saw_non_diagonal || !is_diagonal(g.kind);
        }
        for (const Gate *g : picked[l]) {
            in_cone[static_cast<std::size_t>(g->q0)] = 1;
            if (g->kind == GateKind::CZ) {
                in_cone[static_cast<std::size_t>(g->q1)] = 1;
            }
        }
        if (saw_non_diagonal) {
            diagonal = false;
        }
    }

    LightCone cone;
    cone.term_index = k;
    std::vector<int> wire_of(static_cast<std::size_t>(m), -1);
    for (int q = 0; q < m; ++q) {
        if (in_cone[static_cast<std::size_t>(q)] != 0) {
            wire_of[static_cast<std::size_t>(q)] =
                static_cast<int>(cone.cone_qubits.size());
            cone.cone_qubits.push_back(q);
        }
    }
    std::set<int> params;
    std::set<int> features;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (const Gate *g : picked[l]) {
            cone.cone_gates.push_back(*g);
            cone.local_gates.push_back(ConeGate{
                g->kind, wire_of[static_cast<std::size_t>(g->q0)],
                g->kind == GateKind::CZ ? wire_of[static_cast<std::size_t>(g->q1)]
                                        : -1,
                g->angle});
            if (const auto *p = std::get_if<ParamAngle>(&g->angle)) {
                params.insert(p->index);
            } else if (const auto *e = std::get_if<EncodingAngle>(&g->angle)) {
                features.insert(e->feature);
            }
        }
    }
    cone.param_indices.assign(params.begin(), params.end());
    cone.feature_indices.assign(features.begin(), features.end());
    for (int q : term.support) {
        cone.term_wires.push_back(wire_of[static_cast<std::size_t>(q)]);
    }
    cone.paulis = term.paulis;
    return cone;
}

/// A single angle offset applied to one gate of a cone (parameter shifts).
struct GateShift {
    std::size_t gate{0};
    double delta{0.0};
};

inline void check_cone_width(const LightCone &cone, int dense_cap) {
    if (cone.width() > dense_cap) {
        throw Error("light cone of term " + std::to_string(cone.term_index) +
                    " spans " + std::to_string(cone.width()) +
                    " qubits, above the dense cap of " + std::to_string(dense_cap));
    }
}

/// Applies local gate `g` of a cone with its resolved angle plus `delta`.
inline void apply_cone_gate(StateVector &state, const ConeGate &g,
                            std::span<const double> theta,
                            const EncodedFeatures &xhat, double delta = 0.0) {
    if (g.kind == GateKind::CZ) {
        state.cz(g.w0, g.w1);
        return;
    }
    const double angle =
        resolve_angle(Gate{g.kind, g.w0, -1, g.angle}, theta, xhat) + delta;
    state.rotate(g.kind, g.w0, angle);
}

/// <P_k> on the final cone state.
inline double cone_term_value(const LightCone &cone, const StateVector &state) {
    const auto v = state.pauli_expectation(cone.term_wires, cone.paulis);
    if (std::abs(v.imag()) >= 1e-10) {
        throw Error("light cone term " + std::to_string(cone.term_index) +
                    ": non-negligible imaginary part");
    }
    return v.real();
}

/// <P_k> from the cone sub-circuit, optionally with one gate angle shifted.
inline double evaluate_cone(const LightCone &cone, std::span<const double> theta,
                            const EncodedFeatures &xhat,
                            const GateShift *shift = nullptr,
                            int dense_cap = kDefaultDenseCap) {
    check_cone_width(cone, dense_cap);
    StateVector state = StateVector::zero(cone.cone_qubits);
    for (std::size_t i = 0; i < cone.local_gates.size(); ++i) {
        const double delta =
            (shift != nullptr && shift->gate == i) ? shift->delta : 0.0;
        apply_cone_gate(state, cone.local_gates[i], theta, xhat, delta);
    }
    return cone_term_value(cone, state);
}

/// Triples (k, k', j) with j in N_k and N_k'.
struct ConeOverlapIndex {
    struct Triple {
        std::size_t k;
        std::size_t k2;
        int param;
        friend auto operator<=>(const Triple &, const Triple &) = default;
    };
    std::vector<Triple> triples;

    [[nodiscard]] std::size_t size() const noexcept { return triples.size(); }
    [[nodiscard]] bool contains(std::size_t k, std::size_t k2, int j) const {
        return std::binary_search(triples.begin(), triples.end(),
                                  Triple{k, k2, j});
    }
};

/// Exact overlap set, built through the inverse map parameter -> terms.
inline ConeOverlapIndex build_overlap_index(std::span<const LightCone> cones) {
    std::map<int, std::vector<std::size_t>> terms_of;
    for (const LightCone &c : cones) {
        for (int j : c.param_indices) {
            terms_of[j].push_back(c.term_index);
        }
    }
    ConeOverlapIndex index;
    for (const auto &[j, terms] : terms_of) {
        for (std::size_t a : terms) {
            for (std::size_t b : terms) {
                index.triples.push_back({a, b, j});
            }
        }
    }
    std::sort(index.triples.begin(), index.triples.end());
    return index;
}

/// Checks theta and x against the circuit shape, then encodes x.
inline EncodedFeatures prepare_inputs(const Circuit &circuit,
                                      std::span<const double> theta,
                                      std::span<const double> x) {
    if (theta.size() != static_cast<std::size_t>(circuit.num_params())) {
        throw InvalidArgument("expected " + std::to_string(circuit.num_params()) +
                              " parameters, got " + std::to_string(theta.size()));
    }
    if (x.size() != static_cast<std::size_t>(circuit.feature_dim())) {
        throw InvalidArgument("expected " + std::to_string(circuit.feature_dim()) +
                              " features, got " + std::to_string(x.size()));
    }
    return encode(x, circuit.num_qubits());
}

/**
 * Circuit + observable with every term's light cone precomputed. This is the
 * object to keep around when the same model is evaluated at many (theta, x).
 */
class LightConeModel {
  public:
    LightConeModel(Circuit circuit, Observable obs, bool prune_diagonal = true,
                   int dense_cap = kDefaultDenseCap)
        : circuit_(std::move(circuit)), obs_(std::move(obs)),
          dense_cap_(dense_cap) {
        if (obs_.span_qubits() > circuit_.num_qubits()) {
            throw InvalidArgument(
                "LightConeModel: observable acts outside the circuit");
        }
        cones_.reserve(obs_.num_terms());
        for (std::size_t k = 0; k < obs_.num_terms(); ++k) {
            cones_.push_back(compute_lightcone(circuit_, obs_, k, prune_diagonal));
        }
        overlap_ = build_overlap_index(cones_);
    }

    [[nodiscard]] const Circuit &circuit() const noexcept { return circuit_; }
    [[nodiscard]] const Observable &observable() const noexcept { return obs_; }
    [[nodiscard]] const std::vector<LightCone> &cones() const noexcept {
        return cones_;
    }
    [[nodiscard]] int dense_cap() const noexcept { return dense_cap_; }
    [[nodiscard]] int num_params() const noexcept { return circuit_.num_params(); }
    [[nodiscard]] int max_cone_width() const {
        int w = 0;
        for (const auto &c : cones_) {
            w = std::max(w, c.width());
        }
        return w;
    }

    [[nodiscard]] EncodedFeatures prepare(std::span<const double> theta,
                                          std::span<const double> x) const {
        return prepare_inputs(circuit_, theta, x);
    }

    /// f_k = <P_k>, unweighted.
    [[nodiscard]] double eval_term(std::span<const double> theta,
                                   std::span<const double> x, std::size_t k) const {
        if (k >= cones_.size()) {
            throw InvalidArgument("eval_term: term index out of range");
        }
        const EncodedFeatures xhat = prepare(theta, x);
        return evaluate_cone(cones_[k], theta, xhat, nullptr, dense_cap_);
    }

    /// normalization * sum_k w_k f_k, reduced in ascending k.
    [[nodiscard]] double eval(std::span<const double> theta,
                              std::span<const double> x) const {
        const EncodedFeatures xhat = prepare(theta, x);
        return eval_encoded(theta, xhat);
    }

    [[nodiscard]] double eval_encoded(std::span<const double> theta,
                                      const EncodedFeatures &xhat) const {
        double total = 0.0;
        for (std::size_t k = 0; k < cones_.size(); ++k) {
            total += obs_.terms()[k].weight *
                     evaluate_cone(cones_[k], theta, xhat, nullptr, dense_cap_);
        }
        return obs_.normalization() * total;
    }

    [[nodiscard]] const ConeOverlapIndex &overlap_index() const noexcept {
        return overlap_;
    }

  private:
    Circuit circuit_;
    Observable obs_;
    int dense_cap_;
    std::vector<LightCone> cones_;
    ConeOverlapIndex overlap_;
};

inline double eval_term(const Circuit &circuit, std::span<const double> theta,
                        std::span<const double> x, const Observable &obs,
                        std::size_t k, int dense_cap = kDefaultDenseCap) {
    const LightCone cone = compute_lightcone(circuit, obs, k);
    return evaluate_cone(cone, theta, prepare_inputs(circuit, theta, x), nullptr,
                         dense_cap);
}

inline double eval_model(const Circuit &circuit, std::span<const double> theta,
                         std::span<const double> x, const Observable &obs,
                         int dense_cap = kDefaultDenseCap) {
    return LightConeModel(circuit, obs, true, dense_cap).eval(theta, x);
}

} // namespace qlazy
