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
 * Reference dense statevector simulator. Exact, exponential in the number of
 * wires, and used both as ground truth and as the inner kernel of the
 * light-cone engine (which runs it on small sub-circuits).
 *
 * Amplitude ordering: wire 0 is the most significant bit of the basis index.
 */
#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "circuit.hpp"

namespace qlazy {

/// Default limit on the number of wires simulated densely.
inline constexpr int kDefaultDenseCap = 20;

class StateVector {
  public:
    using complex_t = std::complex<double>;

    /// |0...0> on the given global qubit labels (wire i <-> qubit_order[i]).
    static StateVector zero(std::vector<int> qubit_order) {
        std::vector<complex_t> amps(std::size_t{1} << qubit_order.size());
        amps[0] = 1.0;
        return StateVector(std::move(amps), std::move(qubit_order));
    }

    StateVector(std::vector<complex_t> amplitudes, std::vector<int> qubit_order)
        : amps_(std::move(amplitudes)), order_(std::move(qubit_order)) {
        if (order_.size() >= 63 ||
            amps_.size() != (std::size_t{1} << order_.size())) {
            throw InvalidArgument(
                "StateVector: amplitude count must be 2^(number of wires)");
        }
        for (std::size_t i = 0; i < order_.size(); ++i) {
            for (std::size_t j = i + 1; j < order_.size(); ++j) {
                if (order_[i] == order_[j]) {
                    throw InvalidArgument("StateVector: duplicate qubit label");
                }
            }
        }
        if (std::abs(norm() - 1.0) > 1e-12) {
            throw InvalidArgument("StateVector: amplitudes are not normalized");
        }
    }

    [[nodiscard]] int num_wires() const noexcept {
        return static_cast<int>(order_.size());
    }
    [[nodiscard]] std::span<const complex_t> amplitudes() const noexcept {
        return amps_;
    }
    [[nodiscard]] const std::vector<int> &qubit_order() const noexcept {
        return order_;
    }

    [[nodiscard]] double norm() const {
        double s = 0.0;
        for (const auto &a : amps_) {
            s += std::norm(a);
        }
        return std::sqrt(s);
    }

    /// Local wire holding global qubit `q`.
    [[nodiscard]] int wire_of(int q) const {
        for (std::size_t i = 0; i < order_.size(); ++i) {
            if (order_[i] == q) {
                return static_cast<int>(i);
            }
        }
        throw InvalidArgument("StateVector: qubit " + std::to_string(q) +
                              " is not part of this state");
    }

    /// In-place rotation exp(-i angle P / 2) on a local wire.
    void rotate(GateKind kind, int wire, double angle) {
        const std::size_t stride = bit_of(wire);
        const double c = std::cos(0.5 * angle);
        const double s = std::sin(0.5 * angle);
        const std::size_t n = amps_.size();
        // Explicit real arithmetic: complex*complex goes through the
        // NaN-checking libgcc helper otherwise.
        auto *d = reinterpret_cast<double *>(amps_.data());
        switch (kind) {
        case GateKind::RX:
            // [[c, -is], [-is, c]]
            for_each_pair(stride, n, [&](std::size_t i0, std::size_t i1) {
                const double r0 = d[2 * i0], m0 = d[2 * i0 + 1];
                const double r1 = d[2 * i1], m1 = d[2 * i1 + 1];
                d[2 * i0] = c * r0 + s * m1;
                d[2 * i0 + 1] = c * m0 - s * r1;
                d[2 * i1] = s * m0 + c * r1;
                d[2 * i1 + 1] = -s * r0 + c * m1;
            });
            break;
        case GateKind::RY:
            // [[c, -s], [s, c]]
            for_each_pair(stride, n, [&](std::size_t i0, std::size_t i1) {
                const double r0 = d[2 * i0], m0 = d[2 * i0 + 1];
                const double r1 = d[2 * i1], m1 = d[2 * i1 + 1];
                d[2 * i0] = c * r0 - s * r1;
                d[2 * i0 + 1] = c * m0 - s * m1;
                d[2 * i1] = s * r0 + c * r1;
                d[2 * i1 + 1] = s * m0 + c * m1;
            });
            break;
        case GateKind::RZ:
            // diag(c - is, c + is)
            for_each_pair(stride, n, [&](std::size_t i0, std::size_t i1) {
                const double r0 = d[2 * i0], m0 = d[2 * i0 + 1];
                const double r1 = d[2 * i1], m1 = d[2 * i1 + 1];
                d[2 * i0] = c * r0 + s * m0;
                d[2 * i0 + 1] = c * m0 - s * r0;
                d[2 * i1] = c * r1 - s * m1;
                d[2 * i1 + 1] = c * m1 + s * r1;
            });
            break;
        case GateKind::CZ:
            throw InvalidArgument("StateVector::rotate: CZ is not a rotation");
        }
    }

    /// In-place CZ = diag(1, 1, 1, -1) on two local wires.
    void cz(int wire_a, int wire_b) {
        if (wire_a == wire_b) {
            throw InvalidArgument("StateVector::cz: wires must differ");
        }
        const std::size_t mask = bit_of(wire_a) | bit_of(wire_b);
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if ((i & mask) == mask) {
                amps_[i] = -amps_[i];
            }
        }
    }

    /**
     * <psi| P |psi> for a Pauli string on local wires, returned as a complex
     * number so callers can check the imaginary residue.
     */
    [[nodiscard]] complex_t pauli_expectation(std::span<const int> wires,
                                              std::string_view paulis) const {
        std::size_t flip = 0;
        std::size_t zmask = 0;
        int y_count = 0;
        for (std::size_t t = 0; t < wires.size(); ++t) {
            const std::size_t b = bit_of(wires[t]);
            switch (paulis[t]) {
            case 'X':
                flip |= b;
                break;
            case 'Y':
                flip |= b;
                zmask |= b;
                ++y_count;
                break;
            case 'Z':
                zmask |= b;
                break;
            default:
                throw InvalidArgument("pauli_expectation: bad Pauli letter");
            }
        }
        // Y = i X Z, so Y|b> = i (-1)^b |b^1>.
        static constexpr complex_t kIPow[4] = {
            {1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        const complex_t global = kIPow[y_count % 4];
        double acc_re = 0.0;
        double acc_im = 0.0;
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            const complex_t a = amps_[i ^ flip];
            const complex_t b = amps_[i];
            // conj(a) * b
            const double re = a.real() * b.real() + a.imag() * b.imag();
            const double im = a.real() * b.imag() - a.imag() * b.real();
            if ((std::popcount(i & zmask) & 1) != 0) {
                acc_re -= re;
                acc_im -= im;
            } else {
                acc_re += re;
                acc_im += im;
            }
        }
        const complex_t acc{acc_re, acc_im};
        return acc * global;
    }

  private:
    [[nodiscard]] std::size_t bit_of(int wire) const {
        if (wire < 0 || wire >= num_wires()) {
            throw InvalidArgument("StateVector: wire out of range");
        }
        return std::size_t{1} << (order_.size() - 1 - static_cast<std::size_t>(wire));
    }

    /// Calls f(i0, i1) for every index pair differing only in `stride`.
    template <class F>
    static void for_each_pair(std::size_t stride, std::size_t n, F &&f) {
        for (std::size_t base = 0; base < n; base += 2 * stride) {
            for (std::size_t i = base; i < base + stride; ++i) {
                f(i, i + stride);
            }
        }
    }

    std::vector<complex_t> amps_;
    std::vector<int> order_;
};

/// Angle of a rotation gate given parameters and encoded features.
inline double resolve_angle(const Gate &g, std::span<const double> theta,
                            const EncodedFeatures &xhat) {
    return std::visit(
        [&](const auto &a) -> double {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, EncodingAngle>) {
                if (static_cast<std::size_t>(a.feature) >= xhat.size()) {
                    throw InvalidArgument("resolve_angle: feature out of range");
                }
                return xhat[static_cast<std::size_t>(a.feature)];
            } else if constexpr (std::is_same_v<T, ParamAngle>) {
                if (static_cast<std::size_t>(a.index) >= theta.size()) {
                    throw InvalidArgument("resolve_angle: parameter out of range");
                }
                return theta[static_cast<std::size_t>(a.index)];
            } else if constexpr (std::is_same_v<T, FixedAngle>) {
                return a.radians;
            } else {
                return 0.0;
            }
        },
        g.angle);
}

/// Apply one gate (targets given as global qubit labels) with an explicit
/// angle; the angle is ignored for CZ.
inline StateVector apply_gate(StateVector state, const Gate &gate, double angle) {
    if (gate.kind == GateKind::CZ) {
        state.cz(state.wire_of(gate.q0), state.wire_of(gate.q1));
    } else {
        state.rotate(gate.kind, state.wire_of(gate.q0), angle);
    }
    return state;
}

/// U(theta, x)|0...0> on all m qubits.
inline StateVector run_circuit(const Circuit &circuit,
                               std::span<const double> theta,
                               std::span<const double> x,
                               int dense_cap = kDefaultDenseCap) {
    const int m = circuit.num_qubits();
    if (m > dense_cap) {
        throw InvalidArgument("run_circuit: " + std::to_string(m) +
                              " qubits exceeds the dense cap of " +
                              std::to_string(dense_cap));
    }
    if (theta.size() != static_cast<std::size_t>(circuit.num_params())) {
        throw InvalidArgument("run_circuit: expected " +
                              std::to_string(circuit.num_params()) +
                              " parameters, got " + std::to_string(theta.size()));
    }
    if (x.size() != static_cast<std::size_t>(circuit.feature_dim())) {
        throw InvalidArgument("run_circuit: expected " +
                              std::to_string(circuit.feature_dim()) +
                              " features, got " + std::to_string(x.size()));
    }
    const EncodedFeatures xhat = encode(x, m);
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int q = 0; q < m; ++q) {
        order[static_cast<std::size_t>(q)] = q;
    }
    StateVector state = StateVector::zero(std::move(order));
    for (const Layer &layer : circuit.layers()) {
        for (const Gate &g : layer) {
            if (g.kind == GateKind::CZ) {
                state.cz(g.q0, g.q1);
            } else {
                state.rotate(g.kind, g.q0, resolve_angle(g, theta, xhat));
            }
        }
    }
    return state;
}

/// normalization * sum_k w_k <P_k>.
inline double expectation(const StateVector &state, const Observable &obs) {
    double total = 0.0;
    std::vector<int> wires;
    for (const PauliTerm &t : obs.terms()) {
        wires.clear();
        for (int q : t.support) {
            wires.push_back(state.wire_of(q));
        }
        const auto v = state.pauli_expectation(wires, t.paulis);
        if (std::abs(v.imag()) >= 1e-10) {
            throw Error("expectation: non-negligible imaginary part " +
                        std::to_string(v.imag()));
        }
        total += t.weight * v.real();
    }
    return obs.normalization() * total;
}

inline double eval_model_dense(const Circuit &circuit,
                               std::span<const double> theta,
                               std::span<const double> x, const Observable &obs,
                               int dense_cap = kDefaultDenseCap) {
    return expectation(run_circuit(circuit, theta, x, dense_cap), obs);
}

} // namespace qlazy
