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
 * Data model for geometrically local parameterized circuits: qubit graphs,
 * gates, layered circuits, Pauli observables and the feature encoding.
 *
 * All indices are 0-based. Qubit k of an m-qubit circuit is labelled k,
 * parameter j is theta[j], and encoded feature j is xhat[j].
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace qlazy {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised on malformed input: bad shapes, invalid indices, bad config.
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

using ParamVector = std::vector<double>;
using FeatureVector = std::vector<double>;

/**
 * Features after the x -> xhat map. Only `encode` produces values of this
 * type.
 */
class EncodedFeatures {
  public:
    EncodedFeatures() = default;

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t j) const { return values_[j]; }
    [[nodiscard]] std::span<const double> values() const noexcept {
        return values_;
    }

    friend EncodedFeatures encode(std::span<const double> x, int m);

  private:
    explicit EncodedFeatures(std::vector<double> v) : values_(std::move(v)) {}
    std::vector<double> values_;
};

/**
 * Cyclic repetition of the raw features onto m wires:
 * xhat[j] = x[j mod d] for j = 0..m-1.
 */
inline EncodedFeatures encode(std::span<const double> x, int m) {
    if (x.empty()) {
        throw InvalidArgument("encode: feature vector must be non-empty");
    }
    if (m < 1) {
        throw InvalidArgument("encode: m must be positive");
    }
    std::vector<double> out(static_cast<std::size_t>(m));
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = x[j % x.size()];
    }
    return EncodedFeatures(std::move(out));
}

/// Undirected qubit connectivity graph with a declared maximum degree.
class QubitGraph {
  public:
    QubitGraph(int num_qubits, std::vector<std::pair<int, int>> edges,
               int max_degree)
        : num_qubits_(num_qubits), max_degree_(max_degree) {
        if (num_qubits < 1) {
            throw InvalidArgument("QubitGraph: qubit count must be positive");
        }
        std::vector<int> degree(static_cast<std::size_t>(num_qubits), 0);
        std::set<std::pair<int, int>> seen;
        for (auto [a, b] : edges) {
            if (a < 0 || b < 0 || a >= num_qubits || b >= num_qubits) {
                throw InvalidArgument("QubitGraph: edge endpoint out of range");
            }
            if (a == b) {
                throw InvalidArgument("QubitGraph: self-loop edge");
            }
            const auto key = std::minmax(a, b);
            if (!seen.insert(key).second) {
                throw InvalidArgument("QubitGraph: duplicate edge");
            }
            ++degree[static_cast<std::size_t>(a)];
            ++degree[static_cast<std::size_t>(b)];
            edges_.emplace_back(a, b);
        }
        if (*std::max_element(degree.begin(), degree.end()) > max_degree) {
            throw InvalidArgument("QubitGraph: degree bound exceeded");
        }
    }

    /// The m-cycle with edges (k, k+1 mod m). Requires m >= 3.
    static QubitGraph cycle(int m) {
        if (m < 3) {
            throw InvalidArgument("QubitGraph::cycle: requires m >= 3");
        }
        std::vector<std::pair<int, int>> edges;
        edges.reserve(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) {
            edges.emplace_back(k, (k + 1) % m);
        }
        return QubitGraph(m, std::move(edges), 2);
    }

    [[nodiscard]] int num_qubits() const noexcept { return num_qubits_; }
    [[nodiscard]] int max_degree() const noexcept { return max_degree_; }
    [[nodiscard]] const std::vector<std::pair<int, int>> &edges() const noexcept {
        return edges_;
    }

    [[nodiscard]] bool has_edge(int a, int b) const {
        return std::any_of(edges_.begin(), edges_.end(), [&](const auto &e) {
            return (e.first == a && e.second == b) ||
                   (e.first == b && e.second == a);
        });
    }

    [[nodiscard]] bool is_cycle() const {
        if (num_qubits_ < 3 ||
            edges_.size() != static_cast<std::size_t>(num_qubits_)) {
            return false;
        }
        for (int k = 0; k < num_qubits_; ++k) {
            if (edges_[static_cast<std::size_t>(k)] !=
                std::pair<int, int>{k, (k + 1) % num_qubits_}) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const QubitGraph &, const QubitGraph &) = default;

  private:
    int num_qubits_;
    std::vector<std::pair<int, int>> edges_;
    int max_degree_;
};

enum class GateKind { RX, RY, RZ, CZ };

struct NoAngle {
    friend bool operator==(NoAngle, NoAngle) = default;
};
struct EncodingAngle {
    int feature;
    friend bool operator==(EncodingAngle, EncodingAngle) = default;
};
struct ParamAngle {
    int index;
    friend bool operator==(ParamAngle, ParamAngle) = default;
};
struct FixedAngle {
    double radians;
    friend bool operator==(FixedAngle, FixedAngle) = default;
};

using AngleSource = std::variant<NoAngle, EncodingAngle, ParamAngle, FixedAngle>;

[[nodiscard]] constexpr bool is_rotation(GateKind k) noexcept {
    return k != GateKind::CZ;
}

/// Diagonal in the computational basis.
[[nodiscard]] constexpr bool is_diagonal(GateKind k) noexcept {
    return k == GateKind::RZ || k == GateKind::CZ;
}

/**
 * A single gate. Rotations are exp(-i angle P / 2) on `q0`; CZ acts on the
 * unordered pair (q0, q1) and carries no angle.
 */
struct Gate {
    GateKind kind{GateKind::RX};
    int q0{0};
    int q1{-1};
    AngleSource angle{NoAngle{}};

    static Gate rotation(GateKind kind, int qubit, AngleSource angle) {
        if (!is_rotation(kind)) {
            throw InvalidArgument("Gate::rotation: CZ is not a rotation");
        }
        if (std::holds_alternative<NoAngle>(angle)) {
            throw InvalidArgument("Gate::rotation: rotation needs an angle");
        }
        return Gate{kind, qubit, -1, angle};
    }

    static Gate cz(int a, int b) {
        if (a == b) {
            throw InvalidArgument("Gate::cz: targets must be distinct");
        }
        return Gate{GateKind::CZ, a, b, NoAngle{}};
    }

    [[nodiscard]] int arity() const noexcept {
        return kind == GateKind::CZ ? 2 : 1;
    }

    [[nodiscard]] bool touches(int q) const noexcept {
        return q0 == q || (kind == GateKind::CZ && q1 == q);
    }

    friend bool operator==(const Gate &, const Gate &) = default;
};

using Layer = std::vector<Gate>;

/**
 * Immutable layered circuit. Parameter values are supplied separately at
 * evaluation time.
 *
 * Gates inside one layer pairwise commute: a qubit is targeted by at most one
 * gate unless every gate on it is diagonal (so a full ring of CZs is a single
 * layer).
 */
class Circuit {
  public:
    Circuit(QubitGraph graph, std::vector<Layer> layers, int feature_dim,
            int depth)
        : graph_(std::move(graph)), layers_(std::move(layers)),
          feature_dim_(feature_dim), depth_(depth) {
        validate();
    }

    [[nodiscard]] const QubitGraph &graph() const noexcept { return graph_; }
    [[nodiscard]] const std::vector<Layer> &layers() const noexcept {
        return layers_;
    }
    [[nodiscard]] int num_qubits() const noexcept { return graph_.num_qubits(); }
    [[nodiscard]] int num_params() const noexcept { return num_params_; }
    [[nodiscard]] int feature_dim() const noexcept { return feature_dim_; }
    [[nodiscard]] int depth() const noexcept { return depth_; }

    /// True when the circuit equals `build_standard_circuit(m, L, d)`.
    [[nodiscard]] bool is_standard() const;

    friend bool operator==(const Circuit &, const Circuit &) = default;

  private:
    void validate() {
        const int m = graph_.num_qubits();
        if (feature_dim_ < 1) {
            throw InvalidArgument("Circuit: feature dimension must be >= 1");
        }
        if (depth_ < 0) {
            throw InvalidArgument("Circuit: depth must be non-negative");
        }
        std::set<int> params;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            // 0 = free, 1 = held by a diagonal gate, 2 = held by another.
            std::vector<char> busy(static_cast<std::size_t>(m), 0);
            auto claim = [&](int q, bool diagonal) {
                if (q < 0 || q >= m) {
                    throw InvalidArgument("Circuit: gate target out of range");
                }
                char &slot = busy[static_cast<std::size_t>(q)];
                const bool clash = slot == 2 || (slot == 1 && !diagonal);
                slot = diagonal ? char(1) : char(2);
                if (clash) {
                    throw InvalidArgument("Circuit: layer " + std::to_string(l) +
                                          " targets qubit " + std::to_string(q) +
                                          " twice");
                }
            };
            for (const Gate &g : layers_[l]) {
                claim(g.q0, is_diagonal(g.kind));
                if (g.kind == GateKind::CZ) {
                    claim(g.q1, true);
                    if (!graph_.has_edge(g.q0, g.q1)) {
                        throw InvalidArgument("Circuit: CZ on non-edge (" +
                                              std::to_string(g.q0) + "," +
                                              std::to_string(g.q1) + ")");
                    }
                    if (!std::holds_alternative<NoAngle>(g.angle)) {
                        throw InvalidArgument("Circuit: CZ carries no angle");
                    }
                    continue;
                }
                if (std::holds_alternative<NoAngle>(g.angle)) {
                    throw InvalidArgument("Circuit: rotation without angle");
                }
                if (const auto *e = std::get_if<EncodingAngle>(&g.angle)) {
                    if (e->feature < 0 || e->feature >= m) {
                        throw InvalidArgument(
                            "Circuit: encoding index out of range");
                    }
                }
                if (const auto *p = std::get_if<ParamAngle>(&g.angle)) {
                    if (p->index < 0) {
                        throw InvalidArgument("Circuit: negative param index");
                    }
                    params.insert(p->index);
                }
            }
        }
        num_params_ = static_cast<int>(params.size());
        if (!params.empty() && *params.rbegin() != num_params_ - 1) {
            throw InvalidArgument(
                "Circuit: parameter indices must cover 0..p-1 without gaps");
        }
    }

    QubitGraph graph_;
    std::vector<Layer> layers_;
    int feature_dim_;
    int depth_;
    int num_params_{0};
};

/**
 * Standard hardware-efficient ansatz on the m-cycle: an RY(xhat_j) encoding
 * layer, then `depth` repetitions of [RX(theta) on every qubit; CZ on every
 * cycle edge]. Parameter (l, j) has index l*m + j, so p = depth * m.
 */
inline Circuit build_standard_circuit(int m, int depth, int feature_dim) {
    if (m < 3) {
        throw InvalidArgument("build_standard_circuit: requires m >= 3, got " +
                              std::to_string(m));
    }
    if (depth < 1) {
        throw InvalidArgument("build_standard_circuit: requires L >= 1");
    }
    if (feature_dim < 1) {
        throw InvalidArgument("build_standard_circuit: requires d >= 1");
    }
    std::vector<Layer> layers;
    Layer enc;
    for (int j = 0; j < m; ++j) {
        enc.push_back(Gate::rotation(GateKind::RY, j, EncodingAngle{j}));
    }
    layers.push_back(std::move(enc));
    for (int l = 0; l < depth; ++l) {
        Layer rx;
        for (int j = 0; j < m; ++j) {
            rx.push_back(Gate::rotation(GateKind::RX, j, ParamAngle{l * m + j}));
        }
        layers.push_back(std::move(rx));
        Layer cz;
        for (int k = 0; k < m; ++k) {
            cz.push_back(Gate::cz(k, (k + 1) % m));
        }
        layers.push_back(std::move(cz));
    }
    return Circuit(QubitGraph::cycle(m), std::move(layers), feature_dim, depth);
}

inline bool Circuit::is_standard() const {
    if (!graph_.is_cycle() || depth_ < 1) {
        return false;
    }
    return *this == build_standard_circuit(graph_.num_qubits(), depth_,
                                           feature_dim_);
}

/// One weighted Pauli string. `paulis[i]` acts on qubit `support[i]`.
struct PauliTerm {
    std::vector<int> support;
    std::string paulis;
    double weight{1.0};

    [[nodiscard]] bool z_only() const {
        return std::all_of(paulis.begin(), paulis.end(),
                           [](char c) { return c == 'Z'; });
    }

    friend bool operator==(const PauliTerm &, const PauliTerm &) = default;
};

enum class ObservableKind { LocalZ, GlobalZ, Custom };

/// normalization * sum_k weight_k * P_k.
class Observable {
  public:
    Observable(std::vector<PauliTerm> terms, double normalization,
               ObservableKind kind = ObservableKind::Custom)
        : terms_(std::move(terms)), normalization_(normalization), kind_(kind) {
        if (terms_.empty()) {
            throw InvalidArgument("Observable: needs at least one term");
        }
        for (const PauliTerm &t : terms_) {
            if (t.support.empty() || t.support.size() != t.paulis.size()) {
                throw InvalidArgument(
                    "Observable: Pauli string length must match support");
            }
            if (std::set<int>(t.support.begin(), t.support.end()).size() !=
                t.support.size()) {
                throw InvalidArgument("Observable: repeated qubit in support");
            }
            for (char c : t.paulis) {
                if (c != 'X' && c != 'Y' && c != 'Z') {
                    throw InvalidArgument(
                        std::string("Observable: unknown Pauli '") + c + "'");
                }
            }
            for (int q : t.support) {
                if (q < 0) {
                    throw InvalidArgument("Observable: negative qubit");
                }
            }
        }
    }

    /// (1/sqrt m) * sum_k Z_k.
    static Observable local_z(int m) {
        std::vector<PauliTerm> terms;
        terms.reserve(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) {
            terms.push_back(PauliTerm{{k}, "Z", 1.0});
        }
        return Observable(std::move(terms), 1.0 / std::sqrt(double(m)),
                          ObservableKind::LocalZ);
    }

    /// Z_0 Z_1 ... Z_{m-1}.
    static Observable global_z(int m) {
        PauliTerm t;
        for (int k = 0; k < m; ++k) {
            t.support.push_back(k);
        }
        t.paulis.assign(static_cast<std::size_t>(m), 'Z');
        return Observable({std::move(t)}, 1.0, ObservableKind::GlobalZ);
    }

    [[nodiscard]] const std::vector<PauliTerm> &terms() const noexcept {
        return terms_;
    }
    [[nodiscard]] std::size_t num_terms() const noexcept { return terms_.size(); }
    [[nodiscard]] double normalization() const noexcept { return normalization_; }
    [[nodiscard]] ObservableKind kind() const noexcept { return kind_; }

    /// Largest qubit label used by any term, plus one.
    [[nodiscard]] int span_qubits() const {
        int hi = 0;
        for (const auto &t : terms_) {
            hi = std::max(hi, *std::max_element(t.support.begin(),
                                                t.support.end()) + 1);
        }
        return hi;
    }

  private:
    std::vector<PauliTerm> terms_;
    double normalization_;
    ObservableKind kind_;
};

inline const char *to_string(GateKind k) {
    switch (k) {
    case GateKind::RX:
        return "RX";
    case GateKind::RY:
        return "RY";
    case GateKind::RZ:
        return "RZ";
    case GateKind::CZ:
        return "CZ";
    }
    return "?";
}

inline const char *to_string(ObservableKind k) {
    switch (k) {
    case ObservableKind::LocalZ:
        return "local_z";
    case ObservableKind::GlobalZ:
        return "global_z";
    case ObservableKind::Custom:
        return "custom";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Serialization
//
// {
//   "m": 4, "L": 2, "d": 2,
//   "graph": "cycle"                      (or {"edges": [[a,b],...],
//                                               "max_degree": D})
//   "layers": [
//     [ {"gate": "RY", "targets": [0], "angle": {"encoding": 0}}, ... ],
//     [ {"gate": "RX", "targets": [0], "angle": {"param": 0}}, ... ],
//     [ {"gate": "CZ", "targets": [0, 1]}, ... ],
//     [ {"gate": "RZ", "targets": [2], "angle": {"fixed": 0.25}} ]
//   ]
// }
// ---------------------------------------------------------------------------

inline nlohmann::json circuit_to_json(const Circuit &c) {
    using nlohmann::json;
    json doc;
    doc["m"] = c.num_qubits();
    doc["L"] = c.depth();
    doc["d"] = c.feature_dim();
    if (c.graph().is_cycle() && c.graph().max_degree() == 2) {
        doc["graph"] = "cycle";
    } else {
        json edges = json::array();
        for (auto [a, b] : c.graph().edges()) {
            edges.push_back({a, b});
        }
        doc["graph"] = {{"edges", edges}, {"max_degree", c.graph().max_degree()}};
    }
    json layers = json::array();
    for (const Layer &layer : c.layers()) {
        json jl = json::array();
        for (const Gate &g : layer) {
            json jg;
            jg["gate"] = to_string(g.kind);
            if (g.kind == GateKind::CZ) {
                jg["targets"] = {g.q0, g.q1};
            } else {
                jg["targets"] = {g.q0};
            }
            std::visit(
                [&](const auto &a) {
                    using T = std::decay_t<decltype(a)>;
                    if constexpr (std::is_same_v<T, EncodingAngle>) {
                        jg["angle"] = {{"encoding", a.feature}};
                    } else if constexpr (std::is_same_v<T, ParamAngle>) {
                        jg["angle"] = {{"param", a.index}};
                    } else if constexpr (std::is_same_v<T, FixedAngle>) {
                        jg["angle"] = {{"fixed", a.radians}};
                    }
                },
                g.angle);
            jl.push_back(std::move(jg));
        }
        layers.push_back(std::move(jl));
    }
    doc["layers"] = std::move(layers);
    return doc;
}

inline Circuit circuit_from_json(const nlohmann::json &doc) {
    try {
        const int m = doc.at("m").get<int>();
        const int depth = doc.at("L").get<int>();
        const int d = doc.at("d").get<int>();
        const auto &jgraph = doc.at("graph");
        QubitGraph graph = [&] {
            if (jgraph.is_string()) {
                if (jgraph.get<std::string>() != "cycle") {
                    throw InvalidArgument("circuit_from_json: unknown graph '" +
                                          jgraph.get<std::string>() + "'");
                }
                return QubitGraph::cycle(m);
            }
            std::vector<std::pair<int, int>> edges;
            for (const auto &e : jgraph.at("edges")) {
                edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
            }
            return QubitGraph(m, std::move(edges),
                              jgraph.at("max_degree").get<int>());
        }();
        std::vector<Layer> layers;
        for (const auto &jl : doc.at("layers")) {
            Layer layer;
            for (const auto &jg : jl) {
                const auto name = jg.at("gate").get<std::string>();
                const auto &targets = jg.at("targets");
                if (name == "CZ") {
                    if (targets.size() != 2 || jg.contains("angle")) {
                        throw InvalidArgument(
                            "circuit_from_json: CZ needs two targets, no angle");
                    }
                    layer.push_back(
                        Gate::cz(targets[0].get<int>(), targets[1].get<int>()));
                    continue;
                }
                GateKind kind;
                if (name == "RX") {
                    kind = GateKind::RX;
                } else if (name == "RY") {
                    kind = GateKind::RY;
                } else if (name == "RZ") {
                    kind = GateKind::RZ;
                } else {
                    throw InvalidArgument("circuit_from_json: unknown gate '" +
                                          name + "'");
                }
                if (targets.size() != 1) {
                    throw InvalidArgument(
                        "circuit_from_json: rotation needs one target");
                }
                const auto &ja = jg.at("angle");
                if (ja.size() != 1) {
                    throw InvalidArgument(
                        "circuit_from_json: angle needs exactly one source");
                }
                AngleSource angle;
                if (ja.contains("encoding")) {
                    angle = EncodingAngle{ja["encoding"].get<int>()};
                } else if (ja.contains("param")) {
                    angle = ParamAngle{ja["param"].get<int>()};
                } else if (ja.contains("fixed")) {
                    angle = FixedAngle{ja["fixed"].get<double>()};
                } else {
                    throw InvalidArgument(
                        "circuit_from_json: unknown angle source");
                }
                layer.push_back(Gate::rotation(kind, targets[0].get<int>(), angle));
            }
            layers.push_back(std::move(layer));
        }
        return Circuit(std::move(graph), std::move(layers), d, depth);
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("circuit_from_json: ") + e.what());
    }
}

} // namespace qlazy
