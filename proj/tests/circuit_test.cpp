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

#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "qlazy/circuit.hpp"

namespace qlazy {
namespace {

std::vector<double> as_vector(const EncodedFeatures &e) {
    return {e.values().begin(), e.values().end()};
}

TEST(QubitGraphTest, CycleHasExactlyTheRingEdges) {
    const QubitGraph g = QubitGraph::cycle(5);
    ASSERT_EQ(g.edges().size(), 5u);
    for (int k = 0; k < 5; ++k) {
        EXPECT_TRUE(g.has_edge(k, (k + 1) % 5));
        EXPECT_TRUE(g.has_edge((k + 1) % 5, k));
    }
    EXPECT_FALSE(g.has_edge(0, 2));
    EXPECT_EQ(g.max_degree(), 2);
    EXPECT_TRUE(g.is_cycle());
}

TEST(QubitGraphTest, RejectsBadEdges) {
    EXPECT_THROW(QubitGraph(3, {{0, 3}}, 2), InvalidArgument);
    EXPECT_THROW(QubitGraph(3, {{-1, 0}}, 2), InvalidArgument);
    EXPECT_THROW(QubitGraph(3, {{1, 1}}, 2), InvalidArgument);
    EXPECT_THROW(QubitGraph(3, {{0, 1}, {1, 0}}, 2), InvalidArgument);
    EXPECT_THROW(QubitGraph(4, {{0, 1}, {0, 2}, {0, 3}}, 2), InvalidArgument);
    EXPECT_THROW(QubitGraph::cycle(2), InvalidArgument);
}

TEST(BuildStandardCircuitTest, FourQubitsTwoLayers) {
    const Circuit c = build_standard_circuit(4, 2, 2);
    EXPECT_EQ(c.num_params(), 8);
    EXPECT_EQ(c.num_qubits(), 4);
    EXPECT_EQ(c.feature_dim(), 2);
    EXPECT_EQ(c.depth(), 2);
    // Encoding layer, then (RX, CZ) twice.
    ASSERT_EQ(c.layers().size(), 5u);
    for (const Gate &g : c.layers()[0]) {
        EXPECT_EQ(g.kind, GateKind::RY);
        EXPECT_TRUE(std::holds_alternative<EncodingAngle>(g.angle));
    }
    for (std::size_t l : {1u, 3u}) {
        ASSERT_EQ(c.layers()[l].size(), 4u);
        for (const Gate &g : c.layers()[l]) {
            EXPECT_EQ(g.kind, GateKind::RX);
        }
    }
    for (std::size_t l : {2u, 4u}) {
        ASSERT_EQ(c.layers()[l].size(), 4u);
        for (const Gate &g : c.layers()[l]) {
            EXPECT_EQ(g.kind, GateKind::CZ);
        }
    }
    EXPECT_TRUE(c.is_standard());
}

TEST(BuildStandardCircuitTest, ThreeQubitRing) {
    const Circuit c = build_standard_circuit(3, 1, 1);
    EXPECT_EQ(c.num_params(), 3);
    std::set<std::pair<int, int>> cz;
    for (const Layer &layer : c.layers()) {
        for (const Gate &g : layer) {
            if (g.kind == GateKind::CZ) {
                cz.insert(std::minmax(g.q0, g.q1));
            }
        }
    }
    EXPECT_EQ(cz, (std::set<std::pair<int, int>>{{0, 1}, {1, 2}, {0, 2}}));
}

TEST(BuildStandardCircuitTest, RejectsDegenerateShapes) {
    EXPECT_THROW(build_standard_circuit(2, 1, 1), InvalidArgument);
    EXPECT_THROW(build_standard_circuit(4, 0, 1), InvalidArgument);
    EXPECT_THROW(build_standard_circuit(4, 1, 0), InvalidArgument);
}

TEST(BuildStandardCircuitTest, ParamIndexIsLayerMajor) {
    const int m = 5;
    const Circuit c = build_standard_circuit(m, 3, 2);
    for (int l = 0; l < 3; ++l) {
        const Layer &rx = c.layers()[static_cast<std::size_t>(1 + 2 * l)];
        for (int j = 0; j < m; ++j) {
            const Gate &g = rx[static_cast<std::size_t>(j)];
            EXPECT_EQ(g.q0, j);
            EXPECT_EQ(std::get<ParamAngle>(g.angle).index, l * m + j);
        }
    }
}

TEST(BuildStandardCircuitTest, CzTargetsAreCycleNeighbours) {
    for (int m : {3, 4, 7, 12}) {
        const Circuit c = build_standard_circuit(m, 3, 2);
        for (const Layer &layer : c.layers()) {
            for (const Gate &g : layer) {
                if (g.kind == GateKind::CZ) {
                    const int diff = (g.q1 - g.q0 + m) % m;
                    EXPECT_TRUE(diff == 1 || diff == m - 1) << g.q0 << "," << g.q1;
                }
            }
        }
    }
}

TEST(CircuitTest, RejectsNonCommutingLayer) {
    const QubitGraph g = QubitGraph::cycle(3);
    std::vector<Layer> layers{{Gate::rotation(GateKind::RX, 0, ParamAngle{0}),
                               Gate::rotation(GateKind::RY, 0, FixedAngle{0.3})}};
    EXPECT_THROW(Circuit(g, layers, 1, 1), InvalidArgument);
    std::vector<Layer> mixed{{Gate::cz(0, 1), Gate::rotation(GateKind::RX, 1, ParamAngle{0})}};
    EXPECT_THROW(Circuit(g, mixed, 1, 1), InvalidArgument);
}

TEST(CircuitTest, DiagonalGatesMayShareAQubit) {
    const QubitGraph g = QubitGraph::cycle(3);
    std::vector<Layer> layers{{Gate::cz(0, 1), Gate::cz(1, 2),
                               Gate::rotation(GateKind::RZ, 1, FixedAngle{0.5})}};
    EXPECT_NO_THROW(Circuit(g, layers, 1, 0));
}

TEST(CircuitTest, RejectsCzOffTheGraph) {
    const QubitGraph g(4, {{0, 1}, {1, 2}, {2, 3}}, 2);
    std::vector<Layer> layers{{Gate::cz(0, 2)}};
    EXPECT_THROW(Circuit(g, layers, 1, 0), InvalidArgument);
}

TEST(CircuitTest, RejectsParamGaps) {
    const QubitGraph g = QubitGraph::cycle(3);
    std::vector<Layer> layers{{Gate::rotation(GateKind::RX, 0, ParamAngle{0}),
                               Gate::rotation(GateKind::RX, 1, ParamAngle{2})}};
    EXPECT_THROW(Circuit(g, layers, 1, 1), InvalidArgument);
}

TEST(CircuitTest, RejectsEncodingIndexOutOfRange) {
    const QubitGraph g = QubitGraph::cycle(3);
    std::vector<Layer> layers{{Gate::rotation(GateKind::RY, 0, EncodingAngle{3})}};
    EXPECT_THROW(Circuit(g, layers, 1, 0), InvalidArgument);
}

TEST(CircuitTest, SharedParameterCountsOnce) {
    const QubitGraph g = QubitGraph::cycle(3);
    std::vector<Layer> layers{{Gate::rotation(GateKind::RX, 0, ParamAngle{0}),
                               Gate::rotation(GateKind::RX, 1, ParamAngle{0})}};
    EXPECT_EQ(Circuit(g, layers, 1, 1).num_params(), 1);
}

TEST(GateTest, Constructors) {
    EXPECT_THROW(Gate::cz(2, 2), InvalidArgument);
    EXPECT_THROW(Gate::rotation(GateKind::CZ, 0, ParamAngle{0}), InvalidArgument);
    EXPECT_THROW(Gate::rotation(GateKind::RX, 0, NoAngle{}), InvalidArgument);
    EXPECT_EQ(Gate::cz(0, 1).arity(), 2);
    EXPECT_EQ(Gate::rotation(GateKind::RZ, 0, FixedAngle{1.0}).arity(), 1);
}

TEST(EncodeTest, CyclicRepetition) {
    const std::vector<double> ab{1.5, -2.0};
    const auto e = encode(ab, 5);
    EXPECT_EQ(as_vector(e), (std::vector<double>{1.5, -2.0, 1.5, -2.0, 1.5}));
    const std::vector<double> a{0.7};
    EXPECT_EQ(as_vector(encode(a, 3)), (std::vector<double>{0.7, 0.7, 0.7}));
    const std::vector<double> abc{1.0, 2.0, 3.0};
    EXPECT_EQ(as_vector(encode(abc, 3)), abc);
}

TEST(EncodeTest, PeriodicInFeatureDimension) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    for (int d = 1; d <= 6; ++d) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (double &v : x) {
            v = u(rng);
        }
        const auto e = encode(x, 17);
        for (std::size_t j = 0; j + d < e.size(); ++j) {
            EXPECT_EQ(e[j + static_cast<std::size_t>(d)], e[j]);
        }
    }
}

TEST(EncodeTest, RejectsEmptyInput) {
    EXPECT_THROW(encode(std::vector<double>{}, 3), InvalidArgument);
    EXPECT_THROW(encode(std::vector<double>{1.0}, 0), InvalidArgument);
}

TEST(ObservableTest, LocalZ) {
    const Observable o = Observable::local_z(6);
    ASSERT_EQ(o.num_terms(), 6u);
    EXPECT_DOUBLE_EQ(o.normalization(), 1.0 / std::sqrt(6.0));
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_EQ(o.terms()[k].support, std::vector<int>{static_cast<int>(k)});
        EXPECT_EQ(o.terms()[k].paulis, "Z");
        EXPECT_EQ(o.terms()[k].weight, 1.0);
    }
    EXPECT_EQ(o.kind(), ObservableKind::LocalZ);
}

TEST(ObservableTest, GlobalZ) {
    const Observable o = Observable::global_z(5);
    ASSERT_EQ(o.num_terms(), 1u);
    EXPECT_EQ(o.terms()[0].paulis, "ZZZZZ");
    EXPECT_EQ(o.terms()[0].support, (std::vector<int>{0, 1, 2, 3, 4}));
    EXPECT_EQ(o.normalization(), 1.0);
    EXPECT_EQ(o.span_qubits(), 5);
}

TEST(ObservableTest, RejectsMalformedTerms) {
    EXPECT_THROW(Observable({}, 1.0), InvalidArgument);
    EXPECT_THROW(Observable({PauliTerm{{0, 1}, "Z", 1.0}}, 1.0), InvalidArgument);
    EXPECT_THROW(Observable({PauliTerm{{0, 0}, "ZZ", 1.0}}, 1.0), InvalidArgument);
    EXPECT_THROW(Observable({PauliTerm{{0}, "Q", 1.0}}, 1.0), InvalidArgument);
}

// Random valid circuits on a cycle: each layer is either single-qubit
// rotations on distinct qubits or a set of CZs with optional RZs.
Circuit random_circuit(std::mt19937_64 &rng) {
    std::uniform_int_distribution<int> mdist(3, 7);
    const int m = mdist(rng);
    const QubitGraph graph = QubitGraph::cycle(m);
    std::uniform_int_distribution<int> ldist(1, 6);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_real_distribution<double> angle(-7.0, 7.0);
    std::vector<Layer> layers;
    int next_param = 0;
    const int nl = ldist(rng);
    for (int l = 0; l < nl; ++l) {
        Layer layer;
        if (coin(rng) == 0) {
            for (int q = 0; q < m; ++q) {
                if (coin(rng) == 0) {
                    continue;
                }
                const auto k = static_cast<GateKind>(kind(rng));
                switch (kind(rng)) {
                case 0:
                    layer.push_back(Gate::rotation(k, q, EncodingAngle{q}));
                    break;
                case 1:
                    layer.push_back(Gate::rotation(k, q, ParamAngle{next_param++}));
                    break;
                default:
                    layer.push_back(Gate::rotation(k, q, FixedAngle{angle(rng)}));
                }
            }
        } else {
            for (int q = 0; q < m; ++q) {
                if (coin(rng) != 0) {
                    layer.push_back(Gate::cz(q, (q + 1) % m));
                }
                if (coin(rng) != 0) {
                    layer.push_back(Gate::rotation(GateKind::RZ, q, FixedAngle{angle(rng)}));
                }
            }
        }
        layers.push_back(std::move(layer));
    }
    std::uniform_int_distribution<int> ddist(1, 4);
    return Circuit(graph, std::move(layers), ddist(rng), nl);
}

TEST(SerializationTest, StandardCircuitRoundTrip) {
    for (int m : {3, 4, 9}) {
        for (int L : {1, 2, 3}) {
            const Circuit c = build_standard_circuit(m, L, 2);
            const auto doc = circuit_to_json(c);
            EXPECT_EQ(doc["graph"], "cycle");
            EXPECT_EQ(doc["m"], m);
            EXPECT_EQ(doc["L"], L);
            EXPECT_EQ(doc["d"], 2);
            EXPECT_EQ(circuit_from_json(doc), c);
            EXPECT_EQ(circuit_from_json(nlohmann::json::parse(doc.dump())), c);
        }
    }
}

TEST(SerializationTest, RandomCircuitsRoundTrip) {
    std::mt19937_64 rng(2026);
    for (int trial = 0; trial < 200; ++trial) {
        const Circuit c = random_circuit(rng);
        const std::string text = circuit_to_json(c).dump();
        const Circuit back = circuit_from_json(nlohmann::json::parse(text));
        EXPECT_EQ(back, c) << text;
        EXPECT_EQ(back.num_params(), c.num_params());
    }
}

TEST(SerializationTest, GeneralGraphRoundTrip) {
    const QubitGraph g(4, {{0, 1}, {1, 2}, {2, 3}}, 2);
    std::vector<Layer> layers{{Gate::rotation(GateKind::RY, 0, EncodingAngle{0}),
                               Gate::rotation(GateKind::RX, 3, ParamAngle{0})},
                              {Gate::cz(0, 1), Gate::cz(2, 3)}};
    const Circuit c(g, layers, 1, 1);
    const auto doc = circuit_to_json(c);
    EXPECT_TRUE(doc["graph"].is_object());
    EXPECT_EQ(circuit_from_json(doc), c);
}

TEST(SerializationTest, RejectsMalformedDocuments) {
    auto doc = circuit_to_json(build_standard_circuit(3, 1, 1));
    auto bad = doc;
    bad["layers"][1][0]["gate"] = "RQ";
    EXPECT_THROW(circuit_from_json(bad), InvalidArgument);
    bad = doc;
    bad.erase("layers");
    EXPECT_THROW(circuit_from_json(bad), InvalidArgument);
    bad = doc;
    bad["layers"][2][0]["targets"] = {0, 2, 1};
    EXPECT_THROW(circuit_from_json(bad), InvalidArgument);
    EXPECT_THROW(circuit_from_json(nlohmann::json::array()), InvalidArgument);
}

} // namespace
} // namespace qlazy
