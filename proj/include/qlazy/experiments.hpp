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
 * Experiment configuration, the Iris loader, and the runners behind the
 * command-line verbs. Every runner returns its artifacts in memory; nothing
 * touches the filesystem until write_outputs() is called with a finished
 * result.
 */
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "analytic.hpp"
#include "circuit.hpp"
#include "json.hpp"
#include "kernel.hpp"
#include "lightcone.hpp"
#include "parallel.hpp"
#include "trainer.hpp"

namespace qlazy {

/// Invalid or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public Error {
  public:
    using Error::Error;
};

enum class ExperimentKind {
    Eval,
    Kernel,
    Gram,
    Concentration,
    Train,
    Compare,
    Iris,
    GlobalCompare
};

inline const char *to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::Eval:
        return "eval";
    case ExperimentKind::Kernel:
        return "kernel";
    case ExperimentKind::Gram:
        return "gram";
    case ExperimentKind::Concentration:
        return "concentration";
    case ExperimentKind::Train:
        return "train";
    case ExperimentKind::Compare:
        return "compare";
    case ExperimentKind::Iris:
        return "iris";
    case ExperimentKind::GlobalCompare:
        return "global-compare";
    }
    return "?";
}

inline std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
    for (auto k : {ExperimentKind::Eval, ExperimentKind::Kernel, ExperimentKind::Gram,
                   ExperimentKind::Concentration, ExperimentKind::Train,
                   ExperimentKind::Compare, ExperimentKind::Iris,
                   ExperimentKind::GlobalCompare}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

inline const std::vector<std::string> &iris_species() {
    static const std::vector<std::string> names{"setosa", "versicolor", "virginica"};
    return names;
}

struct DatasetConfig {
    std::string kind{"random"}; ///< random | teacher | iris
    int n{10};
    std::vector<std::string> classes{"setosa", "versicolor"};
    std::string path{"data/iris.csv"};
    /// Target interval of the per-column affine feature map (Iris only).
    std::array<double, 2> feature_range{-kTwoPi, kTwoPi};
};

struct ExperimentConfig {
    ExperimentKind experiment{ExperimentKind::Eval};
    int m{10};
    int L{2};
    int d{4};
    std::uint64_t seed{1};
    double eta{1.0};
    int iterations{100};
    DatasetConfig dataset;
    ObservableKind observable{ObservableKind::LocalZ};
    std::string output_dir{"out"};
    int samples{10000};
    std::vector<int> m_sweep;
    int replicates{1};
    int kernel_stride{10};
    int bins{50};
    double rank_threshold{1e-3};
    int dense_cap{kDefaultDenseCap};
    std::string init{"uniform"}; ///< uniform | zero
    std::optional<FeatureVector> x;
    std::optional<FeatureVector> x2;

    /// m_sweep if given, else {m}.
    [[nodiscard]] std::vector<int> qubit_counts() const {
        return m_sweep.empty() ? std::vector<int>{m} : m_sweep;
    }
};

namespace detail {

using nlohmann::json;

inline int get_int(const json &v, const std::string &key, long lo, long hi) {
    if (!v.is_number_integer()) {
        throw ConfigError("config: '" + key + "' must be an integer");
    }
    const auto i = v.get<long long>();
    if (i < lo || i > hi) {
        throw ConfigError("config: '" + key + "' = " + std::to_string(i) +
                          " is outside [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
    }
    return static_cast<int>(i);
}

inline double get_double(const json &v, const std::string &key) {
    if (!v.is_number()) {
        throw ConfigError("config: '" + key + "' must be a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw ConfigError("config: '" + key + "' must be finite");
    }
    return d;
}

inline std::string get_string(const json &v, const std::string &key) {
    if (!v.is_string()) {
        throw ConfigError("config: '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

inline FeatureVector get_vector(const json &v, const std::string &key) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError("config: '" + key + "' must be a non-empty array of numbers");
    }
    FeatureVector out;
    for (const auto &e : v) {
        out.push_back(get_double(e, key));
    }
    return out;
}

inline void reject_unknown(const json &obj, const std::set<std::string> &known,
                           const std::string &where) {
    for (const auto &[key, value] : obj.items()) {
        if (known.count(key) == 0) {
            throw ConfigError("config: unknown key '" + where + key + "'");
        }
    }
}

inline std::string strip_species_prefix(std::string s) {
    if (s.rfind("Iris-", 0) == 0) {
        s.erase(0, 5);
    }
    return s;
}

} // namespace detail

/// Cross-field checks; called by parse_config and safe to call again.
inline void validate_config(const ExperimentConfig &c) {
    using K = ExperimentKind;
    for (int m : c.qubit_counts()) {
        if (m < 3) {
            throw ConfigError("config: m must be at least 3, got " + std::to_string(m));
        }
    }
    if (c.experiment == K::Iris && c.dataset.kind != "iris") {
        throw ConfigError("config: experiment 'iris' needs dataset.kind = \"iris\"");
    }
    if (c.dataset.kind == "iris") {
        if (c.d != 4) {
            throw ConfigError("config: Iris rows have 4 features, so d must be 4");
        }
        const auto &names = iris_species();
        if (c.dataset.classes.size() != 2) {
            throw ConfigError("config: dataset.classes must name exactly two classes");
        }
        for (const auto &cls : c.dataset.classes) {
            if (std::find(names.begin(), names.end(), cls) == names.end()) {
                throw ConfigError("config: unknown class name '" + cls + "'");
            }
        }
        if (c.dataset.classes[0] == c.dataset.classes[1]) {
            throw ConfigError("config: dataset.classes must be distinct");
        }
        std::error_code ec;
        if (!std::filesystem::is_regular_file(c.dataset.path, ec)) {
            throw ConfigError("config: dataset.path '" + c.dataset.path +
                              "' is not a readable file");
        }
    }
    if (c.experiment == K::GlobalCompare && !c.m_sweep.empty()) {
        throw ConfigError("config: global-compare runs a single m; drop m_sweep");
    }
    for (const auto *v : {&c.x, &c.x2}) {
        if (*v && (*v)->size() != static_cast<std::size_t>(c.d)) {
            throw ConfigError("config: explicit inputs must have length d = " +
                              std::to_string(c.d));
        }
    }
    const bool global = c.observable == ObservableKind::GlobalZ ||
                        c.experiment == K::GlobalCompare;
    if (global) {
        for (int m : c.qubit_counts()) {
            if (m > c.dense_cap) {
                throw ConfigError("config: global_z at m = " + std::to_string(m) +
                                  " needs a full-width light cone, above the dense cap of " +
                                  std::to_string(c.dense_cap) + " qubits");
            }
        }
    }
}

/**
 * Strict parse: unknown keys and out-of-range values raise ConfigError.
 * Missing keys keep their defaults. `observable` may also be given as a bare
 * kind string.
 */
inline ExperimentConfig parse_config(const nlohmann::json &doc) {
    using detail::get_double;
    using detail::get_int;
    using detail::get_string;
    if (!doc.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    detail::reject_unknown(doc,
                           {"experiment", "m", "L", "d", "seed", "eta", "iterations",
                            "dataset", "observable", "output_dir", "samples",
                            "m_sweep", "replicates", "kernel_stride", "bins",
                            "rank_threshold", "dense_cap", "init", "x", "x2"},
                           "");
    ExperimentConfig c;
    if (doc.contains("experiment")) {
        const auto s = get_string(doc["experiment"], "experiment");
        const auto k = parse_experiment_kind(s);
        if (!k) {
            throw ConfigError("config: unknown experiment '" + s + "'");
        }
        c.experiment = *k;
    }
    if (doc.contains("m")) c.m = get_int(doc["m"], "m", 3, 100000);
    if (doc.contains("L")) c.L = get_int(doc["L"], "L", 1, 1000);
    if (doc.contains("d")) c.d = get_int(doc["d"], "d", 1, 100000);
    if (doc.contains("seed")) {
        const auto &s = doc["seed"];
        if (!s.is_number_unsigned() &&
            !(s.is_number_integer() && s.get<long long>() >= 0)) {
            throw ConfigError("config: 'seed' must be a non-negative integer");
        }
        c.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("eta")) {
        c.eta = get_double(doc["eta"], "eta");
        if (!(c.eta > 0.0)) {
            throw ConfigError("config: 'eta' must be positive");
        }
    }
    if (doc.contains("iterations")) {
        c.iterations = get_int(doc["iterations"], "iterations", 0, 10000000);
    }
    if (doc.contains("dataset")) {
        const auto &ds = doc["dataset"];
        if (!ds.is_object()) {
            throw ConfigError("config: 'dataset' must be an object");
        }
        detail::reject_unknown(ds, {"kind", "n", "classes", "path", "feature_range"},
                               "dataset.");
        if (ds.contains("kind")) {
            c.dataset.kind = get_string(ds["kind"], "dataset.kind");
            if (c.dataset.kind != "random" && c.dataset.kind != "teacher" &&
                c.dataset.kind != "iris") {
                throw ConfigError("config: dataset.kind must be random, teacher or iris");
            }
        }
        if (ds.contains("n")) c.dataset.n = get_int(ds["n"], "dataset.n", 1, 1000000);
        if (ds.contains("classes")) {
            const auto &cl = ds["classes"];
            if (!cl.is_array()) {
                throw ConfigError("config: dataset.classes must be an array");
            }
            c.dataset.classes.clear();
            for (const auto &e : cl) {
                c.dataset.classes.push_back(
                    detail::strip_species_prefix(get_string(e, "dataset.classes")));
            }
        }
        if (ds.contains("path")) c.dataset.path = get_string(ds["path"], "dataset.path");
        if (ds.contains("feature_range")) {
            const auto r = detail::get_vector(ds["feature_range"], "dataset.feature_range");
            if (r.size() != 2 || !(r[0] < r[1])) {
                throw ConfigError("config: dataset.feature_range must be [lo, hi] with lo < hi");
            }
            c.dataset.feature_range = {r[0], r[1]};
        }
    }
    if (doc.contains("observable")) {
        const auto &ob = doc["observable"];
        std::string kind;
        if (ob.is_string()) {
            kind = ob.get<std::string>();
        } else if (ob.is_object()) {
            detail::reject_unknown(ob, {"kind"}, "observable.");
            if (!ob.contains("kind")) {
                throw ConfigError("config: observable.kind is required");
            }
            kind = get_string(ob["kind"], "observable.kind");
        } else {
            throw ConfigError("config: 'observable' must be an object or a string");
        }
        if (kind == "local_z") {
            c.observable = ObservableKind::LocalZ;
        } else if (kind == "global_z") {
            c.observable = ObservableKind::GlobalZ;
        } else {
            throw ConfigError("config: observable.kind must be local_z or global_z");
        }
    }
    if (doc.contains("output_dir")) {
        c.output_dir = get_string(doc["output_dir"], "output_dir");
        if (c.output_dir.empty()) {
            throw ConfigError("config: 'output_dir' must not be empty");
        }
    }
    if (doc.contains("samples")) c.samples = get_int(doc["samples"], "samples", 2, 100000000);
    if (doc.contains("m_sweep")) {
        const auto &sw = doc["m_sweep"];
        if (!sw.is_array() || sw.empty()) {
            throw ConfigError("config: 'm_sweep' must be a non-empty integer array");
        }
        for (const auto &e : sw) {
            c.m_sweep.push_back(get_int(e, "m_sweep", 3, 100000));
        }
    }
    if (doc.contains("replicates")) {
        c.replicates = get_int(doc["replicates"], "replicates", 1, 100000);
    }
    if (doc.contains("kernel_stride")) {
        c.kernel_stride = get_int(doc["kernel_stride"], "kernel_stride", 0, 10000000);
    }
    if (doc.contains("bins")) c.bins = get_int(doc["bins"], "bins", 1, 1000000);
    if (doc.contains("rank_threshold")) {
        c.rank_threshold = get_double(doc["rank_threshold"], "rank_threshold");
        if (c.rank_threshold < 0.0) {
            throw ConfigError("config: 'rank_threshold' must be non-negative");
        }
    }
    if (doc.contains("dense_cap")) c.dense_cap = get_int(doc["dense_cap"], "dense_cap", 1, 30);
    if (doc.contains("init")) {
        c.init = get_string(doc["init"], "init");
        if (c.init != "uniform" && c.init != "zero") {
            throw ConfigError("config: 'init' must be uniform or zero");
        }
    }
    if (doc.contains("x")) c.x = detail::get_vector(doc["x"], "x");
    if (doc.contains("x2")) c.x2 = detail::get_vector(doc["x2"], "x2");
    validate_config(c);
    return c;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig &c) {
    nlohmann::ordered_json j;
    j["experiment"] = to_string(c.experiment);
    j["m"] = c.m;
    j["L"] = c.L;
    j["d"] = c.d;
    j["seed"] = c.seed;
    j["eta"] = c.eta;
    j["iterations"] = c.iterations;
    j["dataset"] = {{"kind", c.dataset.kind},
                    {"n", c.dataset.n},
                    {"classes", c.dataset.classes},
                    {"path", c.dataset.path},
                    {"feature_range", c.dataset.feature_range}};
    j["observable"] = {{"kind", to_string(c.observable)}};
    j["output_dir"] = c.output_dir;
    j["samples"] = c.samples;
    if (!c.m_sweep.empty()) {
        j["m_sweep"] = c.m_sweep;
    }
    j["replicates"] = c.replicates;
    j["kernel_stride"] = c.kernel_stride;
    j["bins"] = c.bins;
    j["rank_threshold"] = c.rank_threshold;
    j["dense_cap"] = c.dense_cap;
    j["init"] = c.init;
    if (c.x) j["x"] = *c.x;
    if (c.x2) j["x2"] = *c.x2;
    return j;
}

/**
 * Sets a (possibly dotted) key in a config document. The value is read as
 * JSON when it parses, otherwise as a plain string.
 */
inline void apply_override(nlohmann::json &doc, const std::string &key,
                           const std::string &value) {
    if (key.empty()) {
        throw ConfigError("config: empty override key");
    }
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception &) {
        parsed = value;
    }
    nlohmann::json *node = &doc;
    std::string_view rest = key;
    for (;;) {
        const auto dot = rest.find('.');
        const std::string head(rest.substr(0, dot));
        if (dot == std::string_view::npos) {
            (*node)[head] = std::move(parsed);
            return;
        }
        nlohmann::json &child = (*node)[head];
        if (child.is_null()) {
            child = nlohmann::json::object();
        } else if (!child.is_object()) {
            throw ConfigError("config: override '" + key + "' descends into a non-object");
        }
        node = &child;
        rest.remove_prefix(dot + 1);
    }
}

inline nlohmann::json read_config_document(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config: '" + path + "' is not valid JSON (" +
                          std::string(e.what()) + ")");
    }
}

// ---------------------------------------------------------------------------
// Iris
// ---------------------------------------------------------------------------

struct IrisRecord {
    std::array<double, 4> features;
    std::string species;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    for (;;) {
        const auto c = line.find(',');
        out.push_back(trim(line.substr(0, c)));
        if (c == std::string_view::npos) {
            return out;
        }
        line.remove_prefix(c + 1);
    }
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto *end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return v;
}

} // namespace detail

/// Parses Iris rows; the header line is optional.
inline std::vector<IrisRecord> read_iris_records(std::istream &in) {
    std::vector<IrisRecord> rows;
    std::string line;
    int lineno = 0;
    bool first_content = true;
    const auto &names = iris_species();
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty()) {
            continue;
        }
        const auto fields = detail::split_commas(t);
        const bool numeric = fields.size() >= 4 &&
                             std::all_of(fields.begin(), fields.begin() + 4,
                                         [](auto f) { return detail::parse_double(f).has_value(); });
        if (first_content && !numeric) {
            first_content = false;
            continue;
        }
        first_content = false;
        if (fields.size() != 5 || !numeric) {
            throw Error("iris: malformed row at line " + std::to_string(lineno) +
                        " (expected 4 numbers and a species)");
        }
        IrisRecord r;
        for (std::size_t i = 0; i < 4; ++i) {
            r.features[i] = *detail::parse_double(fields[i]);
            if (!std::isfinite(r.features[i])) {
                throw Error("iris: non-finite feature at line " + std::to_string(lineno));
            }
        }
        r.species = detail::strip_species_prefix(std::string(fields[4]));
        if (std::find(names.begin(), names.end(), r.species) == names.end()) {
            throw Error("iris: unknown class name '" + r.species + "' at line " +
                        std::to_string(lineno));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

/**
 * Keeps the two requested classes in file order, maps each feature column
 * affinely from its observed [min, max] onto [lo, hi] (default [-2pi, 2pi];
 * a constant column maps to the midpoint), and labels the first class +1
 * and the second -1.
 */
inline Dataset iris_dataset(const std::vector<IrisRecord> &records,
                            const std::vector<std::string> &classes,
                            const std::string &source = "iris", double lo_out = -kTwoPi,
                            double hi_out = kTwoPi) {
    if (!(lo_out < hi_out)) {
        throw InvalidArgument("iris: feature range must satisfy lo < hi");
    }
    const auto &names = iris_species();
    if (classes.size() != 2 || classes[0] == classes[1]) {
        throw InvalidArgument("iris: need two distinct class names");
    }
    for (const auto &c : classes) {
        if (std::find(names.begin(), names.end(), c) == names.end()) {
            throw InvalidArgument("iris: unknown class name '" + c + "'");
        }
    }
    std::vector<const IrisRecord *> kept;
    std::array<int, 2> counts{0, 0};
    for (const auto &r : records) {
        for (std::size_t c = 0; c < 2; ++c) {
            if (r.species == classes[c]) {
                kept.push_back(&r);
                ++counts[c];
            }
        }
    }
    for (std::size_t c = 0; c < 2; ++c) {
        if (counts[c] < 2) {
            throw Error("iris: class '" + classes[c] + "' has " +
                        std::to_string(counts[c]) + " rows, need at least 2");
        }
    }
    std::array<double, 4> lo{};
    std::array<double, 4> hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto *r : kept) {
        for (std::size_t i = 0; i < 4; ++i) {
            lo[i] = std::min(lo[i], r->features[i]);
            hi[i] = std::max(hi[i], r->features[i]);
        }
    }
    Dataset ds;
    ds.provenance = ExternalSource{source + ":" + classes[0] + "," + classes[1]};
    for (const auto *r : kept) {
        FeatureVector x(4);
        for (std::size_t i = 0; i < 4; ++i) {
            x[i] = hi[i] > lo[i] ? lo_out + (hi_out - lo_out) * (r->features[i] - lo[i]) /
                                                 (hi[i] - lo[i])
                                 : 0.5 * (lo_out + hi_out);
        }
        ds.x.push_back(std::move(x));
        ds.y.push_back(r->species == classes[0] ? 1.0 : -1.0);
    }
    return ds;
}

inline Dataset load_iris(const std::string &path, const std::vector<std::string> &classes,
                         std::array<double, 2> range = {-kTwoPi, kTwoPi}) {
    std::ifstream in(path);
    if (!in) {
        throw Error("iris: cannot open '" + path + "'");
    }
    return iris_dataset(read_iris_records(in), classes, "iris", range[0], range[1]);
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

struct Artifact {
    std::string name;
    std::string content;
};

struct ExperimentResult {
    std::vector<Artifact> files;
    /// Headline numbers; also written as one of the files.
    nlohmann::ordered_json summary;
};

inline nlohmann::ordered_json provenance_json(const DatasetProvenance &p) {
    return std::visit(
        [](const auto &s) -> nlohmann::ordered_json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, RandomUniformSource>) {
                return {{"kind", "random"}, {"seed", s.seed}};
            } else if constexpr (std::is_same_v<T, TeacherSource>) {
                return {{"kind", "teacher"}, {"seed", s.seed}, {"teacher_theta", s.teacher_theta}};
            } else {
                return {{"kind", "external"}, {"name", s.name}};
            }
        },
        p);
}

inline std::string dump_json(const nlohmann::ordered_json &j) { return j.dump(2) + "\n"; }

inline Observable make_observable(ObservableKind kind, int m) {
    return kind == ObservableKind::GlobalZ ? Observable::global_z(m) : Observable::local_z(m);
}

inline LightConeModel make_model(const ExperimentConfig &c, int m, ObservableKind obs) {
    return LightConeModel(build_standard_circuit(m, c.L, c.d), make_observable(obs, m), true,
                          c.dense_cap);
}

inline ParamVector initial_params(const ExperimentConfig &c, std::size_t p,
                                  std::uint64_t seed) {
    return c.init == "zero" ? ParamVector(p, 0.0) : random_params(p, derive_seed(seed, 1));
}

/// Explicit input if configured, else Uniform[-2pi, 2pi]^d from `seed`.
inline FeatureVector input_or_random(const std::optional<FeatureVector> &given,
                                     std::size_t d, std::uint64_t seed) {
    if (given) {
        return *given;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-kTwoPi, kTwoPi);
    FeatureVector x(d);
    for (double &v : x) {
        v = u(rng);
    }
    return x;
}

inline nlohmann::ordered_json base_metadata(const ExperimentConfig &c) {
    return {{"experiment", to_string(c.experiment)},
            {"seed", c.seed},
            {"rng", kRngName},
            {"L", c.L},
            {"d", c.d},
            {"observable", to_string(c.observable)}};
}

inline ExperimentResult run_eval(const ExperimentConfig &c) {
    const auto model = make_model(c, c.m, c.observable);
    const auto theta = initial_params(c, static_cast<std::size_t>(model.num_params()), c.seed);
    const auto x = input_or_random(c.x, static_cast<std::size_t>(c.d), derive_seed(c.seed, 0));
    auto j = base_metadata(c);
    j["m"] = c.m;
    j["init"] = c.init;
    j["num_params"] = model.num_params();
    j["max_cone_width"] = model.max_cone_width();
    j["x"] = x;
    j["value"] = model.eval(theta, x);
    return {{{"eval.json", dump_json(j)}}, j};
}

inline ExperimentResult run_kernel(const ExperimentConfig &c) {
    const auto model = make_model(c, c.m, c.observable);
    const auto theta = initial_params(c, static_cast<std::size_t>(model.num_params()), c.seed);
    const auto x = input_or_random(c.x, static_cast<std::size_t>(c.d), derive_seed(c.seed, 0));
    const auto x2 = input_or_random(c.x2, static_cast<std::size_t>(c.d), derive_seed(c.seed, 2));
    auto j = base_metadata(c);
    j["m"] = c.m;
    j["init"] = c.init;
    j["x"] = x;
    j["x2"] = x2;
    j["value"] = tangent_kernel(model, theta, x, x2);
    return {{{"kernel.json", dump_json(j)}}, j};
}

inline Dataset make_dataset(const ExperimentConfig &c, const LightConeModel &model,
                            std::uint64_t seed) {
    if (c.dataset.kind == "iris") {
        return load_iris(c.dataset.path, c.dataset.classes, c.dataset.feature_range);
    }
    const auto n = static_cast<std::size_t>(c.dataset.n);
    if (c.dataset.kind == "teacher") {
        return make_teacher_dataset(model, n, derive_seed(seed, 0));
    }
    return make_random_dataset(n, static_cast<std::size_t>(c.d), derive_seed(seed, 0));
}

inline std::string matrix_csv(const Eigen::MatrixXd &a) {
    std::ostringstream os;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        os << (j ? "," : "") << "k" << j;
    }
    os << '\n';
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            os << (j ? "," : "") << format_number(a(i, j));
        }
        os << '\n';
    }
    return os.str();
}

inline nlohmann::ordered_json spectrum_json(const GramMatrix &g, double threshold) {
    const Eigen::VectorXd ev = g.eigenvalues();
    return {{"n", g.size()},
            {"eigenvalues", std::vector<double>(ev.data(), ev.data() + ev.size())},
            {"min_eigenvalue", ev(0)},
            {"max_eigenvalue", ev(ev.size() - 1)},
            {"max_asymmetry", g.max_asymmetry()},
            {"rank_threshold", threshold},
            {"numerical_rank", g.numerical_rank(threshold)}};
}

inline ExperimentResult run_gram(const ExperimentConfig &c) {
    const auto model = make_model(c, c.m, c.observable);
    const auto theta = initial_params(c, static_cast<std::size_t>(model.num_params()), c.seed);
    const Dataset data = make_dataset(c, model, c.seed);
    const GramMatrix g = gram_matrix(model, theta, data.x);
    auto j = base_metadata(c);
    j["m"] = c.m;
    j["init"] = c.init;
    j["dataset"] = provenance_json(data.provenance);
    char fp[24];
    std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(g.fingerprint));
    j["fingerprint"] = fp;
    const auto spectrum = spectrum_json(g, c.rank_threshold);
    for (const auto &[k, v] : spectrum.items()) {
        j[k] = v;
    }
    return {{{"gram.csv", matrix_csv(g.entries)}, {"gram.json", dump_json(j)}}, j};
}

inline constexpr const char *kHistogramCsvHeader = "bin_left,bin_right,count";
inline constexpr const char *kSamplesCsvHeader = "sample,kernel";

/// Equal-width bins over [min, max]; the last bin is closed on the right.
inline std::string histogram_csv(std::span<const double> values, int bins) {
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double w = (hi - lo) / bins;
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        auto b = static_cast<long>((v - lo) / w);
        b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    std::ostringstream os;
    os << kHistogramCsvHeader << '\n';
    for (int b = 0; b < bins; ++b) {
        const double left = lo + w * b;
        const double right = b + 1 == bins ? hi : lo + w * (b + 1);
        os << format_number(left) << ',' << format_number(right) << ','
           << counts[static_cast<std::size_t>(b)] << '\n';
    }
    return os.str();
}

/**
 * Samples K_theta(x, x') over theta ~ Uniform[-2pi, 2pi]^p at fixed inputs.
 * Sample s uses its own derived seed, so results do not depend on the
 * worker count.
 */
inline std::vector<double> sample_kernels(const LightConeModel &model,
                                          std::span<const double> x,
                                          std::span<const double> x2, int samples,
                                          std::uint64_t seed) {
    const auto p = static_cast<std::size_t>(model.num_params());
    std::vector<double> k(static_cast<std::size_t>(samples));
    const std::uint64_t stream = derive_seed(seed, 3);
    parallel_for(k.size(), [&](std::size_t s) {
        const auto theta = random_params(p, derive_seed(stream, s));
        k[s] = tangent_kernel(model, theta, x, x2);
    });
    return k;
}

inline ExperimentResult run_concentration(const ExperimentConfig &c) {
    const auto x = input_or_random(c.x, static_cast<std::size_t>(c.d), derive_seed(c.seed, 0));
    const auto x2 = input_or_random(c.x2, static_cast<std::size_t>(c.d), derive_seed(c.seed, 2));
    ExperimentResult out;
    auto summary = base_metadata(c);
    summary["samples"] = c.samples;
    summary["x"] = x;
    summary["x2"] = x2;
    summary["runs"] = nlohmann::ordered_json::array();
    for (int m : c.qubit_counts()) {
        const auto model = make_model(c, m, c.observable);
        const auto k = sample_kernels(model, x, x2, c.samples, c.seed);
        double mean = 0.0;
        for (double v : k) {
            mean += v;
        }
        mean /= static_cast<double>(k.size());
        double var = 0.0;
        for (double v : k) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(k.size() - 1);
        const double sd = std::sqrt(var);
        const double se = sd / std::sqrt(static_cast<double>(k.size()));
        nlohmann::ordered_json run{{"m", m},
                                   {"empirical_mean", mean},
                                   {"standard_error", se},
                                   {"sample_std", sd}};
        const bool analytic = c.L == 2 && c.observable == ObservableKind::LocalZ;
        run["analytic_available"] = analytic;
        if (analytic) {
            const double a = analytic::analytic_mean_kernel(encode(x, m), encode(x2, m));
            run["analytic_mean"] = a;
            run["z_score"] = se > 0.0 ? std::abs(mean - a) / se
                                      : (mean == a ? 0.0 : std::numeric_limits<double>::infinity());
        }
        std::ostringstream samples;
        samples << kSamplesCsvHeader << '\n';
        for (std::size_t s = 0; s < k.size(); ++s) {
            samples << s << ',' << format_number(k[s]) << '\n';
        }
        const std::string stem = "concentration_m" + std::to_string(m);
        out.files.push_back({stem + "_samples.csv", samples.str()});
        out.files.push_back({stem + "_histogram.csv", histogram_csv(k, c.bins)});
        summary["runs"].push_back(std::move(run));
    }
    out.files.push_back({"concentration_summary.json", dump_json(summary)});
    out.summary = std::move(summary);
    return out;
}

/// Everything measured in one quantum-vs-linear run.
struct PairRun {
    std::vector<StepMetrics> metrics;
    CompareSummary summary;
    double max_param_step{0.0};
    GramMatrix gram0;
    Dataset data;
};

inline PairRun run_pair(const LightConeModel &model, const Dataset &data,
                        const ParamVector &theta0, double eta, std::size_t iterations,
                        std::size_t kernel_stride, std::uint64_t seed) {
    TrainOptions opt;
    opt.kernel_stride = kernel_stride;
    const auto q = train_quantum(model, data, theta0, eta, iterations, opt, seed);
    const auto lin_model = linearize(model, data, theta0);
    const auto lin = train_linear(lin_model, data, eta, iterations,
                                  model_metadata(model, "linear", eta, seed));
    PairRun r;
    r.metrics = compare_traces(q, lin);
    r.summary = summarize(r.metrics);
    r.max_param_step = max_param_step(q);
    r.gram0 = gram_from_jacobian(lin_model.features, dataset_fingerprint(data.x));
    r.data = data;
    return r;
}

inline nlohmann::ordered_json summary_json(const PairRun &r) {
    return {{"max_loss_gap", r.summary.max_loss_gap},
            {"max_delta", r.summary.max_delta},
            {"max_kernel_drift_max", r.summary.max_kernel_drift_max},
            {"max_kernel_drift_fro", r.summary.max_kernel_drift_fro},
            {"max_param_step", r.max_param_step},
            {"final_param_rel_change", r.summary.final_param_rel_change},
            {"final_loss_quantum", r.summary.final_loss_quantum},
            {"final_loss_linear", r.summary.final_loss_linear}};
}

/// Mean of each numeric field over replicate summaries.
inline nlohmann::ordered_json mean_summary(const std::vector<nlohmann::ordered_json> &rs) {
    nlohmann::ordered_json out;
    for (const auto &[key, value] : rs.front().items()) {
        double s = 0.0;
        for (const auto &r : rs) {
            s += r[key].get<double>();
        }
        out[key] = s / static_cast<double>(rs.size());
    }
    return out;
}

inline std::uint64_t replicate_seed(const ExperimentConfig &c, int r) {
    return c.replicates == 1 ? c.seed : derive_seed(c.seed, static_cast<std::uint64_t>(r));
}

inline void add_trace(ExperimentResult &out, const std::string &stem, const PairRun &run,
                      const ExperimentConfig &c, int m, ObservableKind obs,
                      std::uint64_t run_seed, int replicate) {
    std::ostringstream csv;
    write_trace_csv(csv, run.metrics);
    out.files.push_back({stem + ".csv", csv.str()});
    nlohmann::ordered_json meta{{"seed", run_seed},
                                {"base_seed", c.seed},
                                {"replicate", replicate},
                                {"rng", kRngName},
                                {"m", m},
                                {"L", c.L},
                                {"d", c.d},
                                {"eta", c.eta},
                                {"iterations", c.iterations},
                                {"observable", to_string(obs)},
                                {"init", c.init},
                                {"kernel_stride", c.kernel_stride},
                                {"n", run.data.size()},
                                {"dataset", provenance_json(run.data.provenance)}};
    out.files.push_back({stem + ".meta.json", dump_json(meta)});
}

inline ExperimentResult run_compare(const ExperimentConfig &c) {
    using K = ExperimentKind;
    if (c.experiment != K::Train && c.experiment != K::Compare && c.experiment != K::Iris &&
        c.experiment != K::GlobalCompare) {
        throw ConfigError("run_compare: not a training experiment");
    }
    validate_config(c);
    ExperimentResult out;
    auto summary = base_metadata(c);
    summary["eta"] = c.eta;
    summary["iterations"] = c.iterations;
    summary["replicates"] = c.replicates;
    const auto T = static_cast<std::size_t>(c.iterations);
    const auto stride = static_cast<std::size_t>(c.kernel_stride);
    std::optional<Dataset> iris;
    if (c.dataset.kind == "iris") {
        iris = load_iris(c.dataset.path, c.dataset.classes, c.dataset.feature_range);
    }

    if (c.experiment == K::GlobalCompare) {
        summary["m"] = c.m;
        summary.erase("observable");
        const auto local = make_model(c, c.m, ObservableKind::LocalZ);
        const auto global = make_model(c, c.m, ObservableKind::GlobalZ);
        std::vector<nlohmann::ordered_json> ls;
        std::vector<nlohmann::ordered_json> gs;
        nlohmann::ordered_json spectra = nlohmann::ordered_json::array();
        for (int r = 0; r < c.replicates; ++r) {
            const auto s = replicate_seed(c, r);
            const Dataset data = iris ? *iris : make_dataset(c, local, s);
            const auto theta0 = initial_params(c, static_cast<std::size_t>(local.num_params()), s);
            const auto lr = run_pair(local, data, theta0, c.eta, T, stride, s);
            const auto gr = run_pair(global, data, theta0, c.eta, T, stride, s);
            const std::string suffix = c.replicates == 1 ? "" : "_r" + std::to_string(r);
            add_trace(out, "trace_local_z" + suffix, lr, c, c.m, ObservableKind::LocalZ, s, r);
            add_trace(out, "trace_global_z" + suffix, gr, c, c.m, ObservableKind::GlobalZ, s, r);
            ls.push_back(summary_json(lr));
            gs.push_back(summary_json(gr));
            spectra.push_back({{"replicate", r},
                               {"local_z", spectrum_json(lr.gram0, c.rank_threshold)},
                               {"global_z", spectrum_json(gr.gram0, c.rank_threshold)}});
        }
        const auto lm = mean_summary(ls);
        const auto gm = mean_summary(gs);
        const double lgap = lm["max_loss_gap"].get<double>();
        const double ggap = gm["max_loss_gap"].get<double>();
        summary["local_z"] = lm;
        summary["global_z"] = gm;
        summary["gap_ratio"] = lgap > 0.0 ? ggap / lgap : std::numeric_limits<double>::infinity();
        summary["gram"] = spectra;
        out.files.push_back({"summary.json", dump_json(summary)});
        out.summary = std::move(summary);
        return out;
    }

    summary["runs"] = nlohmann::ordered_json::array();
    for (int m : c.qubit_counts()) {
        const auto model = make_model(c, m, c.observable);
        std::vector<nlohmann::ordered_json> reps;
        for (int r = 0; r < c.replicates; ++r) {
            const auto s = replicate_seed(c, r);
            const Dataset data = iris ? *iris : make_dataset(c, model, s);
            const auto theta0 = initial_params(c, static_cast<std::size_t>(model.num_params()), s);
            const auto run = run_pair(model, data, theta0, c.eta, T, stride, s);
            std::string stem = "trace_m" + std::to_string(m);
            if (c.replicates > 1) {
                stem += "_r" + std::to_string(r);
            }
            add_trace(out, stem, run, c, m, c.observable, s, r);
            reps.push_back(summary_json(run));
        }
        nlohmann::ordered_json entry{{"m", m}};
        const auto mean = mean_summary(reps);
        for (const auto &[k, v] : mean.items()) {
            entry[k] = v;
        }
        if (c.replicates > 1) {
            entry["per_replicate"] = reps;
        }
        summary["runs"].push_back(std::move(entry));
    }
    out.files.push_back({"summary.json", dump_json(summary)});
    out.summary = std::move(summary);
    return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig &c) {
    validate_config(c);
    switch (c.experiment) {
    case ExperimentKind::Eval:
        return run_eval(c);
    case ExperimentKind::Kernel:
        return run_kernel(c);
    case ExperimentKind::Gram:
        return run_gram(c);
    case ExperimentKind::Concentration:
        return run_concentration(c);
    default:
        return run_compare(c);
    }
}

/**
 * Writes every artifact into `dir`. Each file goes to a temporary name first;
 * if any write fails, the files already placed are removed again.
 */
inline void write_outputs(const ExperimentResult &result, const std::filesystem::path &dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<fs::path> placed;
    try {
        for (const auto &a : result.files) {
            const fs::path target = dir / a.name;
            const fs::path tmp = dir / (a.name + ".tmp");
            {
                std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
                os << a.content;
                os.close();
                if (!os) {
                    fs::remove(tmp);
                    throw Error("cannot write '" + target.string() + "'");
                }
            }
            fs::rename(tmp, target);
            placed.push_back(target);
        }
    } catch (...) {
        std::error_code ec;
        for (const auto &p : placed) {
            fs::remove(p, ec);
        }
        throw;
    }
}

} // namespace qlazy
