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
//
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and protocols are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlazy/analytic.hpp"
#include "qlazy/experiments.hpp"

namespace {

using namespace qlazy;
namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kPi = std::numbers::pi;

// Criterion 1.
constexpr double kOracleTol = 1e-10;
constexpr int kOracleDraws = 100;
// Criterion 2.
constexpr double kShiftTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr int kShiftConfigs = 50;
// Criterion 3.
constexpr double kClosedFormTol = 1e-10;
constexpr double kIdentityTol = 1e-12;
// Criterion 4.
constexpr double kMaxZScore = 3.0;
// Criteria 5 and 6: seed 1, 20 derived replicate seeds per width.
constexpr int kLazyReplicates = 20;
constexpr double kLossGapAtWidest = 0.05;
// Criterion 7.
constexpr double kClosedFormEta = 1e-3;
constexpr double kRelOutputTol = 1e-3;
constexpr double kResidualTol = 1e-6;
// Criterion 8.
constexpr double kGlobalGapRatio = 10.0;
// Criterion 9.
constexpr double kIrisFinalLoss = 0.1;
constexpr double kIrisLossGap = 0.05;
// Criterion 10.
constexpr double kAsymmetryTol = 1e-12;
constexpr double kMinEigenTol = -1e-8;
constexpr double kSparsityTol = 1e-8;

struct Outcome {
    bool pass;
    std::string detail;
};

std::vector<double> uniform(std::size_t n, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-2 * kPi, 2 * kPi);
    std::vector<double> v(n);
    for (double &e : v) {
        e = u(rng);
    }
    return v;
}

std::vector<double> fd_gradient(const Circuit &c, std::vector<double> theta,
                                const std::vector<double> &x, const Observable &obs) {
    std::vector<double> g(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double t = theta[j];
        theta[j] = t + kFdStep;
        const double fp = eval_model_dense(c, theta, x, obs);
        theta[j] = t - kFdStep;
        const double fm = eval_model_dense(c, theta, x, obs);
        theta[j] = t;
        g[j] = (fp - fm) / (2 * kFdStep);
    }
    return g;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

json load_config(const std::string &name) {
    json doc = read_config_document(std::string(QLAZY_SOURCE_DIR) + "/configs/" + name);
    if (doc.contains("dataset") && doc["dataset"].contains("path")) {
        doc["dataset"]["path"] =
            std::string(QLAZY_SOURCE_DIR) + "/" + doc["dataset"]["path"].get<std::string>();
    }
    return doc;
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int m : {4, 6, 8, 10}) {
        for (int L : {1, 2, 3}) {
            const Circuit c = build_standard_circuit(m, L, 4);
            const Observable obs = Observable::local_z(m);
            const LightConeModel model(c, obs);
            for (int s = 0; s < kOracleDraws; ++s) {
                const auto theta = uniform(static_cast<std::size_t>(L * m), rng);
                const auto x = uniform(4, rng);
                worst = std::max(worst, std::abs(model.eval(theta, x) -
                                                 eval_model_dense(c, theta, x, obs)));
            }
        }
    }
    return {worst <= kOracleTol, "max |cone - dense| = " + fmt(worst)};
}

Outcome gradient_exactness() {
    std::mt19937_64 rng(102);
    double worst = 0.0;
    for (int cfg = 0; cfg < kShiftConfigs; ++cfg) {
        const int m = 4 + cfg % 5;
        const int L = 1 + cfg % 3;
        const Circuit c = build_standard_circuit(m, L, 3);
        const Observable obs = Observable::local_z(m);
        const auto theta = uniform(static_cast<std::size_t>(L * m), rng);
        const auto x = uniform(3, rng);
        const auto ps = gradient(LightConeModel(c, obs), theta, x);
        const auto fd = fd_gradient(c, theta, x, obs);
        for (std::size_t j = 0; j < fd.size(); ++j) {
            worst = std::max(worst, std::abs(ps.values[j] - fd[j]));
        }
    }
    return {worst <= kShiftTol, "max |shift - fd| = " + fmt(worst)};
}

Outcome closed_forms() {
    std::mt19937_64 rng(103);
    const int m = 8;
    const LightConeModel model(build_standard_circuit(m, 2, 4), Observable::local_z(m));
    double worst_fk = 0.0;
    double worst_id = 0.0;
    for (int s = 0; s < 100; ++s) {
        const auto theta = uniform(16, rng);
        const auto x = uniform(4, rng);
        const auto x2 = uniform(4, rng);
        const auto xhat = encode(x, m);
        const auto xhat2 = encode(x2, m);
        double sum = 0.0;
        for (std::size_t k = 0; k < 8; ++k) {
            worst_fk = std::max(worst_fk, std::abs(analytic::analytic_fk(theta, xhat, k) -
                                                   model.eval_term(theta, x, k)));
            for (double e : analytic::analytic_gradient_expectations(xhat, xhat2, k)) {
                sum += e;
            }
        }
        worst_id = std::max(worst_id, std::abs(sum / m - analytic::analytic_mean_kernel(xhat, xhat2)));
    }
    return {worst_fk <= kClosedFormTol && worst_id <= kIdentityTol,
            "max f_k error = " + fmt(worst_fk) + ", identity error = " + fmt(worst_id)};
}

Outcome concentration() {
    const auto r = run_experiment(parse_config(load_config("concentration.json")));
    std::vector<double> sds;
    double z20 = -1.0;
    std::string detail;
    for (const auto &run : r.summary["runs"]) {
        sds.push_back(run["sample_std"].get<double>());
        if (run["m"] == 20) {
            z20 = run["z_score"].get<double>();
            detail = "m=20 mean " + fmt(run["empirical_mean"].get<double>()) + " vs " +
                     fmt(run["analytic_mean"].get<double>()) + " (z = " + fmt(z20) + ")";
        }
    }
    const bool decreasing = sds.size() == 3 && sds[0] > sds[1] && sds[1] > sds[2];
    detail += ", std " + fmt(sds.at(0)) + " > " + fmt(sds.at(1)) + " > " + fmt(sds.at(2));
    return {z20 >= 0.0 && z20 <= kMaxZScore && decreasing, detail};
}

json laziness_runs() {
    json doc = load_config("laziness_sweep.json");
    doc["m_sweep"] = {10, 30, 100};
    doc["replicates"] = kLazyReplicates;
    return run_experiment(parse_config(doc)).summary["runs"];
}

Outcome laziness(const json &runs) {
    std::vector<double> rel;
    for (const auto &r : runs) {
        rel.push_back(r["final_param_rel_change"].get<double>());
    }
    return {rel[0] > rel[1] && rel[1] > rel[2],
            "mean relative change " + fmt(rel[0]) + " > " + fmt(rel[1]) + " > " + fmt(rel[2])};
}

Outcome agreement(const json &runs) {
    std::vector<double> gap;
    for (const auto &r : runs) {
        gap.push_back(r["max_loss_gap"].get<double>());
    }
    return {gap[0] > gap[1] && gap[1] > gap[2] && gap[2] <= kLossGapAtWidest,
            "mean max loss gap " + fmt(gap[0]) + " > " + fmt(gap[1]) + " > " + fmt(gap[2])};
}

Outcome linear_closed_form() {
    // Random data: descent at eta = 1e-3 against the flow at t = eta * step.
    const int m = 10;
    const LightConeModel model(build_standard_circuit(m, 2, 4), Observable::local_z(m));
    const Dataset data = make_random_dataset(10, 4, derive_seed(1, 0));
    const LinearizedModel lin = linearize(model, data, random_params(20, derive_seed(1, 1)));
    constexpr std::size_t kSteps = 5000;
    const auto trace = train_linear(lin, data, kClosedFormEta, kSteps);
    double worst_rel = 0.0;
    for (std::size_t t = 0; t <= kSteps; t += 250) {
        const auto f = closed_form_linear_outputs(lin, data, kClosedFormEta * double(t));
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            num += (trace.outputs[t][i] - f[i]) * (trace.outputs[t][i] - f[i]);
            den += f[i] * f[i];
        }
        worst_rel = std::max(worst_rel, std::sqrt(num / den));
    }

    // Teacher data with full-rank Gram: descent on the linear model.
    const int mt = 20;
    const LightConeModel teacher_model(build_standard_circuit(mt, 2, 4), Observable::local_z(mt));
    const Dataset teacher = make_teacher_dataset(teacher_model, 6, derive_seed(1, 0));
    const LinearizedModel tl = linearize(teacher_model, teacher, random_params(40, derive_seed(1, 1)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tl.gram());
    const double lmin = es.eigenvalues()(0);
    const double lmax = es.eigenvalues()(es.eigenvalues().size() - 1);
    const double n = static_cast<double>(teacher.size());
    const double eta = n / lmax;
    const auto steps = static_cast<std::size_t>(std::ceil(40.0 * lmax / lmin));
    const auto tt = train_linear(tl, teacher, eta, steps);
    double residual = 0.0;
    for (std::size_t i = 0; i < teacher.size(); ++i) {
        residual += std::pow(tt.outputs.back()[i] - teacher.y[i], 2);
    }
    residual = std::sqrt(residual);
    return {worst_rel <= kRelOutputTol && lmin > 0.0 && residual < kResidualTol,
            "max relative output error " + fmt(worst_rel) + "; teacher residual " +
                fmt(residual) + " after " + std::to_string(steps) + " steps (lambda_min " +
                fmt(lmin) + ")"};
}

Outcome global_counterexample() {
    const auto r = run_experiment(parse_config(load_config("global_compare.json")));
    const double ratio = r.summary["gap_ratio"].get<double>();
    const auto &g = r.summary["gram"][0];
    const int n = g["local_z"]["n"].get<int>();
    const int local_rank = g["local_z"]["numerical_rank"].get<int>();
    const int global_rank = g["global_z"]["numerical_rank"].get<int>();
    const bool pass = ratio >= kGlobalGapRatio && global_rank < n && local_rank == n;
    return {pass, "gap ratio global/local = " + fmt(ratio) + ", rank local " +
                      std::to_string(local_rank) + "/" + std::to_string(n) + ", global " +
                      std::to_string(global_rank) + "/" + std::to_string(n) +
                      " (threshold " + fmt(g["local_z"]["rank_threshold"].get<double>()) + ")"};
}

Outcome iris() {
    const auto r = run_experiment(parse_config(load_config("iris.json")));
    const auto &run = r.summary["runs"][0];
    const double final_loss = run["final_loss_quantum"].get<double>();
    const double gap = run["max_loss_gap"].get<double>();
    return {final_loss <= kIrisFinalLoss && gap <= kIrisLossGap,
            "final loss " + fmt(final_loss) + ", max loss gap " + fmt(gap)};
}

Outcome structural() {
    std::mt19937_64 rng(110);
    double worst_asym = 0.0;
    double worst_min = 1e300;
    for (int cfg = 0; cfg < 20; ++cfg) {
        const int m = 4 + cfg;
        const int L = 1 + cfg % 3;
        const LightConeModel model(build_standard_circuit(m, L, 4), Observable::local_z(m));
        std::vector<FeatureVector> xs;
        for (int i = 0; i < 6 + cfg % 5; ++i) {
            xs.push_back(uniform(4, rng));
        }
        const auto g = gram_matrix(model, uniform(static_cast<std::size_t>(L * m), rng), xs);
        worst_asym = std::max(worst_asym, g.max_asymmetry());
        worst_min = std::min(worst_min, g.min_eigenvalue());
    }

    // Observables on a few qubits leave most parameters outside the cones.
    double worst_outside = 0.0;
    for (int cfg = 0; cfg < 6; ++cfg) {
        const int m = 8 + cfg % 3;
        const int L = 1 + cfg % 2;
        const Circuit c = build_standard_circuit(m, L, 3);
        const Observable obs({PauliTerm{{cfg % m}, "Z", 1.0},
                              PauliTerm{{(cfg + 4) % m, (cfg + 5) % m}, "XZ", 0.5}},
                             1.0);
        const auto theta = uniform(static_cast<std::size_t>(L * m), rng);
        const auto x = uniform(3, rng);
        const auto ps = gradient(LightConeModel(c, obs), theta, x);
        const auto fd = fd_gradient(c, theta, x, obs);
        for (std::size_t j = 0; j < fd.size(); ++j) {
            if (!std::binary_search(ps.support.begin(), ps.support.end(), static_cast<int>(j))) {
                worst_outside = std::max({worst_outside, std::abs(fd[j]), std::abs(ps.values[j])});
            }
        }
    }

    // Two full runs through the file writer must match byte for byte.
    const json doc{{"experiment", "compare"}, {"m_sweep", {8, 12}}, {"iterations", 20},
                   {"replicates", 2}, {"dataset", {{"n", 6}}}};
    const fs::path base = fs::temp_directory_path() / "qlazy_acceptance_determinism";
    fs::remove_all(base);
    std::vector<std::string> names;
    for (const char *sub : {"a", "b"}) {
        const auto r = run_experiment(parse_config(doc));
        write_outputs(r, base / sub);
        if (names.empty()) {
            for (const auto &f : r.files) {
                names.push_back(f.name);
            }
        }
    }
    auto slurp = [](const fs::path &p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    bool identical = !names.empty();
    for (const auto &name : names) {
        identical = identical && slurp(base / "a" / name) == slurp(base / "b" / name);
    }
    fs::remove_all(base);

    const bool pass = worst_asym <= kAsymmetryTol && worst_min >= kMinEigenTol &&
                      worst_outside <= kSparsityTol && identical;
    return {pass, "asymmetry " + fmt(worst_asym) + ", min eigenvalue " + fmt(worst_min) +
                      ", outside-cone gradient " + fmt(worst_outside) + ", " +
                      std::to_string(names.size()) + " files " +
                      (identical ? "byte-identical" : "DIFFER")};
}

} // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    json lazy_runs;
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"gradient exactness", gradient_exactness},
        {"closed forms", closed_forms},
        {"concentration", concentration},
        {"laziness",
         [&] {
             lazy_runs = laziness_runs();
             return laziness(lazy_runs);
         }},
        {"quantum/linear agreement", [&] { return agreement(lazy_runs); }},
        {"linear closed form", linear_closed_form},
        {"global-observable counterexample", global_counterexample},
        {"iris", iris},
        {"structural suites", structural},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        std::printf("criterion %zu %s: %s (%s; %.1fs)\n", i + 1, criteria[i].first,
                    o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed == 0 ? 0 : 1;
}
