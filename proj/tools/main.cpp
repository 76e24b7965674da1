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
// qlazy <verb> [--config FILE] [--seed N] [--out DIR] [--key value ...]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qlazy/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string one_line(std::string s) {
    for (char &c : s) {
        if (c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    return s;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Light-cone simulation and lazy-training experiments for local "
                 "parameterized circuits"};
    app.allow_extras();
    std::string verb;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int workers = 0;
    app.add_option("verb", verb,
                   "eval | kernel | gram | concentration | train | compare | "
                   "global-compare | iris")
        ->required();
    app.add_option("--config", config_path, "JSON experiment configuration");
    app.add_option("--seed", seed, "Override the master seed");
    app.add_option("--out", out_dir, "Override output_dir");
    app.add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");
    app.footer("Any other --key value pair overrides that config key; dotted keys\n"
               "such as --dataset.n 20 reach nested fields.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    qlazy::ExperimentConfig config;
    try {
        nlohmann::json doc = config_path.empty() ? nlohmann::json::object()
                                                 : qlazy::read_config_document(config_path);
        const std::vector<std::string> extras = app.remaining();
        for (std::size_t i = 0; i < extras.size(); ++i) {
            const std::string &flag = extras[i];
            if (flag.rfind("--", 0) != 0 || flag.size() == 2) {
                throw qlazy::ConfigError("unexpected argument '" + flag + "'");
            }
            std::string key = flag.substr(2);
            std::string value;
            if (const auto eq = key.find('='); eq != std::string::npos) {
                value = key.substr(eq + 1);
                key.resize(eq);
            } else if (i + 1 < extras.size()) {
                value = extras[++i];
            } else {
                throw qlazy::ConfigError("option '" + flag + "' needs a value");
            }
            qlazy::apply_override(doc, key, value);
        }
        doc["experiment"] = verb;
        if (seed) {
            doc["seed"] = *seed;
        }
        if (!out_dir.empty()) {
            doc["output_dir"] = out_dir;
        }
        if (workers < 0) {
            throw qlazy::ConfigError("--workers must be non-negative");
        }
        config = qlazy::parse_config(doc);
    } catch (const qlazy::ConfigError &e) {
        std::cerr << "qlazy: " << one_line(e.what()) << '\n';
        return kExitConfig;
    }

    try {
        qlazy::parallel_workers() = static_cast<unsigned>(workers);
        const auto result = qlazy::run_experiment(config);
        qlazy::write_outputs(result, config.output_dir);
        std::cout << result.summary.dump(2) << '\n';
    } catch (const qlazy::ConfigError &e) {
        std::cerr << "qlazy: " << one_line(e.what()) << '\n';
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "qlazy: " << one_line(e.what()) << '\n';
        return kExitRuntime;
    }
    return 0;
}
