// Copyright 2026 The qwdqpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qwdqpt command-line front end.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qwdqpt/cli.hpp"

namespace {

using qwdqpt::cli::Command;
using qwdqpt::cli::RunConfig;

struct Flags {
    std::string config;
    std::string out;
    std::string figure;
    std::vector<std::string> sets;
    long long seed = -1;
    long long threads = -1;
    long long kpoints = -1;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "key=value or JSON config file");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--seed", f.seed, "Monte Carlo seed");
    sub->add_option("--threads", f.threads, "worker threads");
    sub->add_option("--kpoints", f.kpoints, "momentum grid points");
    sub->add_option("--set", f.sets, "extra key=value setting (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum-walk DQPT simulator"};
    app.set_version_flag("--version", std::string(qwdqpt::cli::kVersion));
    app.require_subcommand(1);
    Flags f;
    const std::vector<Command> commands{Command::phase_diagram, Command::quench, Command::dtop, Command::error_mc,
                                        Command::reproduce_figure};
    const char* const descriptions[] = {"winding and PT status over a (theta1, theta2) grid",
                                        "Loschmidt amplitude, rate function and DQPT analysis",
                                        "dynamical topological order parameter traces",
                                        "Monte Carlo error bars for the emulated measurement",
                                        "data and SVG for one figure preset"};
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        const auto c = commands[i];
        auto* sub = app.add_subcommand(std::string(qwdqpt::cli::to_string(c)), descriptions[i]);
        add_common(sub, f);
        if (c == Command::reproduce_figure) sub->add_option("--figure", f.figure, "figure id")->required();
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error code=" << qwdqpt::cli::exit_config << " kind=config message=\"" << e.what() << "\"\n";
        return qwdqpt::cli::exit_config;
    }

    RunConfig cfg;
    try {
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) cfg.command = commands[i];
        if (!f.config.empty()) qwdqpt::cli::apply_config_file(cfg, f.config);
        // Flags override the file; the subcommand always wins.
        for (const auto& s : f.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw qwdqpt::cli::ConfigError("--set expects key=value, got '" + s + "'");
            qwdqpt::cli::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) cfg.command = commands[i];
        if (!f.out.empty()) cfg.out_dir = f.out;
        if (!f.figure.empty()) cfg.figure = f.figure;
        if (f.seed >= 0) cfg.error.seed = static_cast<std::uint64_t>(f.seed);
        if (f.threads >= 0) cfg.threads = static_cast<std::size_t>(f.threads);
        if (f.kpoints >= 0) cfg.kpoints = static_cast<std::size_t>(f.kpoints);
    } catch (const qwdqpt::cli::ConfigError& e) {
        std::cerr << "error code=" << qwdqpt::cli::exit_config << " kind=config message=\"" << e.what() << "\"\n";
        return qwdqpt::cli::exit_config;
    }
    return qwdqpt::cli::execute(cfg, std::cout, std::cerr);
}
