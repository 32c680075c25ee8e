// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

// uapforge: train surrogates, craft universal perturbations, evaluate and
// sweep them from one JSON run configuration.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uapforge/commands.hpp"
#include "uapforge/config.hpp"

namespace {

struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<std::string> out_dir;
    std::optional<std::string> precision;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("-c,--config", f.config_file, "run configuration (JSON)");
    cmd->add_option("--set", f.sets, "override a config key, e.g. --set attack.rho=2 (repeatable)");
    cmd->add_option("--seed", f.seed, "top-level seed");
    cmd->add_option("--variant", f.variant, "attack preset: dm-uap, spgd, data-maximin, param-maximin");
    cmd->add_option("-o,--out", f.out_dir, "output directory");
    cmd->add_option("--precision", f.precision, "f32 or f64");
    cmd->add_option("--threads", f.threads, "evaluation threads");
}

uapforge::RunConfig resolve(const CommonFlags& f) {
    uapforge::Overrides flags;
    for (const auto& s : f.sets) flags.push_back(uapforge::parse_override(s));
    if (f.seed) flags.emplace_back("seed", *f.seed);
    if (f.variant) flags.emplace_back("attack.variant", *f.variant);
    if (f.out_dir) flags.emplace_back("output.directory", *f.out_dir);
    if (f.precision) flags.emplace_back("precision", *f.precision);
    if (f.threads) flags.emplace_back("eval.threads", *f.threads);
    std::optional<std::filesystem::path> file;
    if (!f.config_file.empty()) file = f.config_file;
    return uapforge::load_run_config(file, uapforge::env_overrides_from_process(), flags);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"universal adversarial perturbation crafting and evaluation"};
    app.require_subcommand(1);

    CommonFlags train_f, craft_f, eval_f, ablate_f;
    auto* train = app.add_subcommand("train", "train the configured models and write checkpoints");
    add_common(train, train_f);
    auto* craft = app.add_subcommand("craft", "craft a perturbation against the surrogate model(s)");
    add_common(craft, craft_f);
    auto* eval = app.add_subcommand("eval", "fooling ratios of perturbations on target models");
    add_common(eval, eval_f);
    auto* ablate = app.add_subcommand("ablate", "sweep one attack setting, craft and evaluate per value");
    add_common(ablate, ablate_f);

    std::string artifact;
    bool rederive = false;
    auto* verify = app.add_subcommand("verify", "check an artifact's content hash against its metadata");
    verify->add_option("artifact", artifact, "path to a .uapt checkpoint or perturbation")->required();
    verify->add_flag("--rederive", rederive, "rebuild the artifact from its embedded config and compare");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : uapforge::kExitConfig;
    }

    return uapforge::run_guarded(
        [&]() -> int {
            if (*train) return uapforge::cmd_train(resolve(train_f), std::cout);
            if (*craft) return uapforge::cmd_craft(resolve(craft_f), std::cout);
            if (*eval) return uapforge::cmd_eval(resolve(eval_f), std::cout);
            if (*ablate) return uapforge::cmd_ablate(resolve(ablate_f), std::cout);
            return uapforge::cmd_verify(artifact, rederive, std::cout);
        },
        std::cerr);
}
