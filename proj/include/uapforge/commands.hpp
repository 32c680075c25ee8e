// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "uapforge/config.hpp"

namespace uapforge {

/// Process exit codes. Stable across releases.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // anything not covered below, including verify mismatches
    kExitConfig = 2,
    kExitDivergence = 3,
    kExitNumeric = 4,
    kExitMissingArtifact = 5,
};

/// Runs `body`, printing any library error to `err` and mapping it to an
/// exit code: ConfigError 2, DivergenceError 3, NumericError 4,
/// MissingFileError 5, everything else 1.
int run_guarded(const std::function<int()>& body, std::ostream& err);

/// out/checkpoints, out/deltas, out/reports under the configured directory.
struct OutputTree {
    std::filesystem::path root;
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path deltas() const { return root / "deltas"; }
    std::filesystem::path reports() const { return root / "reports"; }
};

/// Name -> file path through the "<name>.ref" pointer written next to
/// content-hashed files. Throws MissingFileError naming the expected path.
std::filesystem::path resolve_ref(const std::filesystem::path& dir, const std::string& name);

/// Train every configured model, write checkpoints, print accuracies.
int cmd_train(const RunConfig& config, std::ostream& out);

/// Craft one perturbation against the surrogate model(s).
int cmd_craft(const RunConfig& config, std::ostream& out);

/// Fooling ratios of the configured perturbations on the target models.
int cmd_eval(const RunConfig& config, std::ostream& out);

/// One craft + eval per sweep value (averaged over the sweep seeds).
int cmd_ablate(const RunConfig& config, std::ostream& out);

/// Recompute the content hash of an artifact and compare with its metadata.
/// With `rederive`, also rebuild the artifact from its embedded config and
/// compare the rebuilt hash.
int cmd_verify(const std::filesystem::path& artifact, bool rederive, std::ostream& out);

}  // namespace uapforge
