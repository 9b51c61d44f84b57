// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cogr/error.hpp"

namespace cogr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitGradcheck = 5;

int exit_code_for(ErrorCode code);

/// Written to <out>/manifest.json before training starts and rewritten with
/// the end time once it finishes.
struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string revision;
    std::string started_at;
    std::string finished_at;  ///< empty while the run is in progress
    std::vector<std::string> outputs;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Build revision baked in at configure time ("unknown" outside a checkout).
const char* build_revision();

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cogr
