// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fgs {

/// Hex SHA-1 of "blob <size>\0" followed by the bytes, as git hashes files.
std::string git_blob_hash(std::span<const std::uint8_t> bytes);

/// Blob hash for a file; for a directory, the SHA-1 of sorted
/// "<relative path> <blob hash>\n" lines over all regular files below it.
std::string content_hash(const std::filesystem::path &path);

struct RunManifest {
    std::string command;
    std::vector<std::string> arguments;
    std::string config_text;
    std::uint64_t seed = 0;
    std::vector<std::filesystem::path> inputs;
};

/// Writes manifest.json into `run_dir` (created if needed).
void write_manifest(const std::filesystem::path &run_dir, const RunManifest &manifest);

} // namespace fgs
