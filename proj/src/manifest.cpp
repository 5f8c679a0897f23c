// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/manifest.hpp"

#include "fgs/errors.hpp"

#include <json.hpp>
#include <openssl/sha.h>

#include <algorithm>
#include <fstream>
#include <iterator>

namespace fgs {

namespace {

std::string to_hex(const unsigned char *digest, size_t n) {
    static const char *digits = "0123456789abcdef";
    std::string out;
    for (size_t i = 0; i < n; ++i) {
        out.push_back(digits[digest[i] >> 4]);
        out.push_back(digits[digest[i] & 15]);
    }
    return out;
}

std::string sha1_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(bytes.data(), bytes.size(), digest);
    return to_hex(digest, SHA_DIGEST_LENGTH);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace

std::string git_blob_hash(std::span<const std::uint8_t> bytes) {
    const std::string header = "blob " + std::to_string(bytes.size());
    std::vector<std::uint8_t> buf(header.begin(), header.end());
    buf.push_back(0);
    buf.insert(buf.end(), bytes.begin(), bytes.end());
    return sha1_hex(buf);
}

std::string content_hash(const std::filesystem::path &path) {
    if (std::filesystem::is_regular_file(path)) {
        return git_blob_hash(read_file(path));
    }
    if (!std::filesystem::is_directory(path)) {
        throw DataError("input not found: " + path.string());
    }
    std::vector<std::string> lines;
    for (const auto &entry : std::filesystem::recursive_directory_iterator(path)) {
        if (entry.is_regular_file()) {
            lines.push_back(std::filesystem::relative(entry.path(), path).generic_string() + " " +
                            git_blob_hash(read_file(entry.path())) + "\n");
        }
    }
    std::sort(lines.begin(), lines.end());
    std::string all;
    for (const auto &l : lines) {
        all += l;
    }
    return sha1_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t *>(all.data()), all.size()));
}

void write_manifest(const std::filesystem::path &run_dir, const RunManifest &m) {
    std::filesystem::create_directories(run_dir);
    nlohmann::json j;
    j["command"]   = m.command;
    j["arguments"] = m.arguments;
    j["seed"]      = m.seed;
    j["config"]    = m.config_text;
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto &p : m.inputs) {
        inputs.push_back({{"path", p.string()}, {"sha1", content_hash(p)}});
    }
    j["inputs"] = std::move(inputs);
    std::ofstream f(run_dir / "manifest.json");
    if (!f) {
        throw DataError("cannot write manifest in " + run_dir.string());
    }
    f << j.dump(2) << '\n';
}

} // namespace fgs
