// io.hpp — Deterministic CSV emission, NDJSON manifests, and content hashing.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace qmelt::io {

// Shortest round-trip decimal representation; byte-stable across runs.
std::string format_double(double v);

class CsvWriter {
public:
    CsvWriter(std::filesystem::path path, const std::vector<std::string>& header);

    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& values);
    // flushes and closes; returns the path
    std::filesystem::path close();

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::string buffer_;
    std::size_t columns_ = 0;
    bool closed_ = false;
};

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hash_file_hex(const std::filesystem::path& path);

// Run manifest: one run line plus one line per emitted file, written last so
// the hashes cover final contents.
class Manifest {
public:
    explicit Manifest(std::filesystem::path out_dir);

    nlohmann::json& run() { return run_; }
    void add_file(const std::filesystem::path& path);
    // writes manifest.ndjson inside the output directory
    std::filesystem::path write();

private:
    std::filesystem::path dir_;
    nlohmann::json run_;
    std::vector<std::filesystem::path> files_;
};

}  // namespace qmelt::io
