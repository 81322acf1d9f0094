#include "qmelt/io.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <stdexcept>

namespace qmelt::io {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::filesystem::path path, const std::vector<std::string>& header)
    : path_(std::move(path)), columns_(header.size()) {
    if (header.empty()) throw std::invalid_argument("csv: empty header");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += header[i];
    }
    buffer_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) throw std::invalid_argument("csv: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += format_double(values[i]);
    }
    buffer_ += '\n';
}

void CsvWriter::row_mixed(const std::vector<std::string>& values) {
    if (values.size() != columns_) throw std::invalid_argument("csv: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += values[i];
    }
    buffer_ += '\n';
}

std::filesystem::path CsvWriter::close() {
    if (closed_) return path_;
    std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("csv: cannot open " + path_.string());
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    out.flush();
    if (!out) throw std::runtime_error("csv: write failed for " + path_.string());
    closed_ = true;
    return path_;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hash: cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const auto n = static_cast<std::size_t>(in.gcount());
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

Manifest::Manifest(std::filesystem::path out_dir) : dir_(std::move(out_dir)) {
    run_["type"] = "run";
    run_["tool"] = "qmelt";
    run_["version"] = "0.1.0";
}

void Manifest::add_file(const std::filesystem::path& path) { files_.push_back(path); }

std::filesystem::path Manifest::write() {
    std::filesystem::create_directories(dir_);
    const auto manifest_path = dir_ / "manifest.ndjson";
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("manifest: cannot open " + manifest_path.string());
    out << run_.dump() << '\n';
    for (const auto& f : files_) {
        nlohmann::json line;
        line["type"] = "file";
        line["path"] = std::filesystem::relative(f, dir_).string();
        line["bytes"] = std::filesystem::file_size(f);
        line["fnv1a64"] = hash_file_hex(f);
        out << line.dump() << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error("manifest: write failed");
    return manifest_path;
}

}  // namespace qmelt::io
