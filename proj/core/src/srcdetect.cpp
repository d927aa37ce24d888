#include "malhunt/srcdetect.hpp"

#include "malhunt/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace malhunt::srcdetect {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

}  // namespace

SourceDetectConfig SourceDetectConfig::defaults() {
    SourceDetectConfig cfg;
    cfg.extension_whitelist = {"asm", "s",  "c",  "h",   "cpp", "hpp", "cc", "bat", "sh", "ps1",
                               "java", "py", "cs", "m", "pas", "vb",  "php", "js", "go"};
    return cfg;
}

void SourceDetectConfig::validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ValidationError("threshold must be in (0, 1], got " + std::to_string(threshold));
    }
    if (extension_whitelist.empty()) throw ValidationError("extension whitelist is empty");
}

SourceDetectConfig SourceDetectConfig::parse(std::string_view text) {
    auto cfg = defaults();
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected key=value");
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key == "threshold") {
            double t = 0.0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), t);
            if (ec != std::errc{} || ptr != value.data() + value.size()) {
                throw ValidationError("line " + std::to_string(line_no) + ": threshold is not a number");
            }
            cfg.threshold = t;
        } else if (key == "extensions") {
            cfg.extension_whitelist.clear();
            std::size_t start = 0;
            while (start <= value.size()) {
                auto comma = value.find(',', start);
                auto item = trim(value.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                       : comma - start));
                while (!item.empty() && item.front() == '.') item.remove_prefix(1);
                if (!item.empty()) cfg.extension_whitelist.insert(lower(item));
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
        } else {
            throw ValidationError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
    }
    cfg.validate();
    return cfg;
}

SourceDetectConfig SourceDetectConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string file_extension(std::string_view path) {
    auto slash = path.find_last_of("/\\");
    auto name = slash == std::string_view::npos ? path : path.substr(slash + 1);
    auto dot = name.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == name.size()) return {};
    return lower(name.substr(dot + 1));
}

bool classify_file(std::string_view path, const SourceDetectConfig& config) {
    auto ext = file_extension(path);
    return !ext.empty() && config.extension_whitelist.contains(ext);
}

SourceVerdict detect(std::span<const std::string> repo_files, const SourceDetectConfig& config) {
    SourceVerdict v;
    for (const auto& path : repo_files) {
        if (path.empty() || path.back() == '/') continue;
        ++v.total_file_count;
        if (classify_file(path, config)) ++v.source_file_count;
    }
    if (v.total_file_count > 0) {
        v.source_ratio = static_cast<double>(v.source_file_count) / static_cast<double>(v.total_file_count);
    }
    v.is_source = v.total_file_count > 0 && v.source_ratio > config.threshold;
    return v;
}

}  // namespace malhunt::srcdetect
