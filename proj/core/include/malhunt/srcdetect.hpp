#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>

namespace malhunt::srcdetect {

struct SourceDetectConfig {
    /// A repository is source iff its source-file ratio is strictly greater.
    double threshold = 0.75;
    /// Lowercase extensions without the dot.
    std::set<std::string, std::less<>> extension_whitelist;

    /// Assembly, C/C++, Batch, shell, PowerShell, Java, Python, C#,
    /// Objective-C/Matlab (.m), Pascal, Visual Basic, PHP, JavaScript, Go.
    static SourceDetectConfig defaults();

    /// key=value lines: `threshold=0.8`, `extensions=c,h,py`. '#' starts a comment.
    /// Unspecified keys keep their defaults. Throws ValidationError.
    static SourceDetectConfig parse(std::string_view text);
    static SourceDetectConfig load(const std::filesystem::path& path);

    void validate() const;
};

struct SourceVerdict {
    bool is_source = false;
    double source_ratio = 0.0;
    std::size_t source_file_count = 0;
    std::size_t total_file_count = 0;
};

/// Extension after the last '.' of the final path component, lowercased.
/// Empty for extensionless names and dotfiles such as ".bashrc".
std::string file_extension(std::string_view path);

bool classify_file(std::string_view path, const SourceDetectConfig& config);

/// Paths ending in '/' are directory entries and are not counted.
SourceVerdict detect(std::span<const std::string> repo_files, const SourceDetectConfig& config);

}  // namespace malhunt::srcdetect
