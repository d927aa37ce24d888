#include "malhunt/errors.hpp"
#include "malhunt/srcdetect.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace malhunt;
using namespace malhunt::srcdetect;

TEST(SourceDetect, ClassifyFile) {
    const auto cfg = SourceDetectConfig::defaults();
    EXPECT_TRUE(classify_file("src/bot.c", cfg));
    EXPECT_FALSE(classify_file("README.md", cfg));
    EXPECT_TRUE(classify_file("LOADER.PY", cfg));
    EXPECT_TRUE(classify_file("a/b/payload.Ps1", cfg));
    EXPECT_TRUE(classify_file("x.m", cfg));
    EXPECT_FALSE(classify_file("Makefile", cfg));
    EXPECT_FALSE(classify_file(".bashrc", cfg));
    EXPECT_FALSE(classify_file("dir.c/notes", cfg));
    EXPECT_FALSE(classify_file("archive.c.zip", cfg));
}

TEST(SourceDetect, FileExtension) {
    EXPECT_EQ(file_extension("a/b/C.TAR.GZ"), "gz");
    EXPECT_EQ(file_extension("noext"), "");
    EXPECT_EQ(file_extension(".gitignore"), "");
    EXPECT_EQ(file_extension("trailingdot."), "");
}

TEST(SourceDetect, StrictThresholdBoundary) {
    const auto cfg = SourceDetectConfig::defaults();
    std::vector<std::string> four_of_five{"a.c", "b.h", "c.py", "d.js", "README.md"};
    auto v = detect(four_of_five, cfg);
    EXPECT_DOUBLE_EQ(v.source_ratio, 0.8);
    EXPECT_TRUE(v.is_source);
    EXPECT_EQ(v.source_file_count, 4u);
    EXPECT_EQ(v.total_file_count, 5u);

    std::vector<std::string> three_of_four{"a.c", "b.h", "c.py", "README.md"};
    auto w = detect(three_of_four, cfg);
    EXPECT_EQ(w.source_ratio, 0.75);
    EXPECT_FALSE(w.is_source);
}

TEST(SourceDetect, EmptyAndDirectories) {
    const auto cfg = SourceDetectConfig::defaults();
    auto e = detect(std::vector<std::string>{}, cfg);
    EXPECT_FALSE(e.is_source);
    EXPECT_EQ(e.source_ratio, 0.0);
    std::vector<std::string> files{"src/", "src/a.c", "src/b.c", "docs/", "x.go"};
    auto v = detect(files, cfg);
    EXPECT_EQ(v.total_file_count, 3u);
    EXPECT_TRUE(v.is_source);
}

TEST(SourceDetect, Monotonicity) {
    const auto cfg = SourceDetectConfig::defaults();
    const std::vector<std::string> pool{"a.c", "b.txt", "c.py", "Makefile", "d.md", "e.go", "f.png", "dir/"};
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<std::string> files;
        for (std::size_t i = 0, n = rng() % 10; i < n; ++i) files.push_back(pool[rng() % pool.size()]);
        const auto before = detect(files, cfg).source_ratio;
        auto with_src = files;
        with_src.push_back("new.cpp");
        auto with_doc = files;
        with_doc.push_back("new.pdf");
        EXPECT_GE(detect(with_src, cfg).source_ratio, before);
        EXPECT_LE(detect(with_doc, cfg).source_ratio, before);
        const auto r = detect(files, cfg);
        EXPECT_EQ(r.is_source, r.source_ratio > cfg.threshold);
        EXPECT_GE(r.source_ratio, 0.0);
        EXPECT_LE(r.source_ratio, 1.0);
    }
}

TEST(SourceDetectConfig, DefaultWhitelist) {
    const auto cfg = SourceDetectConfig::defaults();
    EXPECT_EQ(cfg.threshold, 0.75);
    for (const char* ext : {"asm", "s", "c", "h", "cpp", "hpp", "cc", "bat", "sh", "ps1", "java", "py", "cs", "m",
                            "pas", "vb", "php", "js", "go"})
        EXPECT_TRUE(cfg.extension_whitelist.contains(ext)) << ext;
    EXPECT_FALSE(cfg.extension_whitelist.contains("md"));
}

TEST(SourceDetectConfig, Parse) {
    auto cfg = SourceDetectConfig::parse("# custom\nthreshold = 0.5\nextensions=C, .Rs ,go\n");
    EXPECT_EQ(cfg.threshold, 0.5);
    EXPECT_EQ(cfg.extension_whitelist, (std::set<std::string, std::less<>>{"c", "go", "rs"}));
    auto partial = SourceDetectConfig::parse("threshold=0.9");
    EXPECT_EQ(partial.extension_whitelist, SourceDetectConfig::defaults().extension_whitelist);
    EXPECT_THROW(SourceDetectConfig::parse("threshold=0"), ValidationError);
    EXPECT_THROW(SourceDetectConfig::parse("threshold=1.5"), ValidationError);
    EXPECT_THROW(SourceDetectConfig::parse("threshold=abc"), ValidationError);
    EXPECT_THROW(SourceDetectConfig::parse("extensions="), ValidationError);
    EXPECT_THROW(SourceDetectConfig::parse("colour=blue"), ValidationError);
    EXPECT_THROW(SourceDetectConfig::parse("novalue"), ValidationError);
}
