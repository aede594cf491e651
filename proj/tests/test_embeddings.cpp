#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "colormod/embeddings.hpp"
#include "colormod/errors.hpp"

using namespace colormod;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("colormod-emb-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string vector_line(const std::string& token, double fill, std::size_t dims = kEmbeddingDim) {
    std::string line = token;
    for (std::size_t i = 0; i < dims; ++i) {
        line += ' ';
        line += std::to_string(fill + static_cast<double>(i) * 1e-3);
    }
    return line;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("load basic file, header optional") {
    TempDir dir;
    const auto path = dir.path / "emb.txt";

    write_file(path, vector_line("darker", 0.5) + "\n" + vector_line("lighter", -0.25) + "\n");
    auto table = EmbeddingTable::load(path.string());
    CHECK(table.size() == 2);
    REQUIRE(table.find("darker") != nullptr);
    CHECK((*table.find("darker"))[0] == doctest::Approx(0.5));

    write_file(path, "2 300\n" + vector_line("darker", 0.5) + "\n" +
                         vector_line("lighter", -0.25) + "\n");
    auto with_header = EmbeddingTable::load(path.string());
    CHECK(with_header.size() == 2);
}

TEST_CASE("vocabulary restriction keeps the intersection") {
    TempDir dir;
    const auto path = dir.path / "emb.txt";
    write_file(path, vector_line("darker", 0.5) + "\n" + vector_line("lighter", -0.25) + "\n");

    std::set<std::string> vocab{"darker", "missing"};
    auto table = EmbeddingTable::load(path.string(), &vocab);
    CHECK(table.size() == 1);
    CHECK(table.contains("darker"));
    CHECK_FALSE(table.contains("lighter"));
}

TEST_CASE("dimension mismatch is a parse error with the line number") {
    TempDir dir;
    const auto path = dir.path / "emb.txt";
    write_file(path, vector_line("darker", 0.5) + "\n" + vector_line("short", 0.0, 299) + "\n");
    try {
        EmbeddingTable::load(path.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("malformed value names the line") {
    TempDir dir;
    const auto path = dir.path / "emb.txt";
    std::string bad = vector_line("darker", 0.5);
    bad.replace(bad.find("0.5"), 3, "x.y");
    write_file(path, bad + "\n");
    CHECK_THROWS_AS(EmbeddingTable::load(path.string()), ParseError);
}

TEST_CASE("missing file") {
    CHECK_THROWS_AS(EmbeddingTable::load("/nonexistent/emb.txt"), ParseError);
}

TEST_CASE("embed single and multi-token modifiers") {
    EmbeddingTable table;
    std::vector<double> u(kEmbeddingDim, 1.0), v(kEmbeddingDim, 3.0);
    table.insert("very", u);
    table.insert("dark", v);

    const ModifierVector single = embed_modifier("dark", table);
    CHECK(single.values[0] == doctest::Approx(3.0));
    CHECK(single.source_tokens == std::vector<std::string>{"dark"});

    const ModifierVector pair = embed_modifier("very dark", table);
    CHECK(pair.values[0] == doctest::Approx(2.0)); // mean of the token vectors
    CHECK(pair.values[kEmbeddingDim - 1] == doctest::Approx(2.0));
    CHECK(pair.source_tokens.size() == 2);
}

TEST_CASE("embedding is case-insensitive and deterministic") {
    EmbeddingTable table;
    table.insert("darker", std::vector<double>(kEmbeddingDim, 0.25));
    const auto a = embed_modifier("Darker", table);
    const auto b = embed_modifier("darker", table);
    CHECK(a.values == b.values);
}

TEST_CASE("out-of-vocabulary handling") {
    EmbeddingTable table;
    table.insert("darker", std::vector<double>(kEmbeddingDim, 0.25));

    try {
        embed_modifier("blurple", table);
        FAIL("expected OovError");
    } catch (const OovError& e) {
        CHECK(std::string(e.what()).find("blurple") != std::string::npos);
    }

    // The hashed fallback is deterministic across calls.
    const auto a = embed_modifier("blurple", table, OovPolicy::HashedFallback);
    const auto b = embed_modifier("blurple", table, OovPolicy::HashedFallback);
    CHECK(a.values == b.values);
    CHECK(a.values == hashed_fallback_vector("blurple"));

    CHECK_THROWS_AS(embed_modifier("   ", table), DomainError);
}

TEST_CASE("fixture tables are keyed by (token, seed)") {
    const auto t1 = EmbeddingTable::fixture({"darker", "lighter"}, 7);
    const auto t2 = EmbeddingTable::fixture({"lighter", "darker"}, 7);
    const auto t3 = EmbeddingTable::fixture({"darker"}, 8);
    CHECK(*t1.find("darker") == *t2.find("darker"));   // order-independent
    CHECK(*t1.find("lighter") == *t2.find("lighter"));
    CHECK(*t1.find("darker") != *t3.find("darker"));   // seed-dependent
    for (double x : *t1.find("darker")) {
        CHECK(x >= -0.5);
        CHECK(x < 0.5);
    }
}

TEST_CASE("save then load round-trips the vocabulary") {
    TempDir dir;
    const auto path = dir.path / "fixture.txt";
    const auto table = EmbeddingTable::fixture({"paler", "deeper", "very"}, 3);
    table.save(path.string());
    const auto loaded = EmbeddingTable::load(path.string());
    CHECK(loaded.size() == table.size());
    for (const auto& [token, vec] : table.entries()) {
        REQUIRE(loaded.find(token) != nullptr);
        // The text format carries 9 significant digits.
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
            CHECK((*loaded.find(token))[i] == doctest::Approx(vec[i]).epsilon(1e-8));
        }
    }
}
