// Regenerates the bundled fixtures: a synthetic triple dataset (exact
// analytic targets) and a matching deterministic embedding file, so the
// whole pipeline runs without external data.
//
// Usage: colormod-gen-fixtures <output-dir>

#include <cstdio>
#include <filesystem>
#include <string>

#include "colormod/data.hpp"
#include "colormod/embeddings.hpp"

using namespace colormod;

namespace {
constexpr std::size_t kRefCount = 45;
constexpr std::uint64_t kDatasetSeed = 101;
constexpr std::uint64_t kEmbeddingSeed = 7;
} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <output-dir>\n", argv[0]);
        return 2;
    }
    const std::filesystem::path dir(argv[1]);
    std::filesystem::create_directories(dir);

    const auto triples =
        generate_synthetic(kRefCount, default_synthetic_modifiers(), kDatasetSeed);
    const auto dataset_path = dir / "synthetic_triples.csv";
    save_triples(triples, dataset_path.string());

    const auto vocab = modifier_vocabulary(triples);
    const auto table = EmbeddingTable::fixture(vocab, kEmbeddingSeed);
    const auto emb_path = dir / "fixture_embeddings.txt";
    table.save(emb_path.string());

    std::printf("%s: %zu triples\n", dataset_path.c_str(), triples.size());
    std::printf("%s: %zu tokens x %zu dims\n", emb_path.c_str(), table.size(),
                EmbeddingTable::dim());
    return 0;
}
