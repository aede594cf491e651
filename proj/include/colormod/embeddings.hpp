#pragma once

// Pretrained word vectors, frozen for the lifetime of the process. Modifier
// strings map to fixed 300-d vectors: single tokens look up directly,
// multi-token modifiers average their token vectors.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace colormod {

inline constexpr std::size_t kEmbeddingDim = 300;

class EmbeddingTable {
public:
    // Textual format: optional "count dim" header, then one token plus
    // kEmbeddingDim whitespace-separated reals per line. Tokens are
    // lowercased on load; the first occurrence wins on a collision.
    // restrict_vocab, when given, keeps only the listed tokens.
    static EmbeddingTable load(const std::string& path,
                               const std::set<std::string>* restrict_vocab = nullptr);

    // Deterministic pseudo-random vectors, one per vocabulary token, keyed
    // by (token, seed). Used for the bundled fixtures and synthetic runs.
    static EmbeddingTable fixture(const std::vector<std::string>& vocab,
                                  std::uint64_t seed);

    void insert(const std::string& token, std::vector<double> vec);
    const std::vector<double>* find(const std::string& token) const;
    bool contains(const std::string& token) const;
    std::size_t size() const { return vectors_.size(); }
    static constexpr std::size_t dim() { return kEmbeddingDim; }

    // Writes the textual format with a header, tokens in sorted order.
    void save(const std::string& path) const;

    const std::map<std::string, std::vector<double>>& entries() const { return vectors_; }

private:
    std::map<std::string, std::vector<double>> vectors_;
};

struct ModifierVector {
    std::vector<double> values;              // kEmbeddingDim entries
    std::vector<std::string> source_tokens;  // lowercased tokens it was built from
};

enum class OovPolicy {
    Error,           // unknown token -> OovError naming the token
    HashedFallback,  // unknown token -> deterministic hash-seeded vector
};

// Whitespace tokenization, lowercased. Throws DomainError on an empty or
// all-whitespace modifier.
std::vector<std::string> tokenize_modifier(const std::string& modifier);

// The deterministic vector HashedFallback substitutes for a missing token.
std::vector<double> hashed_fallback_vector(const std::string& token);

ModifierVector embed_modifier(const std::string& modifier, const EmbeddingTable& table,
                              OovPolicy policy = OovPolicy::Error);

} // namespace colormod
