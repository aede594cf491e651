#include "colormod/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "colormod/errors.hpp"
#include "colormod/rng.hpp"

namespace colormod {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

bool is_integer(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

double parse_real(const std::string& s, std::size_t line_no) {
    double v{};
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ParseError("embedding file line " + std::to_string(line_no) +
                         ": bad value '" + s + "'");
    }
    return v;
}

} // namespace

EmbeddingTable EmbeddingTable::load(const std::string& path,
                                    const std::set<std::string>* restrict_vocab) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open embedding file: " + path);
    }

    std::set<std::string> wanted;
    if (restrict_vocab) {
        for (const auto& t : *restrict_vocab) wanted.insert(lowercase(t));
    }

    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_ws(line);
        if (fields.empty()) continue;

        // Optional word2vec-style "count dim" header.
        if (first_line && fields.size() == 2 && is_integer(fields[0]) &&
            is_integer(fields[1])) {
            first_line = false;
            if (fields[1] != std::to_string(kEmbeddingDim)) {
                throw ParseError("embedding file line 1: header dimension " + fields[1] +
                                 " != " + std::to_string(kEmbeddingDim));
            }
            continue;
        }
        first_line = false;

        if (fields.size() != kEmbeddingDim + 1) {
            throw ParseError("embedding file line " + std::to_string(line_no) + ": got " +
                             std::to_string(fields.size() - 1) + " values, expected " +
                             std::to_string(kEmbeddingDim));
        }
        std::string token = lowercase(fields[0]);
        if (restrict_vocab && wanted.find(token) == wanted.end()) continue;
        if (table.vectors_.count(token)) continue; // first occurrence wins

        std::vector<double> vec(kEmbeddingDim);
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
            vec[i] = parse_real(fields[i + 1], line_no);
        }
        table.vectors_.emplace(std::move(token), std::move(vec));
    }
    return table;
}

EmbeddingTable EmbeddingTable::fixture(const std::vector<std::string>& vocab,
                                       std::uint64_t seed) {
    EmbeddingTable table;
    for (const auto& raw : vocab) {
        const std::string token = lowercase(raw);
        if (table.vectors_.count(token)) continue;
        std::mt19937_64 rng(splitmix64(seed ^ fnv1a(token)));
        std::vector<double> vec(kEmbeddingDim);
        for (auto& x : vec) x = next_uniform(rng, -0.5, 0.5);
        table.vectors_.emplace(token, std::move(vec));
    }
    return table;
}

void EmbeddingTable::insert(const std::string& token, std::vector<double> vec) {
    if (vec.size() != kEmbeddingDim) {
        throw StructuralError("embedding vector has dimension " +
                              std::to_string(vec.size()));
    }
    vectors_[lowercase(token)] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
    auto it = vectors_.find(lowercase(token));
    return it == vectors_.end() ? nullptr : &it->second;
}

bool EmbeddingTable::contains(const std::string& token) const {
    return find(token) != nullptr;
}

void EmbeddingTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot write embedding file: " + path);
    }
    out << vectors_.size() << ' ' << kEmbeddingDim << '\n';
    char buf[32];
    for (const auto& [token, vec] : vectors_) {
        out << token;
        for (double v : vec) {
            std::snprintf(buf, sizeof buf, "%.9g", v);
            out << ' ' << buf;
        }
        out << '\n';
    }
}

std::vector<std::string> tokenize_modifier(const std::string& modifier) {
    auto tokens = split_ws(modifier);
    if (tokens.empty()) {
        throw DomainError("empty modifier string");
    }
    for (auto& t : tokens) t = lowercase(t);
    return tokens;
}

std::vector<double> hashed_fallback_vector(const std::string& token) {
    // Fixed namespace seed so the fallback is stable across processes.
    constexpr std::uint64_t kFallbackSeed = 0x0c51f7a11bac0ffeULL;
    std::mt19937_64 rng(splitmix64(kFallbackSeed ^ fnv1a(lowercase(token))));
    std::vector<double> vec(kEmbeddingDim);
    for (auto& x : vec) x = next_uniform(rng, -0.5, 0.5);
    return vec;
}

ModifierVector embed_modifier(const std::string& modifier, const EmbeddingTable& table,
                              OovPolicy policy) {
    const auto tokens = tokenize_modifier(modifier);

    ModifierVector out;
    out.values.assign(kEmbeddingDim, 0.0);
    out.source_tokens = tokens;

    for (const auto& token : tokens) {
        const std::vector<double>* vec = table.find(token);
        std::vector<double> fallback;
        if (!vec) {
            if (policy == OovPolicy::Error) {
                throw OovError("modifier token not in embedding table: '" + token + "'");
            }
            fallback = hashed_fallback_vector(token);
            vec = &fallback;
        }
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) out.values[i] += (*vec)[i];
    }
    const double inv = 1.0 / static_cast<double>(tokens.size());
    for (auto& x : out.values) x *= inv;
    return out;
}

} // namespace colormod
