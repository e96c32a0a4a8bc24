#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cotforge {

// Lowercases, deletes ASCII punctuation and splits on whitespace.
std::vector<std::string> shingle_words(std::string_view text);

// 64-bit FNV-1a followed by a murmur3 finalizer.
std::uint64_t hash64(std::string_view bytes);

struct ShingleSet {
  std::vector<std::uint64_t> shingles;  // sorted, unique
  std::size_t k = 5;
};

// Hashes of word k-grams. Documents with fewer than k words yield the single
// shingle of all their words. Throws std::invalid_argument for k == 0 or a
// document with no words.
ShingleSet make_shingles(std::string_view text, std::size_t k);

struct MinHashSignature {
  std::vector<std::uint64_t> values;
  std::uint64_t seed = 0;
};

// Lane i applies a seed-derived multiply-add permutation and a finalizer to
// each base shingle hash, keeping the minimum.
MinHashSignature minhash_from_shingles(std::span<const std::uint64_t> shingles, std::size_t num_hashes,
                                       std::uint64_t seed);

MinHashSignature minhash_signature(std::string_view text, std::size_t k, std::size_t num_hashes,
                                   std::uint64_t seed);

// Fraction of equal lanes. Throws std::invalid_argument when lane count or seed differ.
double jaccard_estimate(const MinHashSignature& a, const MinHashSignature& b);

// Exact Jaccard of two shingle sets.
double exact_jaccard(const ShingleSet& a, const ShingleSet& b);

struct Document {
  std::string id;
  std::string text;
};

struct DedupParams {
  std::size_t k = 5;
  std::size_t num_hashes = 128;
  std::size_t bands = 16;
  std::size_t rows = 8;
  double threshold = 0.8;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  // Throws std::invalid_argument when bands * rows != num_hashes or a field is out of range.
  void check() const;
};

struct Cluster {
  std::string representative;        // lowest id, kept
  std::vector<std::string> members;  // sorted ids, representative first
};

// Band collisions propose candidate pairs, pairs with estimated Jaccard >=
// threshold are linked, clusters are connected components. Clusters are sorted
// by representative; singletons are included.
std::vector<Cluster> lsh_dedup(const std::vector<Document>& docs, const DedupParams& params);

struct PhraseMatch {
  std::string doc_id;
  std::string phrase;
  double score = 0.0;
};

struct MineParams {
  std::size_t k = 2;
  std::size_t num_hashes = 128;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// For every (document, phrase) pair emits at most one match carrying the best
// score: 1.0 for a verbatim (case-insensitive) occurrence, otherwise the best
// signature similarity over word windows of the phrase's length.
std::vector<PhraseMatch> phrase_mine(const std::vector<Document>& corpus, const std::vector<std::string>& phrases,
                                     const MineParams& params);

}  // namespace cotforge
