#include "cotforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "cotforge/parallel.hpp"

namespace cotforge {

namespace {

constexpr std::uint64_t fmix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct LaneParams {
  std::uint64_t mul;
  std::uint64_t add;
};

std::vector<LaneParams> lane_params(std::size_t num_hashes, std::uint64_t seed) {
  std::vector<LaneParams> lanes(num_hashes);
  std::uint64_t state = seed;
  for (auto& lane : lanes) {
    lane.mul = splitmix64(state) | 1ULL;
    lane.add = splitmix64(state);
  }
  return lanes;
}

inline std::uint64_t lane_hash(const LaneParams& lane, std::uint64_t base) {
  return fmix64(base * lane.mul + lane.add);
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += words[i];
  }
  return out;
}

// Base hashes of the word k-grams starting at each position; a single hash of
// all words when there are fewer than k.
std::vector<std::uint64_t> kgram_hashes(const std::vector<std::string>& words, std::size_t k) {
  std::vector<std::uint64_t> hashes;
  if (words.size() < k) {
    hashes.push_back(hash64(join_words(words, 0, words.size())));
    return hashes;
  }
  hashes.reserve(words.size() - k + 1);
  for (std::size_t i = 0; i + k <= words.size(); ++i) hashes.push_back(hash64(join_words(words, i, i + k)));
  return hashes;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<std::string> shingle_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (c < 0x80 && std::ispunct(c)) {
      continue;
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::uint64_t hash64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return fmix64(h);
}

ShingleSet make_shingles(std::string_view text, std::size_t k) {
  if (k == 0) throw std::invalid_argument("shingle size k must be >= 1");
  const auto words = shingle_words(text);
  if (words.empty()) throw std::invalid_argument("cannot shingle an empty document");
  ShingleSet set;
  set.k = k;
  set.shingles = kgram_hashes(words, k);
  std::sort(set.shingles.begin(), set.shingles.end());
  set.shingles.erase(std::unique(set.shingles.begin(), set.shingles.end()), set.shingles.end());
  return set;
}

MinHashSignature minhash_from_shingles(std::span<const std::uint64_t> shingles, std::size_t num_hashes,
                                       std::uint64_t seed) {
  if (num_hashes == 0) throw std::invalid_argument("num_hashes must be >= 1");
  if (shingles.empty()) throw std::invalid_argument("cannot sign an empty shingle set");
  const auto lanes = lane_params(num_hashes, seed);
  MinHashSignature sig;
  sig.seed = seed;
  sig.values.assign(num_hashes, std::numeric_limits<std::uint64_t>::max());
  for (std::uint64_t s : shingles) {
    for (std::size_t i = 0; i < num_hashes; ++i) sig.values[i] = std::min(sig.values[i], lane_hash(lanes[i], s));
  }
  return sig;
}

MinHashSignature minhash_signature(std::string_view text, std::size_t k, std::size_t num_hashes,
                                   std::uint64_t seed) {
  const auto set = make_shingles(text, k);
  return minhash_from_shingles(set.shingles, num_hashes, seed);
}

double jaccard_estimate(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.values.size() != b.values.size() || a.seed != b.seed) {
    throw std::invalid_argument("signatures differ in lane count or seed");
  }
  if (a.values.empty()) throw std::invalid_argument("empty signatures");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) same += a.values[i] == b.values[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(a.values.size());
}

double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
  std::vector<std::uint64_t> common;
  std::set_intersection(a.shingles.begin(), a.shingles.end(), b.shingles.begin(), b.shingles.end(),
                        std::back_inserter(common));
  const std::size_t uni = a.shingles.size() + b.shingles.size() - common.size();
  return uni == 0 ? 1.0 : static_cast<double>(common.size()) / static_cast<double>(uni);
}

void DedupParams::check() const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (bands == 0 || rows == 0 || bands * rows != num_hashes) {
    throw std::invalid_argument("bands * rows must equal num_hashes");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
}

std::vector<Cluster> lsh_dedup(const std::vector<Document>& docs, const DedupParams& params) {
  params.check();
  const std::size_t n = docs.size();
  std::vector<MinHashSignature> sigs(n);
  parallel_for(n, params.workers,
               [&](std::size_t i) { sigs[i] = minhash_signature(docs[i].text, params.k, params.num_hashes, params.seed); });

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t band = 0; band < params.bands; ++band) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t key = 0x84222325cbf29ce4ULL ^ band;
      for (std::size_t r = 0; r < params.rows; ++r) key = fmix64(key ^ sigs[i].values[band * params.rows + r]);
      buckets[key].push_back(i);
    }
    for (const auto& [key, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) candidates.emplace_back(members[a], members[b]);
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  DisjointSets sets(n);
  for (const auto& [a, b] : candidates) {
    if (jaccard_estimate(sigs[a], sigs[b]) >= params.threshold) sets.unite(a, b);
  }

  std::unordered_map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(docs[i].id);
  std::vector<Cluster> clusters;
  clusters.reserve(groups.size());
  for (auto& [root, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    clusters.push_back(Cluster{ids.front(), std::move(ids)});
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.representative < b.representative; });
  return clusters;
}

std::vector<PhraseMatch> phrase_mine(const std::vector<Document>& corpus, const std::vector<std::string>& phrases,
                                     const MineParams& params) {
  if (phrases.empty()) throw std::invalid_argument("phrase list must not be empty");
  if (params.k == 0 || params.num_hashes == 0) throw std::invalid_argument("k and num_hashes must be >= 1");
  const auto lanes = lane_params(params.num_hashes, params.seed);

  struct PreparedPhrase {
    std::string text;
    std::string lowered;
    std::size_t words = 0;
    std::vector<std::uint64_t> signature;
  };
  std::vector<PreparedPhrase> prepared;
  for (const auto& phrase : phrases) {
    PreparedPhrase p;
    p.text = phrase;
    p.lowered = lowercase(phrase);
    const auto words = shingle_words(phrase);
    p.words = words.size();
    if (!words.empty()) {
      auto hashes = kgram_hashes(words, params.k);
      p.signature = minhash_from_shingles(hashes, params.num_hashes, params.seed).values;
    }
    prepared.push_back(std::move(p));
  }

  std::vector<std::vector<PhraseMatch>> per_doc(corpus.size());
  parallel_for(corpus.size(), params.workers, [&](std::size_t d) {
    const auto& doc = corpus[d];
    const std::string lowered = lowercase(doc.text);
    const auto words = shingle_words(doc.text);
    const auto doc_kgrams = words.size() >= params.k ? kgram_hashes(words, params.k) : std::vector<std::uint64_t>{};
    for (const auto& p : prepared) {
      double best = 0.0;
      if (!p.lowered.empty() && lowered.find(p.lowered) != std::string::npos) {
        best = 1.0;
      } else if (p.words > 0 && !words.empty()) {
        const std::size_t window = std::min(p.words, words.size());
        for (std::size_t start = 0; start + window <= words.size() && best < 1.0; ++start) {
          std::span<const std::uint64_t> hashes;
          std::uint64_t joined = 0;
          if (window >= params.k) {
            hashes = std::span<const std::uint64_t>(doc_kgrams).subspan(start, window - params.k + 1);
          } else {
            joined = hash64(join_words(words, start, start + window));
            hashes = std::span<const std::uint64_t>(&joined, 1);
          }
          std::size_t same = 0;
          for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
            std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
            for (std::uint64_t h : hashes) m = std::min(m, lane_hash(lanes[lane], h));
            same += m == p.signature[lane] ? 1 : 0;
          }
          best = std::max(best, static_cast<double>(same) / static_cast<double>(lanes.size()));
        }
      }
      if (best > 0.0 && best >= params.threshold) per_doc[d].push_back(PhraseMatch{doc.id, p.text, best});
    }
  });

  std::vector<PhraseMatch> matches;
  for (auto& v : per_doc) {
    for (auto& m : v) matches.push_back(std::move(m));
  }
  return matches;
}

}  // namespace cotforge
