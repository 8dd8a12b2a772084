#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gist/corpus.hpp"
#include "gist/evalkit.hpp"
#include "gist/triplet.hpp"

namespace gist {

// Planted-cluster generator. Each text is `signature_tokens_per_text` tokens
// drawn from its cluster's private pool of `shared_token_pool` tokens, plus
// noise tokens from one global pool of `noise_token_pool` tokens, shuffled.
struct SynthConfig {
  std::size_t num_clusters = 8;
  std::size_t items_per_cluster = 32;             // training items
  std::optional<std::size_t> heldout_per_cluster;  // defaults to items_per_cluster
  std::size_t tokens_per_text = 12;
  std::size_t signature_tokens_per_text = 3;
  std::size_t shared_token_pool = 16;
  std::size_t noise_token_pool = 512;
  double false_negative_rate = 0.0;
  double flip_positive_rate = 0.0;
  std::optional<std::size_t> num_triplets;  // defaults to one per training item
  bool with_negatives = true;               // false: (query, positive) pairs only
  std::size_t sts_pairs = 200;
  std::uint64_t seed = 0;

  std::size_t heldout() const { return heldout_per_cluster.value_or(items_per_cluster); }
  std::size_t triplet_count() const { return num_triplets.value_or(num_clusters * items_per_cluster); }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct TripletFlags {
  bool negative_is_contaminated = false;  // negative shares the query's cluster
  bool positive_is_flipped = false;       // positive comes from another cluster
  std::uint64_t query_id = 0;
  std::uint64_t positive_id = 0;
  std::optional<std::uint64_t> negative_id;

  bool operator==(const TripletFlags&) const = default;
};

struct SynthCorpus {
  SynthConfig config;
  LabeledCorpus corpus;  // split "train" or "heldout"
  std::vector<Triplet> triplets;
  std::vector<TripletFlags> flags;
};

SynthCorpus generate(const SynthConfig& cfg);

struct SynthSuite {
  TaskSuite suite;
  std::vector<std::string> notes;  // e.g. clusters left out of retrieval
};

/// Retrieval, classification and STS tasks over the held-out split.
SynthSuite to_eval_suite(const SynthCorpus& corpus);

// Writes corpus.jsonl, triplets.jsonl, flags.jsonl and suite/manifest.json
// (plus the task files) under dir. Returns the notes from to_eval_suite.
std::vector<std::string> save_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);

void save_flags(const std::vector<TripletFlags>& flags, const std::filesystem::path& path);
std::vector<TripletFlags> load_flags(const std::filesystem::path& path);

}  // namespace gist
