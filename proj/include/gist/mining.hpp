#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gist/corpus.hpp"
#include "gist/guide.hpp"
#include "gist/rng.hpp"
#include "gist/triplet.hpp"

namespace gist {

struct MiningConfig {
  std::size_t k_p = 100;
  std::optional<std::size_t> k_n;  // nullopt: every out-of-class item
  double temperature = 0.05;
  std::uint64_t seed = 0;
  std::size_t repeat = 1;  // passes over the corpus

  void validate() const;
};

/// softmax(thetas / temperature), max-shifted.
std::vector<double> positive_weights(std::span<const double> thetas, double temperature);

// Candidate pools for one query. Indices point into corpus.items. Both pools
// are ordered by similarity descending, ties by ascending item id.
struct QueryPlan {
  std::size_t query = 0;
  std::vector<std::size_t> positives;  // top k_p same-class items, query excluded
  std::vector<double> positive_similarities;
  std::vector<double> positive_weights;
  std::vector<std::size_t> negatives;  // top k_n out-of-class items
};

struct ClassStats {
  std::string label;
  std::size_t items = 0;
  std::size_t queries = 0;
  std::size_t skipped = 0;
};

struct MiningPlan {
  std::vector<QueryPlan> queries;          // ascending query id
  std::vector<std::uint64_t> skipped_ids;  // singleton-class items
  std::vector<ClassStats> classes;         // sorted by label
};

/// Embeds the corpus once and builds every query's candidate pools.
MiningPlan plan_mining(const LabeledCorpus& corpus, const TextEmbedder& embedder,
                       const MiningConfig& cfg);

/// Softmax-weighted draw from the positive pool; returns an item index.
std::size_t sample_positive(const QueryPlan& plan, Rng& rng);
/// Uniform draw from the negative pool; returns an item index.
std::size_t sample_negative(const QueryPlan& plan, Rng& rng);

struct MinedIds {
  std::uint64_t query = 0;
  std::uint64_t positive = 0;
  std::uint64_t negative = 0;
};

struct MiningResult {
  std::vector<Triplet> triplets;
  std::vector<MinedIds> ids;  // aligned with triplets
  MiningPlan plan;
};

/// One triplet per eligible query per pass, in ascending query id order.
/// Deterministic for a fixed seed.
MiningResult mine_triplets(const LabeledCorpus& corpus, const TextEmbedder& embedder,
                           const MiningConfig& cfg);

}  // namespace gist
