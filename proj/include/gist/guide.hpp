#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gist/corpus.hpp"
#include "gist/encoder.hpp"
#include "gist/simblock.hpp"
#include "gist/triplet.hpp"

namespace gist {

// Anything that maps texts to unit-norm embeddings. Used by the mining pass
// and by embedding-backed guides.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  /// One unit row per text (zero row for a degenerate text). Throws DataError
  /// for texts the embedder cannot represent.
  virtual Matrix embed(std::span<const std::string> texts) const = 0;
};

class EncoderEmbedder final : public TextEmbedder {
 public:
  explicit EncoderEmbedder(EncoderParams params);
  std::size_t dim() const override { return params_.dim(); }
  Matrix embed(std::span<const std::string> texts) const override;
  const EncoderParams& params() const { return params_; }

 private:
  EncoderParams params_;
};

std::string hash_hex(std::uint64_t h);

// Embeddings exported offline from an arbitrary model, keyed by the FNV-1a 64
// hash of the exact text bytes (no whitespace normalization).
//
// File: JSONL. Line 1 is the header
//   {"format": "gist-embedding-store", "version": 1, "dim": d, "hash": "fnv1a64"}
// then one {"hash": "<16 hex digits>", "embedding": [d numbers]} per text.
class EmbeddingStore final : public TextEmbedder {
 public:
  static constexpr const char* kHashAlgorithm = "fnv1a64";

  explicit EmbeddingStore(std::size_t dim);

  static EmbeddingStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Stores the raw vector; normalization happens on lookup.
  void add(std::string_view text, std::span<const double> embedding);
  bool contains(std::string_view text) const;
  std::size_t size() const { return entries_.size(); }

  std::size_t dim() const override { return dim_; }
  Matrix embed(std::span<const std::string> texts) const override;

 private:
  std::size_t dim_;
  std::unordered_map<std::uint64_t, Vector> entries_;
};

// The frozen guide G: scores every pair in a batch. Never receives gradients.
class Guide {
 public:
  virtual ~Guide() = default;
  virtual GuideSimBlock similarities(std::span<const Triplet> batch) const = 0;
  virtual std::string kind() const = 0;
};

// Cosine similarities of a frozen embedder, cached per unique text since the
// embedder never changes. Backs both the frozen-encoder and precomputed guides.
class EmbeddingGuide final : public Guide {
 public:
  EmbeddingGuide(std::shared_ptr<const TextEmbedder> embedder, std::string kind);
  GuideSimBlock similarities(std::span<const Triplet> batch) const override;
  std::string kind() const override { return kind_; }
  std::size_t cache_size() const;

 private:
  Matrix lookup(const std::vector<const std::string*>& texts) const;

  std::shared_ptr<const TextEmbedder> embedder_;
  std::string kind_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, Vector> cache_;
};

// Same label -> 1, different label -> 0. The query-positive entry of a
// same-label pair is reported as kOracleSelfThreshold instead of 1, so the
// strict ">" masking rule removes every same-label candidate. A pair whose
// positive carries another label gets threshold 0.
class LabelOracleGuide final : public Guide {
 public:
  static constexpr double kOracleSelfThreshold = 1.0 - 1e-6;

  explicit LabelOracleGuide(std::unordered_map<std::string, std::string> labels);
  static LabelOracleGuide from_corpus(const LabeledCorpus& corpus);

  GuideSimBlock similarities(std::span<const Triplet> batch) const override;
  std::string kind() const override { return "oracle"; }

 private:
  const std::string& label_of(const std::string& text) const;

  std::unordered_map<std::string, std::string> labels_;
};

std::unique_ptr<Guide> make_frozen_encoder_guide(EncoderParams params);
std::unique_ptr<Guide> make_precomputed_guide(EmbeddingStore store);

/// Parses "frozen:<checkpoint>", "precomputed:<store.jsonl>" or
/// "oracle:<corpus.jsonl>".
std::unique_ptr<Guide> make_guide(const std::string& spec);

/// Parses "frozen:<checkpoint>" or "precomputed:<store.jsonl>".
std::shared_ptr<const TextEmbedder> make_embedder(const std::string& spec);

/// Convenience wrapper: guide_similarities(batch, guide) == guide.similarities(batch).
inline GuideSimBlock guide_similarities(std::span<const Triplet> batch, const Guide& guide) {
  return guide.similarities(batch);
}

}  // namespace gist
