#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gist/vecmath.hpp"

namespace gist {

struct TokenizerConfig {
  std::uint64_t vocab_slots = 4096;  // hash buckets
  std::uint64_t hash_seed = 0;
  bool lowercase = true;
  std::uint64_t max_tokens = 512;

  void validate() const;
  bool operator==(const TokenizerConfig&) const = default;
};

/// Whitespace split, optional ASCII case folding, seeded 64-bit hashing into
/// [0, vocab_slots). Distinct tokens may collide; that is accepted noise.
std::vector<std::uint32_t> tokenize(std::string_view text, const TokenizerConfig& cfg);

struct EncoderParams {
  TokenizerConfig tokenizer;
  Matrix table;  // vocab_slots x dim

  std::size_t dim() const { return table.cols(); }
  void validate() const;
  bool operator==(const EncoderParams&) const = default;
};

/// Entries i.i.d. uniform in [-0.5, 0.5] / sqrt(dim).
EncoderParams init_encoder(const TokenizerConfig& tokenizer, std::size_t dim, std::uint64_t seed);

struct EncodedBatch {
  Matrix embeddings;  // unit rows, zero rows where degenerate
  Matrix pre_norm;    // mean-pooled rows before normalization
  std::vector<std::vector<std::uint32_t>> token_ids;
  std::vector<bool> degenerate;
};

/// Mean-pooled bag of token rows, L2-normalized. A text without tokens yields
/// a zero row and a degenerate flag. With threads > 1 the texts are split into
/// contiguous chunks; the result is identical to the sequential path.
EncodedBatch forward(std::span<const std::string> texts, const EncoderParams& params,
                     unsigned threads = 1);

struct GradAccumulator {
  Matrix grad_table;

  explicit GradAccumulator(const EncoderParams& params)
      : grad_table(params.table.rows(), params.table.cols()) {}
  void zero() { grad_table.fill(0.0); }
};

/// Accumulates dLoss/dTable given dLoss/dEmbeddings. Backpropagates through the
/// normalization (tangent projection divided by the pre-norm length) and the
/// mean pooling. Degenerate rows contribute nothing.
void backward(const EncodedBatch& batch, const Matrix& grad_wrt_embeddings,
              const EncoderParams& params, GradAccumulator& acc);

// Optimizer state carried alongside parameters so a run can resume exactly.
struct TrainerState {
  std::uint64_t step = 0;
  Matrix first_moment;
  Matrix second_moment;

  bool operator==(const TrainerState&) const = default;
};

struct Checkpoint {
  EncoderParams params;
  std::optional<TrainerState> state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian binary layout:
//   "GISTCKPT" u32 version, u64 vocab_slots, u64 dim, u64 hash_seed,
//   u8 lowercase, u64 max_tokens, f64[vocab_slots * dim] table,
//   u8 has_state, [u64 step, f64[n] first_moment, f64[n] second_moment]
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                     const TrainerState* state = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Hex digest of a checkpoint's bytes; used as the model id in reports.
std::string checkpoint_id(const std::filesystem::path& path);

}  // namespace gist
