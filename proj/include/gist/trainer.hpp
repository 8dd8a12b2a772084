#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gist/encoder.hpp"
#include "gist/guide.hpp"
#include "gist/loss.hpp"
#include "gist/selection.hpp"
#include "gist/triplet.hpp"

namespace gist {

enum class Schedule { Linear, Constant };  // shape after warmup
std::string_view to_string(Schedule s);
Schedule parse_schedule(std::string_view name);

struct TrainConfig {
  double learning_rate = 5e-6;
  double warmup_ratio = 0.1;
  std::uint64_t total_steps = 100000;
  std::size_t batch_size = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double adam_epsilon = 1e-8;
  Strategy strategy = Strategy::Guided;
  LossConfig loss;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 1000;  // 0 disables periodic checkpoints
  Schedule schedule = Schedule::Linear;
  double max_grad_norm = 0.0;  // 0 disables clipping
  unsigned threads = 1;        // >1 encodes batch texts concurrently

  std::uint64_t warmup_steps() const;
  void validate() const;
};

/// Linear ramp 0 -> learning_rate over the warmup steps, then linear decay to
/// 0 at total_steps (or constant, per schedule). step must be < total_steps.
double lr_at(std::uint64_t step, const TrainConfig& cfg);

/// One decoupled-weight-decay Adam update; increments state.step first and
/// uses it for bias correction. Moments are allocated on first use.
void adamw_step(Matrix& params, const Matrix& grads, TrainerState& state, double lr,
                const TrainConfig& cfg);

// Loss and table gradient of one batch under the given selection strategy.
struct BatchResult {
  LossOutput loss;
  MaskSet mask;
  Matrix grad_table;
};

BatchResult evaluate_batch(std::span<const Triplet> batch, const EncoderParams& params,
                           const Guide* guide, Strategy strategy, const LossConfig& loss_cfg,
                           unsigned threads = 1);

struct StepRecord {
  std::uint64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double mean_active_negatives = 0.0;
  std::array<double, 4> masked_fraction{};  // qp, qn, qq, pp
  std::size_t batch_size = 0;
  std::size_t skipped_rows = 0;

  bool operator==(const StepRecord&) const = default;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  double wall_seconds = 0.0;  // not written to the step logs, which stay deterministic
};

void write_log_jsonl(const TrainLog& log, const std::filesystem::path& path);
// Columns: step,loss,lr,mean_active_negatives,masked_qp,masked_qn,masked_qq,masked_pp,batch_size,skipped_rows
void write_loss_curve_csv(const TrainLog& log, const std::filesystem::path& path);

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoint files
  std::optional<TrainerState> resume;    // continue from a saved optimizer state
  std::optional<std::uint64_t> stop_after;  // halt once this many steps are done
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  EncoderParams params;
  TrainerState state;
  TrainLog log;
  std::vector<std::filesystem::path> checkpoints;
  // FullBatch loss of the starting parameters on the first batch. Independent
  // of the strategy, so runs sharing an initialization agree on it.
  double reference_loss = 0.0;
};

/// Seeded, epoch-shuffled training loop. Single-threaded runs are bit-for-bit
/// reproducible; a run resumed from a checkpoint matches the uninterrupted one.
TrainResult train(const std::vector<Triplet>& data, EncoderParams params, const Guide* guide,
                  const TrainConfig& cfg, const TrainOptions& options = {});

/// Batch of triplet indices used at a given step.
std::vector<std::size_t> batch_indices(std::size_t data_size, std::uint64_t step,
                                       const TrainConfig& cfg);

}  // namespace gist
