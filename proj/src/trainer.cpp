#include "gist/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gist/rng.hpp"
#include "jsonl.hpp"

namespace gist {

std::string_view to_string(Schedule s) { return s == Schedule::Linear ? "linear" : "constant"; }

Schedule parse_schedule(std::string_view name) {
  if (name == "linear") return Schedule::Linear;
  if (name == "constant") return Schedule::Constant;
  throw ConfigError("unknown schedule \"" + std::string(name) + "\" (expected linear|constant)");
}

std::uint64_t TrainConfig::warmup_steps() const {
  return static_cast<std::uint64_t>(std::llround(warmup_ratio * static_cast<double>(total_steps)));
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw ConfigError("warmup_ratio must be in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be >= 0");
  loss.validate();
}

double lr_at(std::uint64_t step, const TrainConfig& cfg) {
  if (step >= cfg.total_steps) {
    throw ContractError("lr_at: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(cfg.total_steps) + ")");
  }
  const std::uint64_t warmup = cfg.warmup_steps();
  if (step < warmup) {
    return cfg.learning_rate * (static_cast<double>(step) / static_cast<double>(warmup));
  }
  if (cfg.schedule == Schedule::Constant) return cfg.learning_rate;
  return cfg.learning_rate *
         (static_cast<double>(cfg.total_steps - step) / static_cast<double>(cfg.total_steps - warmup));
}

void adamw_step(Matrix& params, const Matrix& grads, TrainerState& state, double lr,
                const TrainConfig& cfg) {
  if (grads.rows() != params.rows() || grads.cols() != params.cols()) {
    throw ContractError("adamw_step: gradient shape does not match parameters");
  }
  if (state.first_moment.empty()) {
    state.first_moment = Matrix(params.rows(), params.cols());
    state.second_moment = Matrix(params.rows(), params.cols());
  } else if (state.first_moment.size() != params.size()) {
    throw ContractError("adamw_step: optimizer state shape does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;
  auto& p = params.values();
  const auto& g = grads.values();
  auto& m = state.first_moment.values();
  auto& v = state.second_moment.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    p[k] = p[k] * decay - lr * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
  }
}

BatchResult evaluate_batch(std::span<const Triplet> batch, const EncoderParams& params,
                           const Guide* guide, Strategy strategy, const LossConfig& loss_cfg,
                           unsigned threads) {
  if (batch.empty()) throw ContractError("evaluate_batch: empty batch");
  const std::size_t n = batch.size();
  const auto neg_cols = negative_columns(batch);
  const std::size_t m = neg_cols.size();

  // Text order: queries, positives, negatives.
  std::vector<std::string> texts;
  texts.reserve(2 * n + m);
  for (const auto& t : batch) texts.push_back(t.query);
  for (const auto& t : batch) texts.push_back(t.positive);
  for (std::size_t j : neg_cols) texts.push_back(*batch[j].negative);
  const EncodedBatch enc = forward(texts, params, threads);

  const std::size_t dim = params.dim();
  auto slice = [&](std::size_t begin, std::size_t count) {
    Matrix out(count, dim);
    for (std::size_t r = 0; r < count; ++r) {
      std::ranges::copy(enc.embeddings.row(begin + r), out.row(r).begin());
    }
    return out;
  };
  const Matrix q = slice(0, n);
  const Matrix p = slice(n, n);
  const Matrix neg = slice(2 * n, m);

  ModelSimBlock model{similarity_block(q, p, &neg), std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) model.skip_rows[i] = enc.degenerate[i] || enc.degenerate[n + i];

  std::optional<GuideSimBlock> guide_block;
  if (strategy == Strategy::Guided) {
    if (!guide) throw ConfigError("strategy guided needs a guide");
    guide_block = guide->similarities(batch);
  }

  BatchResult out;
  out.mask = build_masks(model.sims, guide_block ? &*guide_block : nullptr, strategy);
  out.loss = contrastive_loss(model, out.mask, loss_cfg);

  const EmbeddingGrads eg = backprop_to_embeddings(out.loss.grad, q, p, neg);
  Matrix grad_emb(texts.size(), dim);
  auto put = [&](const Matrix& src, std::size_t begin) {
    for (std::size_t r = 0; r < src.rows(); ++r) {
      std::ranges::copy(src.row(r), grad_emb.row(begin + r).begin());
    }
  };
  put(eg.queries, 0);
  put(eg.positives, n);
  put(eg.negatives, 2 * n);

  GradAccumulator acc(params);
  backward(enc, grad_emb, params, acc);
  out.grad_table = std::move(acc.grad_table);
  return out;
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t data_size, std::uint64_t epoch, std::uint64_t seed) {
  std::vector<std::size_t> order(data_size);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, epoch));
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

std::uint64_t batches_per_epoch(std::size_t data_size, std::size_t batch_size) {
  return (data_size + batch_size - 1) / batch_size;
}

std::vector<std::size_t> slice_batch(const std::vector<std::size_t>& order, std::uint64_t b,
                                     std::size_t batch_size) {
  const std::size_t begin = b * batch_size;
  const std::size_t end = std::min(order.size(), begin + batch_size);
  return {order.begin() + static_cast<std::ptrdiff_t>(begin),
          order.begin() + static_cast<std::ptrdiff_t>(end)};
}

void clip_global_norm(Matrix& grad, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = l2_norm(grad.values());
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (double& x : grad.values()) x *= s;
}

std::string checkpoint_name(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%08llu.ckpt", static_cast<unsigned long long>(step));
  return buf;
}

}  // namespace

std::vector<std::size_t> batch_indices(std::size_t data_size, std::uint64_t step,
                                       const TrainConfig& cfg) {
  if (data_size == 0) throw ContractError("batch_indices: no data");
  const std::uint64_t per_epoch = batches_per_epoch(data_size, cfg.batch_size);
  return slice_batch(epoch_order(data_size, step / per_epoch, cfg.seed), step % per_epoch,
                     cfg.batch_size);
}

TrainResult train(const std::vector<Triplet>& data, EncoderParams params, const Guide* guide,
                  const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  params.validate();
  if (data.empty()) throw DataError("no training triplets");
  if (cfg.strategy == Strategy::Guided && !guide) {
    throw ConfigError("strategy guided needs a guide");
  }
  if (cfg.strategy == Strategy::Assigned && !all_have_negatives(data)) {
    throw ConfigError("strategy assigned needs an assigned negative in every triplet");
  }

  const auto started = std::chrono::steady_clock::now();
  TrainResult result;
  result.state = options.resume.value_or(TrainerState{});
  const std::uint64_t start = result.state.step;
  const std::uint64_t stop =
      options.stop_after ? std::min(cfg.total_steps, *options.stop_after) : cfg.total_steps;
  const std::uint64_t per_epoch = batches_per_epoch(data.size(), cfg.batch_size);

  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> order;
  std::vector<Triplet> batch;
  auto load_batch = [&](std::uint64_t step) {
    const std::uint64_t epoch = step / per_epoch;
    if (epoch != cached_epoch) {
      order = epoch_order(data.size(), epoch, cfg.seed);
      cached_epoch = epoch;
    }
    batch.clear();
    for (std::size_t idx : slice_batch(order, step % per_epoch, cfg.batch_size)) {
      batch.push_back(data[idx]);
    }
  };

  if (start < cfg.total_steps) {
    load_batch(start);
    result.reference_loss =
        evaluate_batch(batch, params, nullptr, Strategy::FullBatch, cfg.loss, cfg.threads).loss.value;
  }

  for (std::uint64_t step = start; step < stop; ++step) {
    load_batch(step);
    BatchResult br = evaluate_batch(batch, params, guide, cfg.strategy, cfg.loss, cfg.threads);
    clip_global_norm(br.grad_table, cfg.max_grad_norm);
    const double lr = lr_at(step, cfg);
    adamw_step(params.table, br.grad_table, result.state, lr, cfg);

    StepRecord rec;
    rec.step = step;
    rec.loss = br.loss.value;
    rec.lr = lr;
    rec.batch_size = batch.size();
    rec.skipped_rows = batch.size() - br.loss.rows_used;
    std::size_t active = 0;
    for (std::size_t c : br.loss.active_negative_counts) active += c;
    rec.mean_active_negatives =
        br.loss.rows_used ? static_cast<double>(active) / static_cast<double>(br.loss.rows_used) : 0.0;
    for (std::size_t k = 0; k < 4; ++k) rec.masked_fraction[k] = masked_fraction(br.mask, kBlocks[k]);
    result.log.steps.push_back(rec);
    if (options.on_step) options.on_step(rec);

    const std::uint64_t done = step + 1;
    if (!options.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        done % cfg.checkpoint_every == 0) {
      auto path = options.checkpoint_dir / checkpoint_name(done);
      save_checkpoint(path, params, &result.state);
      result.checkpoints.push_back(path);
    }
  }

  if (!options.checkpoint_dir.empty()) {
    auto path = options.checkpoint_dir / "final.ckpt";
    save_checkpoint(path, params, result.state.first_moment.empty() ? nullptr : &result.state);
    result.checkpoints.push_back(path);
  }
  result.params = std::move(params);
  result.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void write_log_jsonl(const TrainLog& log, const std::filesystem::path& path) {
  auto os = jsonl::open_out(path);
  for (const auto& r : log.steps) {
    jsonl::json masked;
    for (std::size_t k = 0; k < 4; ++k) masked[std::string(to_string(kBlocks[k]))] = r.masked_fraction[k];
    jsonl::write_line(os, {{"step", r.step},
                           {"loss", r.loss},
                           {"lr", r.lr},
                           {"mean_active_negatives", r.mean_active_negatives},
                           {"masked_fraction", masked},
                           {"batch_size", r.batch_size},
                           {"skipped_rows", r.skipped_rows}});
  }
}

void write_loss_curve_csv(const TrainLog& log, const std::filesystem::path& path) {
  auto os = jsonl::open_out(path);
  os << "step,loss,lr,mean_active_negatives,masked_qp,masked_qn,masked_qq,masked_pp,batch_size,"
        "skipped_rows\n";
  char buf[512];
  for (const auto& r : log.steps) {
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu\n",
                  static_cast<unsigned long long>(r.step), r.loss, r.lr, r.mean_active_negatives,
                  r.masked_fraction[0], r.masked_fraction[1], r.masked_fraction[2],
                  r.masked_fraction[3], r.batch_size, r.skipped_rows);
    os << buf;
  }
}

}  // namespace gist
