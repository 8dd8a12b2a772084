#include "gist/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "gist/errors.hpp"
#include "gist/evalkit.hpp"
#include "gist/guide.hpp"
#include "gist/mining.hpp"
#include "gist/rng.hpp"
#include "gist/synthetic.hpp"
#include "gist/trainer.hpp"
#include "jsonl.hpp"

#ifndef GIST_VERSION
#define GIST_VERSION "dev"
#endif

namespace gist::cli {

namespace fs = std::filesystem;
using json = jsonl::json;

namespace {

constexpr KeySpec kSchema[] = {
    // common
    {"seed", "0", "seed for data generation, initialization, shuffling and sampling"},
    {"out_dir", "gist_out", "directory receiving all outputs and run.json"},
    // encoder
    {"dim", "32", "embedding width"},
    {"vocab_slots", "4096", "hash buckets of the token table"},
    {"hash_seed", "0", "token hash seed"},
    {"lowercase", "true", "ASCII case folding before hashing"},
    {"max_tokens", "512", "tokens kept per text"},
    {"init", "", "checkpoint to start from instead of a fresh table"},
    // synthetic
    {"num_clusters", "8", "planted clusters"},
    {"items_per_cluster", "32", "training items per cluster"},
    {"heldout_per_cluster", "", "held-out items per cluster (default items_per_cluster)"},
    {"tokens_per_text", "12", "tokens per synthetic text"},
    {"signature_tokens_per_text", "3", "cluster-signature tokens per text"},
    {"shared_token_pool", "16", "signature tokens per cluster"},
    {"noise_token_pool", "512", "global noise tokens"},
    {"false_negative_rate", "0", "probability a negative comes from the query's cluster"},
    {"flip_positive_rate", "0", "probability a positive comes from another cluster"},
    {"num_triplets", "", "triplets to generate (default one per training item)"},
    {"with_negatives", "true", "false emits (query, positive) pairs only"},
    {"sts_pairs", "200", "sampled pairs in the STS task"},
    // mining
    {"corpus", "", "labeled corpus JSONL"},
    {"embedder", "init", "init | frozen:<ckpt> | precomputed:<store>"},
    {"k_p", "100", "positive pool size"},
    {"k_n", "", "negative pool size (default: every out-of-class item)"},
    {"mining_temperature", "0.05", "softmax temperature over positive similarities"},
    {"repeat", "1", "mining passes over the corpus"},
    // training
    {"data", "", "triplet JSONL"},
    {"strategy", "guided", "assigned | bidirectional | fullbatch | guided"},
    {"guide", "", "frozen:<ckpt> | precomputed:<store> | oracle:<corpus>"},
    {"learning_rate", "5e-6", "peak learning rate"},
    {"warmup_ratio", "0.1", "fraction of steps spent in linear warmup"},
    {"total_steps", "100000", "optimizer steps"},
    {"batch_size", "16", "triplets per batch"},
    {"beta1", "0.9", "Adam first-moment decay"},
    {"beta2", "0.999", "Adam second-moment decay"},
    {"weight_decay", "0", "decoupled weight decay"},
    {"adam_epsilon", "1e-8", "Adam denominator epsilon"},
    {"temperature", "0.01", "contrastive softmax temperature"},
    {"include_pp_rows", "true", "use positive-positive similarities as candidates"},
    {"reduction", "mean", "mean | sum over rows"},
    {"checkpoint_every", "1000", "steps between checkpoints (0: final only)"},
    {"schedule", "linear", "linear | constant after warmup"},
    {"max_grad_norm", "0", "global gradient clipping (0: off)"},
    {"threads", "1", "encoder threads"},
    {"resume", "", "checkpoint with optimizer state to continue from"},
    // evaluation
    {"checkpoint", "", "checkpoint to evaluate"},
    {"suite", "", "task suite manifest"},
    {"knn_k", "5", "neighbors in the classification probe"},
    {"ndcg_k", "10", "retrieval cutoff"},
    // comparison
    {"strategies", "assigned,bidirectional,fullbatch,guided", "comma-separated strategies"},
    {"seeds", "", "comma-separated seeds (default: seed)"},
};

bool known_key(const std::string& key) {
  return std::ranges::any_of(kSchema, [&](const KeySpec& s) { return key == s.key; });
}

void check_key(const std::string& key) {
  if (!known_key(key)) throw ConfigError("unknown config key \"" + key + "\"");
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// Typed, validated view over resolved settings.
class Config {
 public:
  explicit Config(Settings values) : values_(std::move(values)) {}

  const Settings& values() const { return values_; }

  std::string str(const std::string& key) const { return values_.at(key); }
  bool has(const std::string& key) const { return !values_.at(key).empty(); }

  std::string required(const std::string& key) const {
    if (!has(key)) throw ConfigError(key + " is required");
    return str(key);
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string v = required(key);
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      throw ConfigError(key + ": expected a non-negative integer, got \"" + v + "\"");
    }
    return out;
  }

  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  std::optional<std::size_t> opt_size(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return size(key);
  }

  double real(const std::string& key) const {
    const std::string v = required(key);
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
      throw ConfigError(key + ": expected a finite number, got \"" + v + "\"");
    }
    return out;
  }

  bool flag(const std::string& key) const {
    std::string v = required(key);
    std::ranges::transform(v, v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got \"" + v + "\"");
  }

  json to_json() const {
    json out = json::object();
    for (const auto& [k, v] : values_) out[k] = v;
    return out;
  }

 private:
  Settings values_;
};

TokenizerConfig tokenizer_config(const Config& c) {
  TokenizerConfig t;
  t.vocab_slots = c.u64("vocab_slots");
  t.hash_seed = c.u64("hash_seed");
  t.lowercase = c.flag("lowercase");
  t.max_tokens = c.u64("max_tokens");
  t.validate();
  return t;
}

EncoderParams initial_params(const Config& c, std::uint64_t seed) {
  if (c.has("init")) return load_checkpoint(c.str("init")).params;
  return init_encoder(tokenizer_config(c), c.size("dim"), seed);
}

SynthConfig synth_config(const Config& c, std::uint64_t seed) {
  SynthConfig s;
  s.num_clusters = c.size("num_clusters");
  s.items_per_cluster = c.size("items_per_cluster");
  s.heldout_per_cluster = c.opt_size("heldout_per_cluster");
  s.tokens_per_text = c.size("tokens_per_text");
  s.signature_tokens_per_text = c.size("signature_tokens_per_text");
  s.shared_token_pool = c.size("shared_token_pool");
  s.noise_token_pool = c.size("noise_token_pool");
  s.false_negative_rate = c.real("false_negative_rate");
  s.flip_positive_rate = c.real("flip_positive_rate");
  s.num_triplets = c.opt_size("num_triplets");
  s.with_negatives = c.flag("with_negatives");
  s.sts_pairs = c.size("sts_pairs");
  s.seed = seed;
  s.validate();
  return s;
}

TrainConfig train_config(const Config& c, std::uint64_t seed) {
  TrainConfig t;
  t.learning_rate = c.real("learning_rate");
  t.warmup_ratio = c.real("warmup_ratio");
  t.total_steps = c.u64("total_steps");
  t.batch_size = c.size("batch_size");
  t.beta1 = c.real("beta1");
  t.beta2 = c.real("beta2");
  t.weight_decay = c.real("weight_decay");
  t.adam_epsilon = c.real("adam_epsilon");
  t.strategy = parse_strategy(c.str("strategy"));
  t.loss.temperature = c.real("temperature");
  t.loss.include_pp_rows = c.flag("include_pp_rows");
  t.loss.reduction = parse_reduction(c.str("reduction"));
  t.seed = seed;
  t.checkpoint_every = c.u64("checkpoint_every");
  t.schedule = parse_schedule(c.str("schedule"));
  t.max_grad_norm = c.real("max_grad_norm");
  t.threads = static_cast<unsigned>(c.u64("threads"));
  t.validate();
  return t;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const json& value) {
  auto os = jsonl::open_out(path);
  os << value.dump(2) << '\n';
}

// Bookkeeping shared by every command; becomes run.json.
struct Run {
  std::string command;
  const Config& config;
  std::uint64_t seed;
  fs::path out_dir;
  json inputs = json::object();
  json outputs = json::array();
  json notes = json::array();
  std::string started_at = utc_now();

  void output(const fs::path& p) { outputs.push_back(p.generic_string()); }

  void finish() {
    fs::create_directories(out_dir);
    write_json(out_dir / "run.json", {{"command", command},
                                      {"tool_version", GIST_VERSION},
                                      {"seed", seed},
                                      {"config", config.to_json()},
                                      {"inputs", inputs},
                                      {"outputs", outputs},
                                      {"notes", notes},
                                      {"started_at", started_at},
                                      {"finished_at", utc_now()}});
  }
};

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// ---- synth -----------------------------------------------------------------

void cmd_synth(const Config& c, Run& run) {
  const auto corpus = generate(synth_config(c, run.seed));
  for (const auto& note : save_synth(corpus, run.out_dir)) run.notes.push_back(note);
  for (const char* f : {"corpus.jsonl", "triplets.jsonl", "flags.jsonl", "suite/manifest.json"}) {
    run.output(run.out_dir / f);
  }
  const auto contaminated =
      std::ranges::count_if(corpus.flags, [](const TripletFlags& f) { return f.negative_is_contaminated; });
  const auto flipped =
      std::ranges::count_if(corpus.flags, [](const TripletFlags& f) { return f.positive_is_flipped; });
  std::cout << "synth: " << corpus.corpus.items.size() << " items, " << corpus.triplets.size()
            << " triplets (" << contaminated << " contaminated negatives, " << flipped
            << " flipped positives) -> " << run.out_dir.string() << '\n';
}

// ---- mine ------------------------------------------------------------------

void cmd_mine(const Config& c, Run& run) {
  const fs::path corpus_path = c.required("corpus");
  run.inputs["corpus"] = corpus_path.generic_string();
  const auto corpus = load_corpus(corpus_path);

  std::shared_ptr<const TextEmbedder> embedder;
  const std::string spec = c.str("embedder");
  if (spec == "init") {
    embedder = std::make_shared<EncoderEmbedder>(init_encoder(tokenizer_config(c), c.size("dim"), run.seed));
  } else {
    embedder = make_embedder(spec);
  }

  MiningConfig m;
  m.k_p = c.size("k_p");
  m.k_n = c.opt_size("k_n");
  m.temperature = c.real("mining_temperature");
  m.repeat = c.size("repeat");
  m.seed = run.seed;
  const auto result = mine_triplets(corpus, *embedder, m);

  save_triplets(result.triplets, run.out_dir / "triplets.jsonl");
  {
    auto os = jsonl::open_out(run.out_dir / "mined_ids.jsonl");
    for (const auto& id : result.ids) {
      jsonl::write_line(os, {{"query_id", id.query}, {"pos_id", id.positive}, {"neg_id", id.negative}});
    }
  }
  json classes = json::array();
  for (const auto& s : result.plan.classes) {
    classes.push_back({{"label", s.label}, {"items", s.items}, {"queries", s.queries}, {"skipped", s.skipped}});
  }
  write_json(run.out_dir / "mine_stats.json", {{"triplets", result.triplets.size()},
                                               {"queries", result.plan.queries.size()},
                                               {"skipped_ids", result.plan.skipped_ids},
                                               {"classes", classes}});
  for (const char* f : {"triplets.jsonl", "mined_ids.jsonl", "mine_stats.json"}) run.output(run.out_dir / f);
  std::cout << "mine: " << result.triplets.size() << " triplets from " << result.plan.queries.size()
            << " queries (" << result.plan.skipped_ids.size() << " skipped) -> " << run.out_dir.string()
            << '\n';
}

// ---- train -----------------------------------------------------------------

struct TrainedRun {
  TrainResult result;
  fs::path final_checkpoint;
};

TrainedRun train_into(const std::vector<Triplet>& data, EncoderParams params, const Guide* guide,
                      const TrainConfig& cfg, const fs::path& dir, std::optional<TrainerState> resume) {
  TrainOptions opts;
  opts.checkpoint_dir = dir / "checkpoints";
  opts.resume = std::move(resume);
  TrainedRun out{train(data, std::move(params), guide, cfg, opts), {}};
  write_log_jsonl(out.result.log, dir / "train_log.jsonl");
  write_loss_curve_csv(out.result.log, dir / "loss_curve.csv");
  out.final_checkpoint = opts.checkpoint_dir / "final.ckpt";
  return out;
}

void cmd_train(const Config& c, Run& run) {
  const fs::path data_path = c.required("data");
  run.inputs["data"] = data_path.generic_string();
  const auto data = load_triplets(data_path);
  const auto cfg = train_config(c, run.seed);

  std::unique_ptr<Guide> guide;
  if (c.has("guide")) {
    guide = make_guide(c.str("guide"));
    run.inputs["guide"] = c.str("guide");
  }
  if (cfg.strategy == Strategy::Guided && !guide) {
    throw ConfigError("strategy guided needs a guide (set guide=frozen:|precomputed:|oracle:<path>)");
  }

  EncoderParams params;
  std::optional<TrainerState> resume;
  if (c.has("resume")) {
    auto ck = load_checkpoint(c.str("resume"));
    if (!ck.state) throw ConfigError("resume: checkpoint " + c.str("resume") + " has no optimizer state");
    params = std::move(ck.params);
    resume = std::move(ck.state);
    run.inputs["resume"] = c.str("resume");
  } else {
    params = initial_params(c, run.seed);
  }

  const auto trained = train_into(data, std::move(params), guide.get(), cfg, run.out_dir, std::move(resume));
  for (const auto& p : trained.result.checkpoints) run.output(p);
  run.output(run.out_dir / "train_log.jsonl");
  run.output(run.out_dir / "loss_curve.csv");
  const auto& steps = trained.result.log.steps;
  std::cout << "train: " << to_string(cfg.strategy) << ", " << steps.size() << " steps";
  if (!steps.empty()) std::cout << ", final loss " << fmt(steps.back().loss);
  std::cout << " -> " << trained.final_checkpoint.string() << '\n';
}

// ---- eval ------------------------------------------------------------------

void print_report(const EvalReport& r) {
  for (const auto& t : r.tasks) {
    std::cout << "  " << t.name << " " << t.metric << " = " << (t.value ? fmt(*t.value) : "undefined")
              << " (n=" << t.count << ")\n";
  }
  std::cout << "  mean = " << (r.mean ? fmt(*r.mean) : "undefined") << '\n';
}

void cmd_eval(const Config& c, Run& run) {
  const fs::path ckpt = c.required("checkpoint");
  const fs::path suite_path = c.required("suite");
  run.inputs["checkpoint"] = ckpt.generic_string();
  run.inputs["suite"] = suite_path.generic_string();
  const auto suite = load_suite(suite_path);
  const auto params = load_checkpoint(ckpt).params;
  const EvalOptions opts{c.size("knn_k"), c.size("ndcg_k"), run.seed};
  const auto report = evaluate(params, suite, opts, checkpoint_id(ckpt));
  write_report_json(report, run.out_dir / "eval_report.json");
  write_report_csv(report, run.out_dir / "eval_report.csv");
  run.output(run.out_dir / "eval_report.json");
  run.output(run.out_dir / "eval_report.csv");
  std::cout << "eval: " << report.tasks.size() << " tasks\n";
  print_report(report);
}

// ---- compare ---------------------------------------------------------------

struct CompareCell {
  Strategy strategy;
  std::uint64_t seed;
  double step0_loss;
  double final_loss;
  EvalReport report;
};

void cmd_compare(const Config& c, Run& run) {
  std::vector<Strategy> strategies;
  for (const auto& s : split_list(c.str("strategies"))) strategies.push_back(parse_strategy(s));
  if (strategies.empty()) throw ConfigError("strategies is empty");
  std::vector<std::uint64_t> seeds;
  if (c.has("seeds")) {
    for (const auto& s : split_list(c.str("seeds"))) {
      Settings one{{"seeds", s}};
      seeds.push_back(Config(one).u64("seeds"));
    }
  } else {
    seeds.push_back(run.seed);
  }
  if (seeds.empty()) throw ConfigError("seeds is empty");

  const EvalOptions eval_opts{c.size("knn_k"), c.size("ndcg_k"), 0};
  std::vector<CompareCell> cells;
  for (std::uint64_t seed : seeds) {
    const fs::path seed_dir = run.out_dir / ("seed_" + std::to_string(seed));
    std::vector<Triplet> data;
    TaskSuite suite;
    std::string guide_spec = c.str("guide");
    if (c.has("data")) {
      data = load_triplets(c.str("data"));
      suite = load_suite(c.required("suite"));
    } else {
      const auto synth = generate(synth_config(c, seed));
      for (const auto& note : save_synth(synth, seed_dir / "data")) run.notes.push_back(note);
      data = synth.triplets;
      suite = to_eval_suite(synth).suite;
      if (guide_spec.empty()) guide_spec = "oracle:" + (seed_dir / "data" / "corpus.jsonl").string();
    }
    std::unique_ptr<Guide> guide;
    if (!guide_spec.empty()) guide = make_guide(guide_spec);

    const EncoderParams init = initial_params(c, seed);
    for (Strategy s : strategies) {
      const auto cfg = train_config(c, seed);
      TrainConfig run_cfg = cfg;
      run_cfg.strategy = s;
      const fs::path dir = seed_dir / std::string(to_string(s));
      const auto trained = train_into(data, init, guide.get(), run_cfg, dir, std::nullopt);
      auto opts = eval_opts;
      opts.seed = seed;
      auto report = evaluate(trained.result.params, suite, opts, checkpoint_id(trained.final_checkpoint));
      write_report_json(report, dir / "eval_report.json");
      const fs::path curve = run.out_dir / "curves" / (std::string(to_string(s)) + "_seed" + std::to_string(seed) + ".csv");
      write_loss_curve_csv(trained.result.log, curve);
      run.output(curve);
      const auto& steps = trained.result.log.steps;
      cells.push_back({s, seed, trained.result.reference_loss, steps.empty() ? 0.0 : steps.back().loss,
                       std::move(report)});
      std::cout << "compare: seed " << seed << " " << to_string(s) << " step0 loss "
                << fmt(cells.back().step0_loss) << ", mean "
                << (cells.back().report.mean ? fmt(*cells.back().report.mean) : "undefined") << '\n';
    }
  }

  // Task columns in first-seen order.
  std::vector<std::pair<std::string, std::string>> columns;  // name, metric
  for (const auto& cell : cells) {
    for (const auto& t : cell.report.tasks) {
      if (std::ranges::find(columns, std::pair{t.name, t.metric}) == columns.end()) {
        columns.emplace_back(t.name, t.metric);
      }
    }
  }
  auto task_value = [](const EvalReport& r, const std::string& name) -> std::optional<double> {
    for (const auto& t : r.tasks) {
      if (t.name == name) return t.value;
    }
    return std::nullopt;
  };

  {
    auto os = jsonl::open_out(run.out_dir / "runs.csv");
    os << "strategy,seed,step0_loss,final_loss,mean";
    for (const auto& [name, metric] : columns) os << ',' << name << ':' << metric;
    os << '\n';
    for (const auto& cell : cells) {
      os << to_string(cell.strategy) << ',' << cell.seed << ',' << fmt(cell.step0_loss, "%.17g") << ','
         << fmt(cell.final_loss, "%.17g") << ',' << (cell.report.mean ? fmt(*cell.report.mean, "%.17g") : "");
      for (const auto& col : columns) {
        const auto v = task_value(cell.report, col.first);
        os << ',' << (v ? fmt(*v, "%.17g") : "");
      }
      os << '\n';
    }
  }

  json rows = json::array();
  std::map<Strategy, std::optional<double>> retrieval_median;
  auto opt_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto csv = jsonl::open_out(run.out_dir / "comparison.csv");
  csv << "strategy,runs,step0_loss,final_loss,mean";
  for (const auto& [name, metric] : columns) csv << ',' << name << ':' << metric;
  csv << '\n';
  for (Strategy s : strategies) {
    std::vector<double> step0, final_loss, mean;
    std::map<std::string, std::vector<double>> per_task;
    std::size_t runs = 0;
    for (const auto& cell : cells) {
      if (cell.strategy != s) continue;
      ++runs;
      step0.push_back(cell.step0_loss);
      final_loss.push_back(cell.final_loss);
      if (cell.report.mean) mean.push_back(*cell.report.mean);
      for (const auto& t : cell.report.tasks) {
        if (t.value) per_task[t.name].push_back(*t.value);
      }
    }
    json tasks = json::object();
    csv << to_string(s) << ',' << runs << ',' << fmt(*median(step0), "%.17g") << ','
        << fmt(*median(final_loss), "%.17g") << ',';
    const auto mean_median = median(mean);
    csv << (mean_median ? fmt(*mean_median, "%.17g") : "");
    for (const auto& [name, metric] : columns) {
      const auto m = median(per_task[name]);
      tasks[name] = {{"metric", metric}, {"median", opt_json(m)}};
      csv << ',' << (m ? fmt(*m, "%.17g") : "");
    }
    csv << '\n';
    for (const auto& cell : cells) {
      if (cell.strategy != s) continue;
      for (const auto& t : cell.report.tasks) {
        if (t.kind == TaskKind::Retrieval) {
          retrieval_median[s] = median(per_task[t.name]);
          break;
        }
      }
      break;
    }
    rows.push_back({{"strategy", to_string(s)},
                    {"runs", runs},
                    {"step0_loss", *median(step0)},
                    {"final_loss", *median(final_loss)},
                    {"mean", opt_json(mean_median)},
                    {"tasks", tasks}});
  }

  json deltas = json::object();
  std::string headline;
  if (retrieval_median.contains(Strategy::Guided) && retrieval_median[Strategy::Guided]) {
    for (Strategy s : strategies) {
      if (s == Strategy::Guided || !retrieval_median[s]) continue;
      const double d = *retrieval_median[Strategy::Guided] - *retrieval_median[s];
      const std::string sign = d > 0 ? "+" : (d < 0 ? "-" : "0");
      deltas[std::string(to_string(s))] = {{"delta", d}, {"sign", sign}};
      if (s == Strategy::FullBatch) headline = "guided - fullbatch retrieval delta: " + fmt(d, "%+.6f");
    }
  }

  json per_run = json::array();
  for (const auto& cell : cells) {
    json tasks = json::object();
    for (const auto& t : cell.report.tasks) tasks[t.name] = opt_json(t.value);
    per_run.push_back({{"strategy", to_string(cell.strategy)},
                       {"seed", cell.seed},
                       {"step0_loss", cell.step0_loss},
                       {"final_loss", cell.final_loss},
                       {"mean", opt_json(cell.report.mean)},
                       {"tasks", tasks}});
  }
  write_json(run.out_dir / "comparison.json", {{"seeds", seeds},
                                               {"aggregate", "median"},
                                               {"strategies", rows},
                                               {"guided_retrieval_delta", deltas},
                                               {"runs", per_run}});
  for (const char* f : {"comparison.csv", "comparison.json", "runs.csv"}) run.output(run.out_dir / f);
  std::cout << "compare: " << rows.size() << " strategies x " << seeds.size() << " seeds -> "
            << (run.out_dir / "comparison.csv").string() << '\n';
  if (!headline.empty()) std::cout << headline << '\n';
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const DataError*>(&e)) return kData;
  if (dynamic_cast<const ContractError*>(&e)) return kContract;
  return kFailure;
}

}  // namespace

std::span<const KeySpec> config_schema() { return kSchema; }

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::ranges::sort(values);
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Settings read_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  Settings out;
  if (path.extension() == ".json") {
    const json manifest = jsonl::read_json(path);
    if (!manifest.is_object() || !manifest.contains("config") || !manifest["config"].is_object()) {
      throw ConfigError(path.string() + ": not a run manifest (no \"config\" object)");
    }
    for (const auto& [k, v] : manifest["config"].items()) {
      check_key(k);
      out[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return out;
  }
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path.string());
  } catch (const CLI::Error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    check_key(item.name);
    std::string value;
    for (const auto& in : item.inputs) value += (value.empty() ? "" : ",") + trim(in);
    out[item.name] = value;
  }
  return out;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Guided in-batch negative selection for contrastive embedding training", "gist"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GIST_VERSION);

  struct Sub {
    CLI::App* app;
    void (*fn)(const Config&, Run&);
    std::vector<std::pair<std::string, CLI::Option*>> flags;  // key, option
  };
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<Sub> subs;

  auto add = [&](const char* name, const char* help, void (*fn)(const Config&, Run&),
                 std::vector<std::pair<const char*, const char*>> extra) {
    Sub s{app.add_subcommand(name, help), fn, {}};
    s.app->add_option("--config", config_path, "key=value file or run.json manifest");
    s.app->add_option("--set", sets, "override one key: --set key=value (repeatable)");
    auto flag = [&](const char* opt, const char* key, const char* h) {
      s.flags.emplace_back(key, s.app->add_option(opt)->description(h));
    };
    flag("--seed", "seed", "seed");
    flag("--out-dir", "out_dir", "output directory");
    for (const auto& [opt, key] : extra) flag(opt, key, key);
    subs.push_back(std::move(s));
  };
  add("synth", "generate a planted-cluster corpus, triplets and eval suite", cmd_synth, {});
  add("mine", "mine triplets from a labeled corpus", cmd_mine,
      {{"--corpus", "corpus"}, {"--embedder", "embedder"}});
  add("train", "train the encoder under a selection strategy", cmd_train,
      {{"--data", "data"}, {"--strategy", "strategy"}, {"--guide", "guide"}, {"--steps", "total_steps"},
       {"--init", "init"}, {"--resume", "resume"}});
  add("eval", "evaluate a checkpoint on a task suite", cmd_eval,
      {{"--checkpoint", "checkpoint"}, {"--suite", "suite"}});
  add("compare", "train every strategy from one initialization and compare", cmd_compare,
      {{"--strategies", "strategies"}, {"--seeds", "seeds"}, {"--data", "data"}, {"--guide", "guide"},
       {"--suite", "suite"}, {"--steps", "total_steps"}});

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  for (const auto& sub : subs) {
    if (!sub.app->parsed()) continue;
    try {
      Settings values;
      for (const auto& spec : kSchema) values[spec.key] = spec.fallback;
      if (!config_path.empty()) {
        for (auto& [k, v] : read_config_file(config_path)) values[k] = v;
      }
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + s + "\"");
        const std::string key = trim(s.substr(0, eq));
        check_key(key);
        values[key] = trim(s.substr(eq + 1));
      }
      for (const auto& [key, opt] : sub.flags) {
        if (opt->count() > 0) values[key] = opt->as<std::string>();
      }
      const Config config(std::move(values));
      Run r{sub.app->get_name(), config, config.u64("seed"), config.required("out_dir")};
      if (!config_path.empty()) r.inputs["config"] = config_path;
      sub.fn(config, r);
      r.finish();
      return kOk;
    } catch (const std::exception& e) {
      std::cerr << "gist " << sub.app->get_name() << ": error: " << e.what() << '\n';
      return exit_code_for(e);
    }
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace gist::cli
