#include "gist/synthetic.hpp"

#include <cstdio>
#include <map>

#include "gist/errors.hpp"
#include "gist/rng.hpp"
#include "jsonl.hpp"

namespace gist {

void SynthConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw ConfigError(field + " " + rule);
  };
  if (num_clusters < 2) fail("num_clusters", "must be >= 2");
  if (items_per_cluster < 2) fail("items_per_cluster", "must be >= 2");
  if (tokens_per_text < 1) fail("tokens_per_text", "must be >= 1");
  if (signature_tokens_per_text < 1 || signature_tokens_per_text > tokens_per_text) {
    fail("signature_tokens_per_text", "must be in [1, tokens_per_text]");
  }
  if (shared_token_pool < 1) fail("shared_token_pool", "must be >= 1");
  if (noise_token_pool < 1) fail("noise_token_pool", "must be >= 1");
  if (!(false_negative_rate >= 0.0 && false_negative_rate <= 1.0)) {
    fail("false_negative_rate", "must be in [0, 1]");
  }
  if (!(flip_positive_rate >= 0.0 && flip_positive_rate <= 1.0)) {
    fail("flip_positive_rate", "must be in [0, 1]");
  }
  if (num_triplets && *num_triplets < 1) fail("num_triplets", "must be >= 1");
}

namespace {

std::string cluster_label(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cluster_%02zu", c);
  return buf;
}

std::string make_text(std::size_t cluster, const SynthConfig& cfg, Rng& rng) {
  std::vector<std::string> tokens;
  tokens.reserve(cfg.tokens_per_text);
  for (std::size_t i = 0; i < cfg.signature_tokens_per_text; ++i) {
    tokens.push_back("c" + std::to_string(cluster) + "s" + std::to_string(rng.index(cfg.shared_token_pool)));
  }
  while (tokens.size() < cfg.tokens_per_text) {
    tokens.push_back("n" + std::to_string(rng.index(cfg.noise_token_pool)));
  }
  rng.shuffle(std::span<std::string>(tokens));
  std::string text;
  for (const auto& t : tokens) {
    if (!text.empty()) text += ' ';
    text += t;
  }
  return text;
}

// Uniform pick from `pool` that differs from `avoid` when possible.
std::size_t pick_other(const std::vector<std::size_t>& pool, std::size_t avoid, Rng& rng) {
  if (pool.size() == 1) return pool[0];
  for (;;) {
    const std::size_t v = pool[rng.index(pool.size())];
    if (v != avoid) return v;
  }
}

}  // namespace

SynthCorpus generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthCorpus out;
  out.config = cfg;
  Rng text_rng(derive_seed(cfg.seed, 1));
  Rng triplet_rng(derive_seed(cfg.seed, 2));

  std::vector<std::vector<std::size_t>> members(cfg.num_clusters);
  std::uint64_t next_id = 0;
  auto add_items = [&](std::size_t per_cluster, const char* split) {
    for (std::size_t c = 0; c < cfg.num_clusters; ++c) {
      for (std::size_t i = 0; i < per_cluster; ++i) {
        if (std::string(split) == "train") members[c].push_back(out.corpus.items.size());
        out.corpus.items.push_back({next_id++, make_text(c, cfg, text_rng), cluster_label(c), split});
      }
    }
  };
  add_items(cfg.items_per_cluster, "train");
  add_items(cfg.heldout(), "heldout");

  const auto& items = out.corpus.items;
  const std::size_t n_train = cfg.num_clusters * cfg.items_per_cluster;
  for (std::size_t t = 0; t < cfg.triplet_count(); ++t) {
    const std::size_t q = triplet_rng.index(n_train);
    const std::size_t qc = q / cfg.items_per_cluster;
    TripletFlags f;
    f.query_id = items[q].id;

    std::size_t pos;
    if (triplet_rng.bernoulli(cfg.flip_positive_rate)) {
      std::size_t other = triplet_rng.index(cfg.num_clusters - 1);
      if (other >= qc) ++other;
      pos = members[other][triplet_rng.index(members[other].size())];
    } else {
      pos = pick_other(members[qc], q, triplet_rng);
    }
    f.positive_id = items[pos].id;
    f.positive_is_flipped = items[pos].label != items[q].label;

    Triplet trip{items[q].text, items[pos].text, std::nullopt, std::nullopt};
    if (cfg.with_negatives) {
      std::size_t neg;
      if (triplet_rng.bernoulli(cfg.false_negative_rate)) {
        neg = pick_other(members[qc], q, triplet_rng);
      } else {
        std::size_t other = triplet_rng.index(cfg.num_clusters - 1);
        if (other >= qc) ++other;
        neg = members[other][triplet_rng.index(members[other].size())];
      }
      f.negative_id = items[neg].id;
      f.negative_is_contaminated = items[neg].label == items[q].label;
      trip.negative = items[neg].text;
    }
    out.triplets.push_back(std::move(trip));
    out.flags.push_back(f);
  }
  return out;
}

SynthSuite to_eval_suite(const SynthCorpus& corpus) {
  const auto& items = corpus.corpus.items;
  std::map<std::string, std::vector<std::size_t>> heldout;
  ClassificationTask cls;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].split == "heldout") {
      heldout[items[i].label].push_back(i);
      cls.test_texts.push_back(items[i].text);
      cls.test_labels.push_back(items[i].label);
    } else {
      cls.train_texts.push_back(items[i].text);
      cls.train_labels.push_back(items[i].label);
    }
  }
  if (heldout.empty()) throw DataError("corpus has no held-out items");

  SynthSuite out;
  RetrievalTask ret;
  std::vector<std::size_t> pool;
  for (const auto& [label, idx] : heldout) {
    for (std::size_t i : idx) {
      ret.doc_ids.push_back("h" + std::to_string(items[i].id));
      ret.doc_texts.push_back(items[i].text);
      pool.push_back(i);
    }
  }
  for (const auto& [label, idx] : heldout) {
    if (idx.size() < 2) {
      out.notes.push_back("retrieval: " + label + " has fewer than 2 held-out items; excluded");
      continue;
    }
    for (std::size_t i : idx) {
      const std::string self = "h" + std::to_string(items[i].id);
      RetrievalQuery q{"q" + std::to_string(items[i].id), items[i].text, {}, {self}};
      for (std::size_t j : idx) {
        if (j != i) q.gains["h" + std::to_string(items[j].id)] = 1.0;
      }
      ret.queries.push_back(std::move(q));
    }
  }

  StsTask sts;
  Rng rng(derive_seed(corpus.config.seed, 3));
  if (pool.size() >= 2) {
    for (std::size_t k = 0; k < corpus.config.sts_pairs; ++k) {
      const std::size_t a = pool[rng.index(pool.size())];
      std::size_t b = pool[rng.index(pool.size() - 1)];
      if (b == a) b = pool.back();
      sts.pairs.push_back({items[a].text, items[b].text, items[a].label == items[b].label ? 1.0 : 0.0});
    }
  }

  out.suite.tasks.push_back({"synthetic_retrieval", TaskKind::Retrieval, "retrieval.jsonl", std::move(ret)});
  out.suite.tasks.push_back(
      {"synthetic_classification", TaskKind::Classification, "classification.jsonl", std::move(cls)});
  out.suite.tasks.push_back({"synthetic_sts", TaskKind::Sts, "sts.jsonl", std::move(sts)});
  return out;
}

void save_flags(const std::vector<TripletFlags>& flags, const std::filesystem::path& path) {
  auto os = jsonl::open_out(path);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const auto& f = flags[i];
    jsonl::json r = {{"index", i},
                     {"negative_is_contaminated", f.negative_is_contaminated},
                     {"positive_is_flipped", f.positive_is_flipped},
                     {"query_id", f.query_id},
                     {"pos_id", f.positive_id}};
    if (f.negative_id) r["neg_id"] = *f.negative_id;
    jsonl::write_line(os, r);
  }
}

std::vector<TripletFlags> load_flags(const std::filesystem::path& path) {
  std::vector<TripletFlags> out;
  jsonl::for_each(path, [&](const jsonl::json& r, std::size_t) {
    TripletFlags f;
    f.negative_is_contaminated = r.at("negative_is_contaminated").get<bool>();
    f.positive_is_flipped = r.at("positive_is_flipped").get<bool>();
    f.query_id = r.at("query_id").get<std::uint64_t>();
    f.positive_id = r.at("pos_id").get<std::uint64_t>();
    if (r.contains("neg_id")) f.negative_id = r["neg_id"].get<std::uint64_t>();
    out.push_back(f);
  });
  return out;
}

std::vector<std::string> save_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  save_corpus(corpus.corpus, dir / "corpus.jsonl");
  save_triplets(corpus.triplets, dir / "triplets.jsonl");
  save_flags(corpus.flags, dir / "flags.jsonl");
  auto suite = to_eval_suite(corpus);
  save_suite(suite.suite, dir / "suite" / "manifest.json");
  return suite.notes;
}

}  // namespace gist
