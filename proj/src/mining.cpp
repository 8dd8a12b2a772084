#include "gist/mining.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace gist {

void MiningConfig::validate() const {
  if (k_p < 1) throw ConfigError("k_p must be >= 1");
  if (k_n && *k_n < 1) throw ConfigError("k_n must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("mining temperature must be positive");
  if (repeat < 1) throw ConfigError("repeat must be >= 1");
}

std::vector<double> positive_weights(std::span<const double> thetas, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("mining temperature must be positive");
  std::vector<double> logits(thetas.begin(), thetas.end());
  for (double& x : logits) x /= temperature;
  return masked_softmax(logits);
}

namespace {

struct Scored {
  std::size_t index;
  std::uint64_t id;
  double sim;
};

// Similarity descending, then ascending id.
void rank(std::vector<Scored>& v) {
  std::ranges::sort(v, [](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
  });
}

}  // namespace

MiningPlan plan_mining(const LabeledCorpus& corpus, const TextEmbedder& embedder,
                       const MiningConfig& cfg) {
  cfg.validate();
  corpus.validate();
  const auto& items = corpus.items;
  std::vector<std::string> texts;
  texts.reserve(items.size());
  for (const auto& it : items) texts.push_back(it.text);
  const Matrix emb = embedder.embed(texts);

  std::map<std::string, ClassStats> stats;
  for (const auto& it : items) {
    auto& s = stats[it.label];
    s.label = it.label;
    ++s.items;
  }

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return items[a].id < items[b].id; });

  MiningPlan plan;
  for (std::size_t qi : order) {
    const auto& q = items[qi];
    auto& s = stats[q.label];
    if (s.items < 2) {
      ++s.skipped;
      plan.skipped_ids.push_back(q.id);
      continue;
    }
    std::vector<Scored> same, other;
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (j == qi) continue;
      Scored sc{j, items[j].id, dot(emb.row(qi), emb.row(j))};
      (items[j].label == q.label ? same : other).push_back(sc);
    }
    rank(same);
    rank(other);
    same.resize(std::min(same.size(), cfg.k_p));
    if (cfg.k_n) other.resize(std::min(other.size(), *cfg.k_n));

    QueryPlan qp;
    qp.query = qi;
    for (const auto& sc : same) {
      qp.positives.push_back(sc.index);
      qp.positive_similarities.push_back(sc.sim);
    }
    qp.positive_weights = positive_weights(qp.positive_similarities, cfg.temperature);
    for (const auto& sc : other) qp.negatives.push_back(sc.index);
    ++s.queries;
    plan.queries.push_back(std::move(qp));
  }
  for (auto& [label, s] : stats) plan.classes.push_back(s);
  return plan;
}

std::size_t sample_positive(const QueryPlan& plan, Rng& rng) {
  if (plan.positives.empty()) throw ContractError("sample_positive: empty pool");
  const double u = rng.uniform01();
  double cum = 0.0;
  for (std::size_t k = 0; k < plan.positives.size(); ++k) {
    cum += plan.positive_weights[k];
    if (u < cum) return plan.positives[k];
  }
  // Rounding left the cumulative sum a hair below 1.
  return plan.positives.back();
}

std::size_t sample_negative(const QueryPlan& plan, Rng& rng) {
  if (plan.negatives.empty()) throw ContractError("sample_negative: empty pool");
  return plan.negatives[rng.index(plan.negatives.size())];
}

MiningResult mine_triplets(const LabeledCorpus& corpus, const TextEmbedder& embedder,
                           const MiningConfig& cfg) {
  MiningResult out;
  out.plan = plan_mining(corpus, embedder, cfg);
  Rng rng(cfg.seed);
  const auto& items = corpus.items;
  for (std::size_t pass = 0; pass < cfg.repeat; ++pass) {
    for (const auto& qp : out.plan.queries) {
      const std::size_t pos = sample_positive(qp, rng);
      const std::size_t neg = sample_negative(qp, rng);
      out.triplets.push_back({items[qp.query].text, items[pos].text, items[neg].text, std::nullopt});
      out.ids.push_back({items[qp.query].id, items[pos].id, items[neg].id});
    }
  }
  return out;
}

}  // namespace gist
