#include "gist/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "gist/rng.hpp"
#include "jsonl.hpp"

namespace gist {

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) throw ContractError("spearman: length mismatch");
  if (pred.size() < 2) throw ContractError("spearman: need at least 2 pairs");
  const auto rp = fractional_ranks(pred);
  const auto rg = fractional_ranks(gold);
  const double n = static_cast<double>(rp.size());
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const double dx = rp[i] - mp, dy = rg[i] - mg;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double ndcg_at_k(std::span<const std::string> ranking,
                 const std::unordered_map<std::string, double>& gains, std::size_t k) {
  if (k < 1) throw ContractError("ndcg_at_k: k must be >= 1");
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
    auto it = gains.find(ranking[r]);
    if (it != gains.end()) dcg += it->second / std::log2(static_cast<double>(r) + 2.0);
  }
  std::vector<double> ideal;
  for (const auto& [id, g] : gains) {
    if (g > 0.0) ideal.push_back(g);
  }
  std::ranges::sort(ideal, std::greater<>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r) {
    idcg += ideal[r] / std::log2(static_cast<double>(r) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double average_precision(std::span<const std::string> ranking,
                         const std::unordered_set<std::string>& relevant) {
  if (relevant.empty()) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (relevant.contains(ranking[r])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

std::optional<double> mean_average_precision(
    std::span<const std::vector<std::string>> rankings,
    std::span<const std::unordered_set<std::string>> relevant) {
  if (rankings.size() != relevant.size()) throw ContractError("mean_average_precision: length mismatch");
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    if (relevant[q].empty()) continue;
    sum += average_precision(rankings[q], relevant[q]);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return sum / static_cast<double>(used);
}

namespace {

// Indices of the k rows of `rows` most similar to `query`, best first.
std::vector<std::size_t> nearest(const Matrix& rows, std::span<const double> query, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored(rows.rows());
  for (std::size_t j = 0; j < rows.rows(); ++j) scored[j] = {dot(query, rows.row(j)), j};
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = scored[i].second;
  return out;
}

}  // namespace

double knn_accuracy(const Matrix& train, std::span<const std::string> train_labels,
                    const Matrix& test, std::span<const std::string> test_labels, std::size_t k) {
  if (train.rows() == 0) throw ConfigError("knn_accuracy: empty training set");
  if (k < 1) throw ConfigError("knn_accuracy: k must be >= 1");
  if (train_labels.size() != train.rows() || test_labels.size() != test.rows()) {
    throw ContractError("knn_accuracy: label count does not match rows");
  }
  if (test.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto nn = nearest(train, test.row(i), k);
    std::map<std::string_view, std::pair<std::size_t, std::size_t>> votes;  // count, first rank
    for (std::size_t r = 0; r < nn.size(); ++r) {
      auto [it, fresh] = votes.try_emplace(train_labels[nn[r]], 0, r);
      ++it->second.first;
    }
    std::string_view best;
    std::pair<std::size_t, std::size_t> best_score{0, SIZE_MAX};
    for (const auto& [label, score] : votes) {
      if (score.first > best_score.first ||
          (score.first == best_score.first && score.second < best_score.second)) {
        best = label;
        best_score = score;
      }
    }
    if (best == test_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows());
}

double v_measure(std::span<const std::string> predicted, std::span<const std::string> gold) {
  if (predicted.size() != gold.size()) throw ContractError("v_measure: length mismatch");
  const double n = static_cast<double>(gold.size());
  if (gold.empty()) return 1.0;
  std::map<std::pair<std::string_view, std::string_view>, double> joint;
  std::map<std::string_view, double> classes, clusters;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    joint[{gold[i], predicted[i]}] += 1.0;
    classes[gold[i]] += 1.0;
    clusters[predicted[i]] += 1.0;
  }
  auto entropy = [n](const std::map<std::string_view, double>& counts) {
    double h = 0.0;
    for (const auto& [k, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double h_class = entropy(classes);
  const double h_cluster = entropy(clusters);
  double h_class_given_cluster = 0.0, h_cluster_given_class = 0.0;
  for (const auto& [key, c] : joint) {
    h_class_given_cluster -= (c / n) * std::log(c / clusters[key.second]);
    h_cluster_given_class -= (c / n) * std::log(c / classes[key.first]);
  }
  const double homogeneity = h_class == 0.0 ? 1.0 : 1.0 - h_class_given_cluster / h_class;
  const double completeness = h_cluster == 0.0 ? 1.0 : 1.0 - h_cluster_given_class / h_cluster;
  if (homogeneity + completeness == 0.0) return 0.0;
  return std::clamp(2.0 * homogeneity * completeness / (homogeneity + completeness), 0.0, 1.0);
}

std::vector<std::size_t> kmeans(const Matrix& rows, std::size_t k, std::uint64_t seed,
                                std::size_t max_iterations) {
  const std::size_t n = rows.rows();
  if (k < 1) throw ContractError("kmeans: k must be >= 1");
  std::vector<std::size_t> assign(n, 0);
  if (n == 0) return assign;
  k = std::min(k, n);
  Rng rng(seed);

  Matrix centers(k, rows.cols());
  std::vector<double> gap(n, 0.0);
  std::ranges::copy(rows.row(rng.index(n)), centers.row(0).begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = -2.0;
      for (std::size_t j = 0; j < c; ++j) best = std::max(best, dot(rows.row(i), centers.row(j)));
      gap[i] = (1.0 - best) * (1.0 - best);
      total += gap[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < gap[i]) {
          pick = i;
          break;
        }
        u -= gap[i];
      }
    } else {
      pick = rng.index(n);
    }
    std::ranges::copy(rows.row(pick), centers.row(c).begin());
  }

  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_sim = -2.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double s = dot(rows.row(i), centers.row(c));
        if (s > best_sim) {
          best_sim = s;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    if (!changed) break;
    Matrix sums(k, rows.cols());
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = sums.row(assign[i]);
      auto src = rows.row(i);
      for (std::size_t d = 0; d < rows.cols(); ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto normalized = l2_normalize(sums.row(c));
      if (!normalized.degenerate) std::ranges::copy(normalized.values, centers.row(c).begin());
    }
  }
  return assign;
}

// ---- suites ----------------------------------------------------------------

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Sts: return "sts";
    case TaskKind::Retrieval: return "retrieval";
    case TaskKind::Classification: return "classification";
    case TaskKind::Reranking: return "reranking";
    case TaskKind::Clustering: return "clustering";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::Sts, TaskKind::Retrieval, TaskKind::Classification,
                     TaskKind::Reranking, TaskKind::Clustering}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown task kind \"" + std::string(name) +
                    "\" (expected sts|retrieval|classification|reranking|clustering)");
}

std::string_view metric_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Sts: return "spearman";
    case TaskKind::Retrieval: return "ndcg_at_10";
    case TaskKind::Classification: return "knn_accuracy";
    case TaskKind::Reranking: return "map";
    case TaskKind::Clustering: return "v_measure";
  }
  return "?";
}

namespace {

using json = jsonl::json;

std::string str_field(const json& r, const char* key, const std::filesystem::path& file,
                      std::size_t line_no) {
  if (!r.is_object() || !r.contains(key) || !r[key].is_string()) {
    throw DataError(jsonl::field_error(file, line_no, std::string("missing string field \"") + key + "\""));
  }
  return r[key].get<std::string>();
}

std::vector<std::string> str_list(const json& r, const char* key, const std::filesystem::path& file,
                                  std::size_t line_no) {
  if (!r.contains(key)) return {};
  if (!r[key].is_array()) {
    throw DataError(jsonl::field_error(file, line_no, std::string("field \"") + key + "\" must be a list"));
  }
  return r[key].get<std::vector<std::string>>();
}

TaskData load_data(TaskKind kind, const std::filesystem::path& file) {
  switch (kind) {
    case TaskKind::Sts: {
      StsTask t;
      jsonl::for_each(file, [&](const json& r, std::size_t ln) {
        if (!r.contains("gold") || !r["gold"].is_number() || !std::isfinite(r["gold"].get<double>())) {
          throw DataError(jsonl::field_error(file, ln, "missing finite number \"gold\""));
        }
        t.pairs.push_back({str_field(r, "a", file, ln), str_field(r, "b", file, ln), r["gold"].get<double>()});
      });
      return t;
    }
    case TaskKind::Retrieval: {
      RetrievalTask t;
      std::unordered_set<std::string> ids;
      jsonl::for_each(file, [&](const json& r, std::size_t ln) {
        const auto type = str_field(r, "type", file, ln);
        if (type == "doc") {
          auto id = str_field(r, "id", file, ln);
          if (!ids.insert(id).second) throw DataError(jsonl::field_error(file, ln, "duplicate doc id " + id));
          t.doc_ids.push_back(std::move(id));
          t.doc_texts.push_back(str_field(r, "text", file, ln));
        } else if (type == "query") {
          RetrievalQuery q{str_field(r, "id", file, ln), str_field(r, "text", file, ln), {}, {}};
          if (r.contains("relevant")) {
            if (!r["relevant"].is_object()) {
              throw DataError(jsonl::field_error(file, ln, "\"relevant\" must map doc ids to gains"));
            }
            for (const auto& [id, g] : r["relevant"].items()) q.gains[id] = g.get<double>();
          }
          q.exclude = str_list(r, "exclude", file, ln);
          t.queries.push_back(std::move(q));
        } else {
          throw DataError(jsonl::field_error(file, ln, "unknown record type \"" + type + "\""));
        }
      });
      for (const auto& q : t.queries) {
        for (const auto& [id, g] : q.gains) {
          if (!ids.contains(id)) {
            throw DataError(file.string() + ": query " + q.id + " judges unknown doc id " + id);
          }
        }
      }
      return t;
    }
    case TaskKind::Classification: {
      ClassificationTask t;
      jsonl::for_each(file, [&](const json& r, std::size_t ln) {
        const auto split = str_field(r, "split", file, ln);
        auto text = str_field(r, "text", file, ln);
        auto label = str_field(r, "label", file, ln);
        if (split == "train") {
          t.train_texts.push_back(std::move(text));
          t.train_labels.push_back(std::move(label));
        } else if (split == "test") {
          t.test_texts.push_back(std::move(text));
          t.test_labels.push_back(std::move(label));
        } else {
          throw DataError(jsonl::field_error(file, ln, "split must be train or test"));
        }
      });
      return t;
    }
    case TaskKind::Reranking: {
      RerankingTask t;
      jsonl::for_each(file, [&](const json& r, std::size_t ln) {
        t.items.push_back({str_field(r, "query", file, ln), str_list(r, "positive", file, ln),
                           str_list(r, "negative", file, ln)});
      });
      return t;
    }
    case TaskKind::Clustering: {
      ClusteringTask t;
      jsonl::for_each(file, [&](const json& r, std::size_t ln) {
        t.texts.push_back(str_field(r, "text", file, ln));
        t.labels.push_back(str_field(r, "label", file, ln));
      });
      return t;
    }
  }
  throw ConfigError("unknown task kind");
}

}  // namespace

Task load_task(const std::string& name, std::string_view kind, const std::filesystem::path& file) {
  const TaskKind k = parse_task_kind(kind);
  if (!std::filesystem::exists(file)) throw DataError("task file not found: " + file.string());
  return Task{name, k, file, load_data(k, file)};
}

TaskSuite load_suite(const std::filesystem::path& manifest) {
  const json m = jsonl::read_json(manifest);
  if (!m.is_object() || !m.contains("tasks") || !m["tasks"].is_array()) {
    throw DataError(manifest.string() + ": manifest needs a \"tasks\" list");
  }
  TaskSuite suite;
  const auto base = manifest.parent_path();
  for (const auto& t : m["tasks"]) {
    if (!t.is_object() || !t.contains("kind") || !t.contains("path")) {
      throw DataError(manifest.string() + ": every task needs \"kind\" and \"path\"");
    }
    const auto kind = t["kind"].get<std::string>();
    const std::filesystem::path rel = t["path"].get<std::string>();
    auto task = load_task(t.value("name", kind), kind, base / rel);
    task.path = rel;
    suite.tasks.push_back(std::move(task));
  }
  return suite;
}

void save_task(const Task& task, const std::filesystem::path& file) {
  auto os = jsonl::open_out(file);
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, StsTask>) {
          for (const auto& p : d.pairs) jsonl::write_line(os, {{"a", p.text_a}, {"b", p.text_b}, {"gold", p.gold}});
        } else if constexpr (std::is_same_v<T, RetrievalTask>) {
          for (std::size_t i = 0; i < d.doc_ids.size(); ++i) {
            jsonl::write_line(os, {{"type", "doc"}, {"id", d.doc_ids[i]}, {"text", d.doc_texts[i]}});
          }
          for (const auto& q : d.queries) {
            // Sorted so the file bytes do not depend on hash-map iteration order.
            std::map<std::string, double> sorted(q.gains.begin(), q.gains.end());
            json rel = json::object();
            for (const auto& [id, g] : sorted) rel[id] = g;
            json r = {{"type", "query"}, {"id", q.id}, {"text", q.text}, {"relevant", rel}};
            if (!q.exclude.empty()) r["exclude"] = q.exclude;
            jsonl::write_line(os, r);
          }
        } else if constexpr (std::is_same_v<T, ClassificationTask>) {
          for (std::size_t i = 0; i < d.train_texts.size(); ++i) {
            jsonl::write_line(os, {{"split", "train"}, {"text", d.train_texts[i]}, {"label", d.train_labels[i]}});
          }
          for (std::size_t i = 0; i < d.test_texts.size(); ++i) {
            jsonl::write_line(os, {{"split", "test"}, {"text", d.test_texts[i]}, {"label", d.test_labels[i]}});
          }
        } else if constexpr (std::is_same_v<T, RerankingTask>) {
          for (const auto& it : d.items) {
            jsonl::write_line(os, {{"query", it.query}, {"positive", it.positives}, {"negative", it.negatives}});
          }
        } else {
          for (std::size_t i = 0; i < d.texts.size(); ++i) {
            jsonl::write_line(os, {{"text", d.texts[i]}, {"label", d.labels[i]}});
          }
        }
      },
      task.data);
}

void save_suite(const TaskSuite& suite, const std::filesystem::path& manifest) {
  json tasks = json::array();
  const auto base = manifest.parent_path();
  for (const auto& t : suite.tasks) {
    save_task(t, base / t.path);
    tasks.push_back({{"name", t.name}, {"kind", to_string(t.kind)}, {"path", t.path.generic_string()}});
  }
  auto os = jsonl::open_out(manifest);
  os << json{{"version", 1}, {"tasks", tasks}}.dump(2) << '\n';
}

// ---- evaluation ------------------------------------------------------------

const TaskResult* EvalReport::find(TaskKind kind) const {
  for (const auto& t : tasks) {
    if (t.kind == kind) return &t;
  }
  return nullptr;
}

namespace {

Matrix embed(const EncoderParams& params, const std::vector<std::string>& texts) {
  return forward(texts, params).embeddings;
}

std::vector<std::string> rank_docs(const Matrix& docs, const std::vector<std::string>& doc_ids,
                                   std::span<const double> query,
                                   const std::unordered_set<std::string>& exclude) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t j = 0; j < docs.rows(); ++j) {
    if (!exclude.contains(doc_ids[j])) scored.emplace_back(dot(query, docs.row(j)), j);
  }
  std::ranges::sort(scored, [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(doc_ids[s.second]);
  return out;
}

TaskResult run_task(const EncoderParams& params, const Task& task, const EvalOptions& opt) {
  TaskResult res{task.name, task.kind, std::string(metric_name(task.kind)), std::nullopt, 0, 0};
  if (task.kind == TaskKind::Retrieval && opt.ndcg_k != 10) {
    res.metric = "ndcg_at_" + std::to_string(opt.ndcg_k);
  }
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, StsTask>) {
          std::vector<std::string> a, b;
          std::vector<double> gold;
          for (const auto& p : d.pairs) {
            a.push_back(p.text_a);
            b.push_back(p.text_b);
            gold.push_back(p.gold);
          }
          res.count = d.pairs.size();
          if (d.pairs.size() < 2) return;
          const Matrix ea = embed(params, a), eb = embed(params, b);
          std::vector<double> pred(a.size());
          for (std::size_t i = 0; i < a.size(); ++i) pred[i] = dot(ea.row(i), eb.row(i));
          res.value = spearman(pred, gold);
        } else if constexpr (std::is_same_v<T, RetrievalTask>) {
          const Matrix docs = embed(params, d.doc_texts);
          std::vector<std::string> qtexts;
          for (const auto& q : d.queries) qtexts.push_back(q.text);
          const Matrix qs = embed(params, qtexts);
          double sum = 0.0;
          for (std::size_t i = 0; i < d.queries.size(); ++i) {
            const auto& q = d.queries[i];
            const bool any = std::ranges::any_of(q.gains, [](const auto& kv) { return kv.second > 0.0; });
            if (!any) {
              ++res.excluded;
              continue;
            }
            std::unordered_set<std::string> exclude(q.exclude.begin(), q.exclude.end());
            sum += ndcg_at_k(rank_docs(docs, d.doc_ids, qs.row(i), exclude), q.gains, opt.ndcg_k);
            ++res.count;
          }
          if (res.count > 0) res.value = sum / static_cast<double>(res.count);
        } else if constexpr (std::is_same_v<T, ClassificationTask>) {
          res.count = d.test_texts.size();
          if (d.test_texts.empty()) return;
          res.value = knn_accuracy(embed(params, d.train_texts), d.train_labels,
                                   embed(params, d.test_texts), d.test_labels, opt.knn_k);
        } else if constexpr (std::is_same_v<T, RerankingTask>) {
          std::vector<std::vector<std::string>> rankings;
          std::vector<std::unordered_set<std::string>> relevant;
          for (const auto& it : d.items) {
            std::vector<std::string> cands = it.positives;
            cands.insert(cands.end(), it.negatives.begin(), it.negatives.end());
            std::vector<std::string> ids;
            for (std::size_t c = 0; c < cands.size(); ++c) ids.push_back(std::to_string(c));
            const Matrix q = embed(params, {it.query});
            rankings.push_back(rank_docs(embed(params, cands), ids, q.row(0), {}));
            std::unordered_set<std::string> rel;
            for (std::size_t c = 0; c < it.positives.size(); ++c) rel.insert(std::to_string(c));
            if (rel.empty()) ++res.excluded;
            relevant.push_back(std::move(rel));
          }
          res.count = d.items.size() - res.excluded;
          res.value = mean_average_precision(rankings, relevant);
        } else {
          res.count = d.texts.size();
          if (d.texts.empty()) return;
          const std::set<std::string> distinct(d.labels.begin(), d.labels.end());
          const auto ids = kmeans(embed(params, d.texts), distinct.size(), opt.seed);
          std::vector<std::string> predicted;
          for (auto c : ids) predicted.push_back(std::to_string(c));
          res.value = v_measure(predicted, d.labels);
        }
      },
      task.data);
  return res;
}

}  // namespace

EvalReport evaluate(const EncoderParams& params, const TaskSuite& suite, const EvalOptions& options,
                    std::string checkpoint_id) {
  params.validate();
  EvalReport report;
  report.seed = options.seed;
  report.checkpoint_id = std::move(checkpoint_id);
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& task : suite.tasks) {
    report.tasks.push_back(run_task(params, task, options));
    if (report.tasks.back().value) {
      sum += *report.tasks.back().value;
      ++defined;
    }
  }
  if (defined > 0) report.mean = sum / static_cast<double>(defined);
  return report;
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  json tasks = json::array();
  for (const auto& t : report.tasks) {
    tasks.push_back({{"name", t.name},
                     {"kind", to_string(t.kind)},
                     {"metric", t.metric},
                     {"value", t.value ? json(*t.value) : json(nullptr)},
                     {"count", t.count},
                     {"excluded", t.excluded}});
  }
  json r = {{"checkpoint_id", report.checkpoint_id},
            {"seed", report.seed},
            {"mean", report.mean ? json(*report.mean) : json(nullptr)},
            {"tasks", tasks}};
  auto os = jsonl::open_out(path);
  os << r.dump(2) << '\n';
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  auto os = jsonl::open_out(path);
  os << "name,kind,metric,value,count,excluded\n";
  char buf[64];
  for (const auto& t : report.tasks) {
    os << t.name << ',' << to_string(t.kind) << ',' << t.metric << ',';
    if (t.value) {
      std::snprintf(buf, sizeof(buf), "%.17g", *t.value);
      os << buf;
    }
    os << ',' << t.count << ',' << t.excluded << '\n';
  }
}

}  // namespace gist
