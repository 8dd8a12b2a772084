#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "gist/encoder.hpp"

namespace gist {

// ---- metrics ---------------------------------------------------------------

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Pearson correlation of fractional ranks. nullopt when either side is
/// constant. Throws ContractError for unequal lengths or fewer than 2 items.
std::optional<double> spearman(std::span<const double> pred, std::span<const double> gold);

/// DCG@k / IDCG@k with discount 1 / log2(rank + 1). Ids absent from gains
/// count as gain 0. Returns 0 when nothing relevant exists.
double ndcg_at_k(std::span<const std::string> ranking,
                 const std::unordered_map<std::string, double>& gains, std::size_t k);

/// Precision at each relevant hit, summed and divided by the total number of
/// relevant ids (retrieved or not).
double average_precision(std::span<const std::string> ranking,
                         const std::unordered_set<std::string>& relevant);

/// Mean AP over queries with at least one relevant id. nullopt when every
/// query was excluded.
std::optional<double> mean_average_precision(
    std::span<const std::vector<std::string>> rankings,
    std::span<const std::unordered_set<std::string>> relevant);

/// Majority vote among the k most cosine-similar training rows (ties in
/// similarity go to the lower training index). A vote tie goes to the tied
/// label seen first in neighbor order, i.e. the nearest one.
double knn_accuracy(const Matrix& train, std::span<const std::string> train_labels,
                    const Matrix& test, std::span<const std::string> test_labels, std::size_t k);

/// Harmonic mean of homogeneity and completeness from contingency entropies
/// (natural log). One cluster against one class scores 1.
double v_measure(std::span<const std::string> predicted, std::span<const std::string> gold);

/// Spherical k-means with k-means++ seeding; returns a cluster id per row.
std::vector<std::size_t> kmeans(const Matrix& rows, std::size_t k, std::uint64_t seed,
                                std::size_t max_iterations = 100);

// ---- task suites -----------------------------------------------------------

enum class TaskKind { Sts, Retrieval, Classification, Reranking, Clustering };
std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view name);

struct StsPair {
  std::string text_a;
  std::string text_b;
  double gold = 0.0;
};
struct StsTask {
  std::vector<StsPair> pairs;
};

struct RetrievalQuery {
  std::string id;
  std::string text;
  std::unordered_map<std::string, double> gains;  // judged doc id -> gain
  std::vector<std::string> exclude;               // doc ids left out of this query's ranking
};
struct RetrievalTask {
  std::vector<std::string> doc_ids;
  std::vector<std::string> doc_texts;
  std::vector<RetrievalQuery> queries;
};

struct ClassificationTask {
  std::vector<std::string> train_texts, train_labels;
  std::vector<std::string> test_texts, test_labels;
};

struct RerankingItem {
  std::string query;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};
struct RerankingTask {
  std::vector<RerankingItem> items;
};

struct ClusteringTask {
  std::vector<std::string> texts, labels;
};

using TaskData = std::variant<StsTask, RetrievalTask, ClassificationTask, RerankingTask, ClusteringTask>;

struct Task {
  std::string name;
  TaskKind kind = TaskKind::Sts;
  std::filesystem::path path;  // as written in the manifest
  TaskData data;
};

struct TaskSuite {
  std::vector<Task> tasks;
};

// Manifest (JSON):
//   {"version": 1, "tasks": [{"name": str, "kind": str, "path": str}, ...]}
// Paths are relative to the manifest. Task files are JSONL:
//   sts            {"a": str, "b": str, "gold": num}
//   retrieval      {"type": "doc", "id": str, "text": str}
//                  {"type": "query", "id": str, "text": str,
//                   "relevant": {doc_id: gain}, "exclude": [doc_id]?}
//   classification {"split": "train"|"test", "text": str, "label": str}
//   reranking      {"query": str, "positive": [str], "negative": [str]}
//   clustering     {"text": str, "label": str}
TaskSuite load_suite(const std::filesystem::path& manifest);
Task load_task(const std::string& name, std::string_view kind, const std::filesystem::path& file);
void save_task(const Task& task, const std::filesystem::path& file);
void save_suite(const TaskSuite& suite, const std::filesystem::path& manifest);

// ---- evaluation ------------------------------------------------------------

struct EvalOptions {
  std::size_t knn_k = 5;
  std::size_t ndcg_k = 10;
  std::uint64_t seed = 0;  // k-means seeding
};

struct TaskResult {
  std::string name;
  TaskKind kind = TaskKind::Sts;
  std::string metric;
  std::optional<double> value;  // nullopt: undefined on this data
  std::size_t count = 0;        // scored units (pairs, queries, test items, ...)
  std::size_t excluded = 0;     // queries without relevant docs, ...
};

struct EvalReport {
  std::vector<TaskResult> tasks;
  std::optional<double> mean;  // over tasks with a defined value
  std::uint64_t seed = 0;
  std::string checkpoint_id;

  const TaskResult* find(TaskKind kind) const;
};

std::string_view metric_name(TaskKind kind);

EvalReport evaluate(const EncoderParams& params, const TaskSuite& suite, const EvalOptions& options,
                    std::string checkpoint_id = {});

// JSON: {"checkpoint_id", "seed", "mean", "tasks": [{"name", "kind", "metric",
//        "value", "count", "excluded"}]}; undefined values are null.
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
// CSV header: name,kind,metric,value,count,excluded (value empty when undefined)
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace gist
