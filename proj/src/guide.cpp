#include "gist/guide.hpp"

#include <charconv>
#include <cstdio>

#include "gist/rng.hpp"
#include "jsonl.hpp"

namespace gist {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EncoderEmbedder::EncoderEmbedder(EncoderParams params) : params_(std::move(params)) {
  params_.validate();
}

Matrix EncoderEmbedder::embed(std::span<const std::string> texts) const {
  return forward(texts, params_).embeddings;
}

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("embedding store dim must be positive");
}

void EmbeddingStore::add(std::string_view text, std::span<const double> embedding) {
  if (embedding.size() != dim_) throw ContractError("embedding store: wrong embedding length");
  entries_[fnv1a64(text)] = Vector(embedding.begin(), embedding.end());
}

bool EmbeddingStore::contains(std::string_view text) const {
  return entries_.contains(fnv1a64(text));
}

Matrix EmbeddingStore::embed(std::span<const std::string> texts) const {
  Matrix out(texts.size(), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto it = entries_.find(fnv1a64(texts[i]));
    if (it == entries_.end()) {
      throw DataError("precomputed store has no embedding for text \"" + texts[i] + "\"");
    }
    auto normalized = l2_normalize(it->second);
    std::ranges::copy(normalized.values, out.row(i).begin());
  }
  return out;
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::optional<EmbeddingStore> store;
  jsonl::for_each(path, [&](const jsonl::json& r, std::size_t line_no) {
    if (!store) {
      if (r.value("format", "") != "gist-embedding-store" || !r.contains("dim")) {
        throw DataError(jsonl::field_error(path, line_no, "missing embedding store header"));
      }
      if (r.value("hash", "") != kHashAlgorithm) {
        throw DataError(jsonl::field_error(path, line_no,
                                           "unsupported hash algorithm \"" + r.value("hash", "") +
                                               "\" (expected " + kHashAlgorithm + ")"));
      }
      if (r.value("version", 0) != 1) {
        throw DataError(jsonl::field_error(path, line_no, "unsupported store version"));
      }
      store.emplace(r["dim"].get<std::size_t>());
      return;
    }
    const auto hex = r.at("hash").get<std::string>();
    std::uint64_t h = 0;
    const auto [end, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), h, 16);
    if (hex.size() != 16 || ec != std::errc() || end != hex.data() + hex.size()) {
      throw DataError(jsonl::field_error(path, line_no, "bad hash \"" + hex + "\""));
    }
    auto values = r.at("embedding").get<Vector>();
    if (values.size() != store->dim_) {
      throw DataError(jsonl::field_error(path, line_no, "embedding length does not match dim"));
    }
    store->entries_[h] = std::move(values);
  });
  if (!store) throw DataError("empty embedding store " + path.string());
  return std::move(*store);
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  auto os = jsonl::open_out(path);
  jsonl::write_line(os, {{"format", "gist-embedding-store"},
                         {"version", 1},
                         {"dim", dim_},
                         {"hash", kHashAlgorithm}});
  std::vector<std::uint64_t> keys;
  keys.reserve(entries_.size());
  for (const auto& [k, v] : entries_) keys.push_back(k);
  std::ranges::sort(keys);
  for (auto k : keys) jsonl::write_line(os, {{"hash", hash_hex(k)}, {"embedding", entries_.at(k)}});
}

namespace {

struct BatchTexts {
  std::vector<const std::string*> queries, positives, negatives;
};

BatchTexts split_batch(std::span<const Triplet> batch) {
  if (batch.empty()) throw ContractError("guide: empty batch");
  BatchTexts t;
  for (const auto& tr : batch) {
    t.queries.push_back(&tr.query);
    t.positives.push_back(&tr.positive);
  }
  for (std::size_t j : negative_columns(batch)) t.negatives.push_back(&*batch[j].negative);
  return t;
}

}  // namespace

EmbeddingGuide::EmbeddingGuide(std::shared_ptr<const TextEmbedder> embedder, std::string kind)
    : embedder_(std::move(embedder)), kind_(std::move(kind)) {
  if (!embedder_) throw ConfigError("embedding guide needs an embedder");
}

std::size_t EmbeddingGuide::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

Matrix EmbeddingGuide::lookup(const std::vector<const std::string*>& texts) const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> missing;
  for (const auto* t : texts) {
    if (!cache_.contains(*t) && std::ranges::find(missing, *t) == missing.end()) {
      missing.push_back(*t);
    }
  }
  if (!missing.empty()) {
    const Matrix fresh = embedder_->embed(missing);
    for (std::size_t i = 0; i < missing.size(); ++i) {
      auto row = fresh.row(i);
      cache_.emplace(missing[i], Vector(row.begin(), row.end()));
    }
  }
  Matrix out(texts.size(), embedder_->dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::ranges::copy(cache_.at(*texts[i]), out.row(i).begin());
  }
  return out;
}

GuideSimBlock EmbeddingGuide::similarities(std::span<const Triplet> batch) const {
  const auto t = split_batch(batch);
  const Matrix q = lookup(t.queries);
  const Matrix p = lookup(t.positives);
  const Matrix n = lookup(t.negatives);
  return similarity_block(q, p, &n);
}

LabelOracleGuide::LabelOracleGuide(std::unordered_map<std::string, std::string> labels)
    : labels_(std::move(labels)) {}

LabelOracleGuide LabelOracleGuide::from_corpus(const LabeledCorpus& corpus) {
  std::unordered_map<std::string, std::string> labels;
  for (const auto& item : corpus.items) {
    auto [it, inserted] = labels.emplace(item.text, item.label);
    if (!inserted && it->second != item.label) {
      throw DataError("label oracle: text \"" + item.text + "\" carries two labels");
    }
  }
  return LabelOracleGuide(std::move(labels));
}

const std::string& LabelOracleGuide::label_of(const std::string& text) const {
  auto it = labels_.find(text);
  if (it == labels_.end()) throw DataError("label oracle: no label for text \"" + text + "\"");
  return it->second;
}

GuideSimBlock LabelOracleGuide::similarities(std::span<const Triplet> batch) const {
  const auto t = split_batch(batch);
  auto labels = [&](const std::vector<const std::string*>& texts) {
    std::vector<const std::string*> out;
    for (const auto* s : texts) out.push_back(&label_of(*s));
    return out;
  };
  const auto lq = labels(t.queries);
  const auto lp = labels(t.positives);
  const auto ln = labels(t.negatives);
  auto table = [](const auto& a, const auto& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = (*a[i] == *b[j]) ? 1.0 : 0.0;
    }
    return m;
  };
  GuideSimBlock g{table(lq, lp), std::nullopt, table(lq, lq), table(lp, lp)};
  if (!ln.empty()) g.qn = table(lq, ln);
  for (std::size_t i = 0; i < lq.size(); ++i) {
    g.qp(i, i) = (*lq[i] == *lp[i]) ? kOracleSelfThreshold : 0.0;
  }
  return g;
}

std::unique_ptr<Guide> make_frozen_encoder_guide(EncoderParams params) {
  return std::make_unique<EmbeddingGuide>(std::make_shared<EncoderEmbedder>(std::move(params)),
                                          "frozen");
}

std::unique_ptr<Guide> make_precomputed_guide(EmbeddingStore store) {
  return std::make_unique<EmbeddingGuide>(std::make_shared<EmbeddingStore>(std::move(store)),
                                          "precomputed");
}

namespace {

std::pair<std::string, std::string> split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos || colon + 1 == spec.size()) {
    throw ConfigError("bad guide/embedder spec \"" + spec + "\" (expected kind:path)");
  }
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

}  // namespace

std::unique_ptr<Guide> make_guide(const std::string& spec) {
  auto [kind, path] = split_spec(spec);
  if (kind == "frozen") return make_frozen_encoder_guide(load_checkpoint(path).params);
  if (kind == "precomputed") return make_precomputed_guide(EmbeddingStore::load(path));
  if (kind == "oracle") {
    return std::make_unique<LabelOracleGuide>(LabelOracleGuide::from_corpus(load_corpus(path)));
  }
  throw ConfigError("unknown guide kind \"" + kind + "\" (expected frozen|precomputed|oracle)");
}

std::shared_ptr<const TextEmbedder> make_embedder(const std::string& spec) {
  auto [kind, path] = split_spec(spec);
  if (kind == "frozen") return std::make_shared<EncoderEmbedder>(load_checkpoint(path).params);
  if (kind == "precomputed") return std::make_shared<EmbeddingStore>(EmbeddingStore::load(path));
  throw ConfigError("unknown embedder kind \"" + kind + "\" (expected frozen|precomputed)");
}

}  // namespace gist
