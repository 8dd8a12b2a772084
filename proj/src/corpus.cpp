#include "gist/corpus.hpp"

#include <set>
#include <unordered_set>

#include "gist/errors.hpp"
#include "jsonl.hpp"

namespace gist {

void LabeledCorpus::validate() const {
  std::unordered_set<std::uint64_t> ids;
  std::set<std::string> labels;
  for (const auto& item : items) {
    if (!ids.insert(item.id).second) {
      throw DataError("duplicate corpus id " + std::to_string(item.id));
    }
    if (item.label.empty()) throw DataError("corpus item " + std::to_string(item.id) + " has no label");
    labels.insert(item.label);
  }
  if (labels.size() < 2) throw DataError("corpus needs at least 2 distinct labels");
}

LabeledCorpus load_corpus(const std::filesystem::path& path) {
  LabeledCorpus corpus;
  jsonl::for_each(path, [&](const jsonl::json& r, std::size_t line_no) {
    if (!r.is_object() || !r.contains("id") || !r["id"].is_number_unsigned()) {
      throw DataError(jsonl::field_error(path, line_no, "missing unsigned integer field \"id\""));
    }
    for (const char* key : {"text", "label"}) {
      if (!r.contains(key) || !r[key].is_string()) {
        throw DataError(
            jsonl::field_error(path, line_no, std::string("missing string field \"") + key + "\""));
      }
    }
    LabeledItem item{r["id"].get<std::uint64_t>(), r["text"].get<std::string>(),
                     r["label"].get<std::string>(), r.value("split", std::string())};
    corpus.items.push_back(std::move(item));
  });
  return corpus;
}

void save_corpus(const LabeledCorpus& corpus, const std::filesystem::path& path) {
  auto os = jsonl::open_out(path);
  for (const auto& item : corpus.items) {
    jsonl::json r = {{"id", item.id}, {"text", item.text}, {"label", item.label}};
    if (!item.split.empty()) r["split"] = item.split;
    jsonl::write_line(os, r);
  }
}

}  // namespace gist
