#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gist {

struct LabeledItem {
  std::uint64_t id = 0;
  std::string text;
  std::string label;
  std::string split;  // free-form tag ("train", "heldout", ...); may be empty

  bool operator==(const LabeledItem&) const = default;
};

struct LabeledCorpus {
  std::vector<LabeledItem> items;

  /// Throws DataError if ids repeat, a label is empty, or fewer than two
  /// distinct labels exist. Singleton classes are allowed here; mining skips
  /// them.
  void validate() const;
};

// JSONL: {"id": uint, "text": str, "label": str, "split": str?}
LabeledCorpus load_corpus(const std::filesystem::path& path);
void save_corpus(const LabeledCorpus& corpus, const std::filesystem::path& path);

}  // namespace gist
