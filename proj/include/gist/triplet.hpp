#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gist {

struct Triplet {
  std::string query;
  std::string positive;
  std::optional<std::string> negative;
  std::optional<std::string> task;  // provenance tag, carried through untouched

  bool operator==(const Triplet&) const = default;
};

// JSONL, one record per line:
//   {"query": str, "pos": str, "neg": str?, "task": str?}
// UTF-8, LF line endings. Blank lines are ignored on load.
std::vector<Triplet> load_triplets(const std::filesystem::path& path);
void save_triplets(const std::vector<Triplet>& triplets, const std::filesystem::path& path);

bool has_any_negative(const std::vector<Triplet>& triplets);
bool all_have_negatives(const std::vector<Triplet>& triplets);

}  // namespace gist
