#include "gist/triplet.hpp"

#include <algorithm>

#include "jsonl.hpp"

namespace gist {

std::vector<Triplet> load_triplets(const std::filesystem::path& path) {
  std::vector<Triplet> out;
  jsonl::for_each(path, [&](const jsonl::json& r, std::size_t line_no) {
    auto required = [&](const char* key) {
      if (!r.is_object() || !r.contains(key) || !r[key].is_string()) {
        throw DataError(
            jsonl::field_error(path, line_no, std::string("missing string field \"") + key + "\""));
      }
      return r[key].get<std::string>();
    };
    auto optional = [&](const char* key) -> std::optional<std::string> {
      if (!r.contains(key) || r[key].is_null()) return std::nullopt;
      if (!r[key].is_string()) {
        throw DataError(
            jsonl::field_error(path, line_no, std::string("field \"") + key + "\" is not a string"));
      }
      return r[key].get<std::string>();
    };
    Triplet t{required("query"), required("pos"), optional("neg"), optional("task")};
    out.push_back(std::move(t));
  });
  return out;
}

void save_triplets(const std::vector<Triplet>& triplets, const std::filesystem::path& path) {
  auto os = jsonl::open_out(path);
  for (const auto& t : triplets) {
    jsonl::json r = {{"query", t.query}, {"pos", t.positive}};
    if (t.negative) r["neg"] = *t.negative;
    if (t.task) r["task"] = *t.task;
    jsonl::write_line(os, r);
  }
}

bool has_any_negative(const std::vector<Triplet>& triplets) {
  return std::ranges::any_of(triplets, [](const Triplet& t) { return t.negative.has_value(); });
}

bool all_have_negatives(const std::vector<Triplet>& triplets) {
  return std::ranges::all_of(triplets, [](const Triplet& t) { return t.negative.has_value(); });
}

}  // namespace gist
