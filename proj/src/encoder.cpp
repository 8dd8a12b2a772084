#include "gist/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <thread>

#include "gist/rng.hpp"

namespace gist {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void TokenizerConfig::validate() const {
  if (vocab_slots < 2) throw ConfigError("vocab_slots must be >= 2");
  if (vocab_slots > UINT32_MAX) throw ConfigError("vocab_slots must fit in 32 bits");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

void EncoderParams::validate() const {
  tokenizer.validate();
  if (table.rows() != tokenizer.vocab_slots) {
    throw ConfigError("embedding table rows do not match vocab_slots");
  }
  if (table.cols() < 2) throw ConfigError("embedding dim must be >= 2");
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::uint32_t hash_token(std::string_view token, const TokenizerConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ cfg.hash_seed;
  for (char c : token) {
    auto b = static_cast<unsigned char>(c);
    if (cfg.lowercase) b = static_cast<unsigned char>(std::tolower(b));
    h = (h ^ b) * 0x100000001b3ULL;
  }
  return static_cast<std::uint32_t>(mix64(h) % cfg.vocab_slots);
}

void encode_range(std::span<const std::string> texts, const EncoderParams& params,
                  EncodedBatch& out, std::size_t begin, std::size_t end) {
  const std::size_t dim = params.dim();
  for (std::size_t t = begin; t < end; ++t) {
    auto& ids = out.token_ids[t];
    ids = tokenize(texts[t], params.tokenizer);
    auto pooled = out.pre_norm.row(t);
    for (std::uint32_t id : ids) {
      auto src = params.table.row(id);
      for (std::size_t k = 0; k < dim; ++k) pooled[k] += src[k];
    }
    if (!ids.empty()) {
      const double inv = 1.0 / static_cast<double>(ids.size());
      for (double& x : pooled) x *= inv;
    }
    const double n = l2_norm(pooled);
    auto emb = out.embeddings.row(t);
    if (n == 0.0) {
      out.degenerate[t] = true;
      continue;
    }
    for (std::size_t k = 0; k < dim; ++k) emb[k] = pooled[k] / n;
  }
}

}  // namespace

std::vector<std::uint32_t> tokenize(std::string_view text, const TokenizerConfig& cfg) {
  std::vector<std::uint32_t> ids;
  std::size_t i = 0;
  while (i < text.size() && ids.size() < cfg.max_tokens) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) ids.push_back(hash_token(text.substr(start, i - start), cfg));
  }
  return ids;
}

EncoderParams init_encoder(const TokenizerConfig& tokenizer, std::size_t dim, std::uint64_t seed) {
  tokenizer.validate();
  if (dim < 2) throw ConfigError("embedding dim must be >= 2");
  EncoderParams p{tokenizer, Matrix(tokenizer.vocab_slots, dim)};
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : p.table.values()) x = rng.uniform(-0.5, 0.5) * scale;
  return p;
}

EncodedBatch forward(std::span<const std::string> texts, const EncoderParams& params,
                     unsigned threads) {
  const std::size_t n = texts.size();
  EncodedBatch out{Matrix(n, params.dim()), Matrix(n, params.dim()),
                   std::vector<std::vector<std::uint32_t>>(n), std::vector<bool>(n, false)};
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    encode_range(texts, params, out, 0, n);
    return out;
  }
  // Each worker fills its own partial batch: vector<bool> packs bits, so
  // writing flags of a shared one from several threads would race.
  std::vector<EncodedBatch> parts;
  std::vector<std::jthread> workers;
  const std::size_t chunk = (n + threads - 1) / threads;
  parts.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t b = std::min(n, w * chunk);
    const std::size_t e = std::min(n, b + chunk);
    parts.push_back({Matrix(e - b, params.dim()), Matrix(e - b, params.dim()),
                     std::vector<std::vector<std::uint32_t>>(e - b),
                     std::vector<bool>(e - b, false)});
  }
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t b = std::min(n, w * chunk);
    const std::size_t e = std::min(n, b + chunk);
    workers.emplace_back([&, w, b, e] {
      encode_range(texts.subspan(b, e - b), params, parts[w], 0, e - b);
    });
  }
  workers.clear();
  std::size_t row = 0;
  for (auto& part : parts) {
    for (std::size_t r = 0; r < part.embeddings.rows(); ++r, ++row) {
      std::ranges::copy(part.embeddings.row(r), out.embeddings.row(row).begin());
      std::ranges::copy(part.pre_norm.row(r), out.pre_norm.row(row).begin());
      out.token_ids[row] = std::move(part.token_ids[r]);
      out.degenerate[row] = part.degenerate[r];
    }
  }
  return out;
}

void backward(const EncodedBatch& batch, const Matrix& grad_wrt_embeddings,
              const EncoderParams& params, GradAccumulator& acc) {
  if (grad_wrt_embeddings.rows() != batch.embeddings.rows() ||
      grad_wrt_embeddings.cols() != batch.embeddings.cols()) {
    throw ContractError("backward: gradient shape does not match embeddings");
  }
  if (acc.grad_table.rows() != params.table.rows() || acc.grad_table.cols() != params.dim()) {
    throw ContractError("backward: accumulator shape does not match table");
  }
  const std::size_t dim = params.dim();
  Vector g(dim);
  for (std::size_t t = 0; t < batch.embeddings.rows(); ++t) {
    if (batch.degenerate[t] || batch.token_ids[t].empty()) continue;
    auto upstream = grad_wrt_embeddings.row(t);
    auto u = batch.embeddings.row(t);
    const double norm = l2_norm(batch.pre_norm.row(t));
    const double along = dot(upstream, u);
    const double scale = 1.0 / (norm * static_cast<double>(batch.token_ids[t].size()));
    for (std::size_t k = 0; k < dim; ++k) g[k] = (upstream[k] - along * u[k]) * scale;
    for (std::uint32_t id : batch.token_ids[t]) {
      auto dst = acc.grad_table.row(id);
      for (std::size_t k = 0; k < dim; ++k) dst[k] += g[k];
    }
  }
}

namespace {

constexpr char kMagic[8] = {'G', 'I', 'S', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_doubles(std::ofstream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), is_(path, std::ios::binary) {
    if (!is_) throw DataError("cannot open checkpoint " + path.string());
  }

  template <typename T>
  T get() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }

  std::vector<double> get_doubles(std::size_t n) {
    std::vector<double> v(n);
    read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
    return v;
  }

  void read(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw DataError("truncated checkpoint " + path_.string());
    }
  }

  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::filesystem::path path_;
  std::ifstream is_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                     const TrainerState* state) {
  params.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, params.tokenizer.vocab_slots);
  put<std::uint64_t>(os, params.dim());
  put<std::uint64_t>(os, params.tokenizer.hash_seed);
  put<std::uint8_t>(os, params.tokenizer.lowercase ? 1 : 0);
  put<std::uint64_t>(os, params.tokenizer.max_tokens);
  put_doubles(os, params.table.values());
  put<std::uint8_t>(os, state ? 1 : 0);
  if (state) {
    if (state->first_moment.size() != params.table.size() ||
        state->second_moment.size() != params.table.size()) {
      throw ContractError("optimizer state shape does not match table");
    }
    put<std::uint64_t>(os, state->step);
    put_doubles(os, state->first_moment.values());
    put_doubles(os, state->second_moment.values());
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader in(path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not a checkpoint file");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " +
                    path.string());
  }
  Checkpoint ck;
  auto& tok = ck.params.tokenizer;
  tok.vocab_slots = in.get<std::uint64_t>();
  const auto dim = in.get<std::uint64_t>();
  tok.hash_seed = in.get<std::uint64_t>();
  tok.lowercase = in.get<std::uint8_t>() != 0;
  tok.max_tokens = in.get<std::uint64_t>();
  try {
    tok.validate();
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const std::size_t n = tok.vocab_slots * dim;
  ck.params.table = Matrix(tok.vocab_slots, dim, in.get_doubles(n));
  if (in.get<std::uint8_t>() != 0) {
    TrainerState st;
    st.step = in.get<std::uint64_t>();
    st.first_moment = Matrix(tok.vocab_slots, dim, in.get_doubles(n));
    st.second_moment = Matrix(tok.vocab_slots, dim, in.get_doubles(n));
    ck.state = std::move(st);
  }
  if (!in.at_end()) throw DataError("trailing bytes in checkpoint " + path.string());
  return ck;
}

std::string checkpoint_id(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace gist
