#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gist/cli.hpp"
#include "gist/encoder.hpp"
#include "gist/errors.hpp"
#include "gist/evalkit.hpp"
#include "gist/loss.hpp"
#include "gist/selection.hpp"
#include "gist/synthetic.hpp"
#include "gist/trainer.hpp"

namespace py = pybind11;
using namespace gist;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ContractError("expected a 2-d array");
  const auto* p = a.data();
  return Matrix(a.shape(0), a.shape(1), std::vector<double>(p, p + a.size()));
}

template <typename T>
py::array_t<T> to_array(const Grid<T>& m) {
  py::array_t<T> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::array_t<bool> to_bool_array(const BoolMatrix& m) {
  py::array_t<bool> out({m.rows(), m.cols()});
  std::transform(m.values().begin(), m.values().end(), out.mutable_data(), [](std::uint8_t v) { return v != 0; });
  return out;
}

BoolMatrix to_bool_matrix(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ContractError("expected a 2-d array");
  BoolMatrix m(a.shape(0), a.shape(1));
  std::transform(a.data(), a.data() + a.size(), m.values().begin(), [](bool v) { return v ? 1 : 0; });
  return m;
}

// Blocks travel as dicts with keys qp, qq, pp and optional qn.
SimBlock to_block(const py::dict& d) {
  SimBlock s{to_matrix(d["qp"].cast<Array>()), std::nullopt, to_matrix(d["qq"].cast<Array>()),
             to_matrix(d["pp"].cast<Array>())};
  if (d.contains("qn") && !d["qn"].is_none()) s.qn = to_matrix(d["qn"].cast<Array>());
  s.check_shapes();
  return s;
}

py::dict from_block(const SimBlock& s) {
  py::dict d;
  d["qp"] = to_array(s.qp);
  d["qn"] = s.qn ? py::object(to_array(*s.qn)) : py::none();
  d["qq"] = to_array(s.qq);
  d["pp"] = to_array(s.pp);
  return d;
}

py::dict from_masks(const MaskSet& m) {
  py::dict d;
  d["qp"] = to_bool_array(m.qp);
  d["qn"] = m.qn ? py::object(to_bool_array(*m.qn)) : py::none();
  d["qq"] = to_bool_array(m.qq);
  d["pp"] = to_bool_array(m.pp);
  d["thresholds"] = m.thresholds;
  return d;
}

MaskSet to_masks(const py::dict& d) {
  using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;
  MaskSet m{to_bool_matrix(d["qp"].cast<BoolArray>()), std::nullopt, to_bool_matrix(d["qq"].cast<BoolArray>()),
            to_bool_matrix(d["pp"].cast<BoolArray>()), {}};
  if (d.contains("qn") && !d["qn"].is_none()) m.qn = to_bool_matrix(d["qn"].cast<BoolArray>());
  return m;
}

}  // namespace

PYBIND11_MODULE(_gist, m) {
  m.doc() = "Guided in-batch negative selection for contrastive embedding training";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  m.def("cosine_matrix", [](const Array& a, const Array& b) { return to_array(cosine_matrix(to_matrix(a), to_matrix(b))); },
        py::arg("a"), py::arg("b"));

  m.def(
      "similarity_block",
      [](const Array& q, const Array& p, std::optional<Array> n) {
        const Matrix neg = n ? to_matrix(*n) : Matrix(0, q.shape(1));
        return from_block(similarity_block(to_matrix(q), to_matrix(p), &neg));
      },
      py::arg("queries"), py::arg("positives"), py::arg("negatives") = py::none());

  m.def(
      "build_masks",
      [](const py::dict& model, const std::string& strategy, std::optional<py::dict> guide) {
        const SimBlock s = to_block(model);
        std::optional<SimBlock> g;
        if (guide) g = to_block(*guide);
        return from_masks(build_masks(s, g ? &*g : nullptr, parse_strategy(strategy)));
      },
      py::arg("model"), py::arg("strategy"), py::arg("guide") = py::none(),
      "Masks per block; True marks a cell excluded from the row's negatives.");

  m.def("count_active_negatives", [](const py::dict& masks) { return count_active_negatives(to_masks(masks)); });

  m.def(
      "contrastive_loss",
      [](const py::dict& model, const py::dict& masks, double temperature, bool include_pp_rows,
         const std::string& reduction) {
        LossConfig cfg;
        cfg.temperature = temperature;
        cfg.include_pp_rows = include_pp_rows;
        cfg.reduction = parse_reduction(reduction);
        const SimBlock s = to_block(model);
        const auto out = contrastive_loss({s, std::vector<bool>(s.batch_size(), false)}, to_masks(masks), cfg);
        py::dict d;
        d["value"] = out.value;
        d["per_sample"] = out.per_sample;
        d["active_negative_counts"] = out.active_negative_counts;
        d["grad"] = from_block(out.grad);
        return d;
      },
      py::arg("model"), py::arg("masks"), py::arg("temperature") = 0.01, py::arg("include_pp_rows") = true,
      py::arg("reduction") = "mean");

  m.def("tokenize",
        [](const std::string& text, std::uint64_t vocab_slots, std::uint64_t hash_seed, bool lowercase) {
          TokenizerConfig t;
          t.vocab_slots = vocab_slots;
          t.hash_seed = hash_seed;
          t.lowercase = lowercase;
          return tokenize(text, t);
        },
        py::arg("text"), py::arg("vocab_slots") = 4096, py::arg("hash_seed") = 0, py::arg("lowercase") = true);

  py::class_<EncoderParams>(m, "Encoder")
      .def(py::init([](std::size_t dim, std::uint64_t vocab_slots, std::uint64_t seed) {
             TokenizerConfig t;
             t.vocab_slots = vocab_slots;
             return init_encoder(t, dim, seed);
           }),
           py::arg("dim") = 32, py::arg("vocab_slots") = 4096, py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p).params; })
      .def("save", [](const EncoderParams& e, const std::filesystem::path& p) { save_checkpoint(p, e, nullptr); })
      .def_property_readonly("dim", &EncoderParams::dim)
      .def("embed", [](const EncoderParams& e, const std::vector<std::string>& texts) {
        return to_array(forward(texts, e).embeddings);
      });

  m.def("lr_at",
        [](std::uint64_t step, std::uint64_t total_steps, double learning_rate, double warmup_ratio,
           const std::string& schedule) {
          TrainConfig c;
          c.total_steps = total_steps;
          c.learning_rate = learning_rate;
          c.warmup_ratio = warmup_ratio;
          c.schedule = parse_schedule(schedule);
          return lr_at(step, c);
        },
        py::arg("step"), py::arg("total_steps"), py::arg("learning_rate"), py::arg("warmup_ratio") = 0.1,
        py::arg("schedule") = "linear");

  m.def("spearman", [](const std::vector<double>& pred, const std::vector<double>& gold) { return spearman(pred, gold); });
  m.def("ndcg_at_k",
        [](const std::vector<std::string>& ranking, const std::unordered_map<std::string, double>& gains,
           std::size_t k) { return ndcg_at_k(ranking, gains, k); },
        py::arg("ranking"), py::arg("gains"), py::arg("k") = 10);
  m.def("mean_average_precision",
        [](const std::vector<std::vector<std::string>>& rankings,
           const std::vector<std::unordered_set<std::string>>& relevant) {
          return mean_average_precision(rankings, relevant);
        });
  m.def("v_measure", [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    return v_measure(pred, gold);
  });
  m.def(
      "knn_accuracy",
      [](const Array& train, const std::vector<std::string>& train_labels, const Array& test,
         const std::vector<std::string>& test_labels, std::size_t k) {
        return knn_accuracy(to_matrix(train), train_labels, to_matrix(test), test_labels, k);
      },
      py::arg("train"), py::arg("train_labels"), py::arg("test"), py::arg("test_labels"), py::arg("k") = 5);

  m.def(
      "synthesize",
      [](const std::filesystem::path& out_dir, std::size_t num_clusters, std::size_t items_per_cluster,
         double false_negative_rate, double flip_positive_rate, bool with_negatives, std::uint64_t seed) {
        SynthConfig c;
        c.num_clusters = num_clusters;
        c.items_per_cluster = items_per_cluster;
        c.false_negative_rate = false_negative_rate;
        c.flip_positive_rate = flip_positive_rate;
        c.with_negatives = with_negatives;
        c.seed = seed;
        c.validate();
        return save_synth(generate(c), out_dir);
      },
      py::arg("out_dir"), py::arg("num_clusters") = 8, py::arg("items_per_cluster") = 32,
      py::arg("false_negative_rate") = 0.0, py::arg("flip_positive_rate") = 0.0, py::arg("with_negatives") = true,
      py::arg("seed") = 0, "Writes corpus, triplets, flags and an eval suite; returns notes.");

  m.def("run_cli", [](const std::vector<std::string>& args) { return cli::run(args); }, py::arg("args"),
        "Runs a gist subcommand in-process and returns its exit code.");
}
