// Python bindings. Tags cross the boundary as the strings "B", "I", "O" and
// spans as (start, end) tuples; heavier objects stay on the C++ side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sensery/annotation.hpp"
#include "sensery/embeddings.hpp"
#include "sensery/error.hpp"
#include "sensery/eval.hpp"
#include "sensery/mixture.hpp"
#include "sensery/pipeline.hpp"
#include "sensery/synthetic.hpp"
#include "sensery/tagger.hpp"
#include "sensery/text.hpp"

namespace py = pybind11;
using namespace sensery;

namespace {

std::vector<BioTag> to_tags(const std::vector<std::string>& names) {
  std::vector<BioTag> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(parse_tag(n));
  return out;
}

std::vector<std::string> from_tags(const std::vector<BioTag>& tags) {
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (BioTag t : tags) out.emplace_back(tag_name(t));
  return out;
}

std::vector<std::pair<int, int>> from_spans(const std::vector<Span>& spans) {
  std::vector<std::pair<int, int>> out;
  for (const Span& s : spans) out.emplace_back(s.start, s.end);
  return out;
}

std::vector<Token> to_tokens(const std::vector<std::string>& words) {
  std::vector<Token> out;
  for (const auto& w : words) out.emplace_back(w);
  return out;
}

Tagger train(const std::filesystem::path& conll, const std::string& model, const std::string& variant,
             int epochs, std::uint64_t seed) {
  TaggerSpec spec;
  spec.kind = parse_model_kind(model);
  spec.variant = NeuralVariant::parse(variant);
  spec.crf.epochs = epochs;
  spec.neural.epochs = epochs;
  spec.set_seed(seed);
  const auto data = read_conll(conll);
  return train_tagger(spec, data);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sense-phrase tagging toolkit";

  // pybind11 tries the latest registration first, so subclasses follow bases.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", validation.ptr());
  py::register_exception<UndefinedAgreementError>(m, "UndefinedAgreementError", validation.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  m.def("tokenize", [](std::string_view text) {
    std::vector<std::string> out;
    for (const Token& t : tokenize(text)) out.push_back(t.surface);
    return out;
  });
  m.def("bio_encode", [](int n, const std::vector<std::pair<int, int>>& spans) {
    std::vector<Span> s;
    for (auto [a, b] : spans) s.push_back({a, b});
    return from_tags(bio_encode(n, s));
  }, py::arg("n"), py::arg("spans"));
  m.def("bio_decode", [](const std::vector<std::string>& tags) {
    return from_spans(bio_decode(to_tags(tags)));
  });
  m.def("is_bio_valid", [](const std::vector<std::string>& tags) { return is_bio_valid(to_tags(tags)); });
  m.def("repair_bio", [](const std::vector<std::string>& tags) {
    auto t = to_tags(tags);
    repair_bio(t);
    return from_tags(t);
  });

  m.def("cosine", [](const std::vector<double>& u, const std::vector<double>& v) { return cosine(u, v); });
  m.def("fleiss_kappa", [](const std::vector<std::vector<int>>& counts, int raters) {
    return fleiss_kappa(counts, raters);
  }, py::arg("counts"), py::arg("raters"));
  m.def("majority_yes", [](int yes, int no, int notsure) {
    Tally t;
    t.yes = yes;
    t.no = no;
    t.notsure = notsure;
    return majority_yes(t, t.total());
  }, py::arg("yes"), py::arg("no"), py::arg("notsure"));
  m.def("parse_alpha_grid", &parse_alpha_grid);

  py::class_<Tagger>(m, "Tagger")
      .def_static("load", &Tagger::load)
      .def("save", &Tagger::save)
      .def_property_readonly("kind", [](const Tagger& t) { return std::string(model_kind_name(t.kind())); })
      .def("tag", [](const Tagger& t, const std::vector<std::string>& words) {
        return from_tags(t.tag(to_tokens(words)));
      })
      .def("tag_text", [](const Tagger& t, std::string_view text) {
        const auto tokens = tokenize(text);
        std::vector<std::pair<std::string, std::string>> out;
        const auto tags = t.tag(tokens);
        for (std::size_t i = 0; i < tokens.size(); ++i) out.emplace_back(tokens[i].surface, tag_name(tags[i]));
        return out;
      });
  m.def("train", &train, py::arg("conll"), py::arg("model") = "crf", py::arg("variant") = "or,char",
        py::arg("epochs") = 30, py::arg("seed") = 1,
        "Train a tagger on a CoNLL file.");

  m.def("evaluate", [](const Tagger& t, const std::filesystem::path& conll) {
    const auto gold = read_conll(conll);
    return span_prf(gold, t.tag_all(gold)).to_json().dump();
  }, "Span scores of a tagger on a CoNLL file, as a JSON string.");

  m.def("write_synthetic_world", [](const std::filesystem::path& dir, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    write_synthetic_world(dir, spec);
  }, py::arg("dir"), py::arg("seed") = SyntheticSpec{}.seed);
  m.def("run_pipeline", [](const std::filesystem::path& config, const std::filesystem::path& run_dir) {
    return run_pipeline(PipelineConfig::load(config), run_dir).report_json.dump();
  }, py::arg("config"), py::arg("run_dir"), "Run the pipeline; returns report.json's content.");
}
