#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cli.hpp"
#include "json.hpp"

#include "ccoov/attention_export.hpp"
#include "ccoov/checkpoint.hpp"
#include "ccoov/evaluation.hpp"
#include "ccoov/synthetic.hpp"
#include "ccoov/training.hpp"

namespace py = pybind11;
using namespace ccoov;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

TrainConfig config_from(const std::map<std::string, std::string>& values) {
    TrainConfig config;
    for (const auto& [key, value] : values) set_config_value(config, key, value);
    config.validate();
    return config;
}

std::vector<OovKind> kinds_from(const std::vector<std::string>& names) {
    std::vector<OovKind> out;
    for (const auto& n : names) out.push_back(parse_oov_kind(n));
    return out;
}

py::dict oov_stats_dict(const OovStats& s) {
    py::dict d;
    d["tokens"] = s.tokens;
    d["oov_tokens"] = s.oov_tokens;
    d["token_rate"] = s.token_rate();
    d["types"] = s.types;
    d["oov_types"] = s.oov_types;
    d["type_rate"] = s.type_rate();
    return d;
}

// A loaded checkpoint plus the random-embedding seed it was trained with.
struct PyTagger {
    Checkpoint checkpoint;

    static PyTagger load(const std::filesystem::path& path) { return {load_checkpoint(path)}; }

    RandomEmbeddings random(const EmbeddingTable& table) const {
        return make_random_embeddings(table, checkpoint.config.seed);
    }

    py::object evaluate(const Corpus& corpus, const EmbeddingTable& table, const std::string& strategy) {
        return to_python(
            to_json(ccoov::evaluate(checkpoint.model, corpus, table, parse_oov_kind(strategy), random(table))));
    }

    py::object compare(const Corpus& corpus, const EmbeddingTable& table, const std::vector<std::string>& strategies) {
        const auto kinds = kinds_from(strategies);
        return to_python(reports_to_json(compare_strategies(checkpoint.model, corpus, table, kinds, random(table))));
    }

    Corpus predict(const Corpus& corpus, const EmbeddingTable& table, const std::string& strategy) {
        const OovKind kind = parse_oov_kind(strategy);
        const RandomEmbeddings r = random(table);
        Corpus out;
        for (const auto& s : corpus.sentences) {
            if (s.tokens.empty()) {
                out.sentences.push_back(s);
                continue;
            }
            out.sentences.push_back(
                apply_predictions(checkpoint.model, s, predict_sentence(checkpoint.model, s, table, kind, r)));
        }
        return out;
    }

    py::object attention(const Corpus& corpus, const EmbeddingTable& table, const std::vector<std::string>& targets,
                         double temperature) {
        const WordSet set(targets.begin(), targets.end());
        return to_python(attention_to_json(collect_attention(checkpoint.model, corpus, table, random(table), set,
                                                             temperature)));
    }

    py::dict config() const {
        py::dict d;
        for (const auto& [k, v] : config_key_values(checkpoint.config)) d[py::str(k)] = v;
        return d;
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Contextual-compositional OOV embeddings for BiLSTM POS and morphology tagging";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", base.ptr());

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def_static("read", &read_conllu, py::arg("path"))
        .def_static("parse", py::overload_cast<std::string_view>(&parse_conllu), py::arg("text"))
        .def("to_conllu", &to_conllu)
        .def_property_readonly("token_count", &Corpus::token_count)
        .def("__len__", [](const Corpus& c) { return c.sentences.size(); })
        .def("forms",
             [](const Corpus& c) {
                 std::vector<std::vector<std::string>> out;
                 for (const auto& s : c.sentences) {
                     auto& row = out.emplace_back();
                     for (const auto& t : s.tokens) row.push_back(t.form);
                 }
                 return out;
             })
        .def("tags",
             [](const Corpus& c) {
                 std::vector<std::vector<std::string>> out;
                 for (const auto& s : c.sentences) {
                     auto& row = out.emplace_back();
                     for (const auto& t : s.tokens) row.push_back(t.upos);
                 }
                 return out;
             })
        .def("__eq__", [](const Corpus& a, const Corpus& b) { return a == b; });

    py::class_<EmbeddingTable>(m, "EmbeddingTable")
        .def(py::init<std::size_t>(), py::arg("dim"))
        .def_static("load", &EmbeddingTable::load, py::arg("path"), py::arg("dim") = EmbeddingTable::kDefaultDim)
        .def("save", &EmbeddingTable::save, py::arg("path"))
        .def("add",
             [](EmbeddingTable& t, std::string word, const std::vector<double>& v) { t.add(std::move(word), v); },
             py::arg("word"), py::arg("vector"))
        .def_property_readonly("dim", &EmbeddingTable::dim)
        .def("__len__", &EmbeddingTable::size)
        .def("__contains__", [](const EmbeddingTable& t, const std::string& w) { return t.find_exact(w).has_value(); })
        .def("find", &EmbeddingTable::find, py::arg("form"), py::arg("lowercase_fallback") = true)
        .def("row",
             [](const EmbeddingTable& t, std::size_t i) {
                 if (i >= t.size()) throw py::index_error("row out of range");
                 const auto r = t.row(i);
                 return std::vector<double>(r.begin(), r.end());
             })
        .def("vector",
             [](const EmbeddingTable& t, const std::string& form, bool lowercase) -> std::optional<std::vector<double>> {
                 const auto i = t.find(form, lowercase);
                 if (!i) return std::nullopt;
                 const auto r = t.row(*i);
                 return std::vector<double>(r.begin(), r.end());
             },
             py::arg("form"), py::arg("lowercase_fallback") = true)
        .def_property_readonly("words", &EmbeddingTable::words)
        .def("stddev", &EmbeddingTable::stddev);

    m.def(
        "analyze_oov",
        [](Corpus corpus, const EmbeddingTable& table, bool lowercase) {
            return oov_stats_dict(mark_oov(corpus, table, lowercase));
        },
        py::arg("corpus"), py::arg("table"), py::arg("lowercase_fallback") = true,
        "Token and type OOV counts of a corpus against a table.");

    m.def(
        "default_config", [] { return config_key_values(TrainConfig{}); },
        "Training configuration defaults as strings.");

    m.def(
        "train",
        [](const Corpus& training, const EmbeddingTable& table, const std::filesystem::path& out,
           const std::optional<Corpus>& dev, const std::map<std::string, std::string>& config) {
            const TrainConfig c = config_from(config);
            TrainResult result;
            {
                py::gil_scoped_release release;
                result = ccoov::train(training, dev ? &*dev : nullptr, table, c);
            }
            save_checkpoint(result.model, c, out);
            py::dict d;
            d["best_epoch"] = result.best_epoch;
            d["epochs"] = to_python(training_log_json(result.log));
            return d;
        },
        py::arg("training"), py::arg("table"), py::arg("out"), py::arg("dev") = std::nullopt,
        py::arg("config") = std::map<std::string, std::string>{},
        "Train a tagger and OOV predictor, write the checkpoint to `out` and return the metrics log.");

    py::class_<PyTagger>(m, "Tagger")
        .def_static("load", &PyTagger::load, py::arg("path"))
        .def("evaluate", &PyTagger::evaluate, py::arg("corpus"), py::arg("table"), py::arg("strategy") = "predictor")
        .def("compare", &PyTagger::compare, py::arg("corpus"), py::arg("table"),
             py::arg("strategies") = std::vector<std::string>{"predictor", "random", "unk"})
        .def("predict", &PyTagger::predict, py::arg("corpus"), py::arg("table"), py::arg("strategy") = "predictor")
        .def("attention", &PyTagger::attention, py::arg("corpus"), py::arg("table"),
             py::arg("targets") = std::vector<std::string>{}, py::arg("temperature") = 1.0)
        .def_property_readonly("config", &PyTagger::config)
        .def_property_readonly("tags", [](const PyTagger& t) { return t.checkpoint.model.schema.tags(); });

    m.def(
        "synthetic",
        [](std::uint64_t seed, std::size_t train_sentences, std::size_t dev_sentences, std::size_t test_sentences) {
            SyntheticConfig c;
            c.seed = seed;
            c.train_sentences = train_sentences;
            c.dev_sentences = dev_sentences;
            c.test_sentences = test_sentences;
            SyntheticData d = generate_suffix_language(c);
            return py::make_tuple(std::move(d.train), std::move(d.dev), std::move(d.test), std::move(d.table));
        },
        py::arg("seed") = 1, py::arg("train_sentences") = 5000, py::arg("dev_sentences") = 300,
        py::arg("test_sentences") = 1000, "Synthetic suffix-morphology data: (train, dev, test, table).");

    m.def(
        "temperature_softmax",
        [](const std::vector<double>& scores, double temperature) { return temperature_softmax(scores, temperature); },
        py::arg("scores"), py::arg("temperature"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli_main(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit code, stdout, stderr).");
}
