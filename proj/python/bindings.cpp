#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "agriqa/error.hpp"
#include "agriqa/eval.hpp"
#include "agriqa/knowledge_graph.hpp"
#include "agriqa/query_analysis.hpp"
#include "agriqa/service.hpp"
#include "agriqa/text.hpp"
#include "agriqa/tools.hpp"
#include "agriqa/vector_retrieval.hpp"

namespace py = pybind11;
using namespace agriqa;

namespace {

py::dict chunk_dict(const retrieval::DocumentChunk& c) {
  py::dict d;
  d["doc_id"] = c.doc_id;
  d["chunk_id"] = c.chunk_id;
  d["text"] = c.text;
  d["source"] = c.source;
  d["token_count"] = c.token_count;
  return d;
}

eval::Tokens tokens(const std::string& s) { return text::metric_tokens(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the agricultural QA agent";

  static py::exception<Error> error_type(m, "AgriQAError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object args = py::make_tuple(std::string(error_code_name(e.code())), std::string(e.what()));
      PyErr_SetObject(error_type.ptr(), args.ptr());
    }
  });

  m.def(
      "analyze",
      [](const std::string& question) {
        auto q = analyze(question);
        py::dict d;
        d["keywords"] = q.keywords;
        d["action_words"] = q.action_words;
        d["intent"] = std::string(intent_name(q.intent));
        d["prompt"] = q.prompt;
        return d;
      },
      py::arg("question"));

  m.def("metric_tokens", &text::metric_tokens, py::arg("text"));
  m.def(
      "bleu", [](const std::string& c, const std::string& r) { return eval::bleu(tokens(c), tokens(r)); },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "gleu", [](const std::string& c, const std::string& r) { return eval::gleu(tokens(c), tokens(r)); },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "rouge",
      [](const std::string& c, const std::string& r) {
        auto b = eval::rouge_breakdown(tokens(c), tokens(r));
        py::dict d;
        d["rouge_l"] = b.rouge_l;
        d["rouge_su"] = b.rouge_su;
        d["rouge_ls"] = b.rouge_ls;
        d["blended"] = b.blended;
        return d;
      },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "composite", [](double b, double r, double g) { return eval::composite(b, r, g); }, py::arg("bleu"),
      py::arg("rouge"), py::arg("gleu"));
  m.def(
      "manual_total", [](double a, double p, double f) { return eval::manual_total(a, p, f); }, py::arg("accuracy"),
      py::arg("professionalism"), py::arg("fluency"));
  m.def(
      "score_pair",
      [](const std::string& c, const std::string& r) {
        auto s = eval::score_pair("pair", c, r);
        py::dict d;
        d["bleu"] = s.bleu;
        d["rouge"] = s.rouge;
        d["gleu"] = s.gleu;
        d["composite"] = s.composite;
        return d;
      },
      py::arg("candidate"), py::arg("reference"));

  m.def("predict_promoter_enrichment", &tools::predict_promoter_enrichment, py::arg("sequence"));

  m.def(
      "chunk_document",
      [](const std::string& doc_id, const std::string& body, std::size_t size, std::size_t overlap) {
        py::list out;
        for (const auto& c : retrieval::chunk_document(doc_id, body, size, overlap)) out.append(chunk_dict(c));
        return out;
      },
      py::arg("doc_id"), py::arg("text"), py::arg("chunk_size") = retrieval::kDefaultChunkSize,
      py::arg("overlap") = retrieval::kDefaultOverlap);

  py::class_<retrieval::VectorIndex>(m, "VectorIndex")
      .def(py::init<>())
      .def(
          "add_document",
          [](retrieval::VectorIndex& self, const std::string& doc_id, const std::string& body, const std::string& source) {
            return self.add(retrieval::chunk_document(doc_id, body, retrieval::kDefaultChunkSize,
                                                      retrieval::kDefaultOverlap, source));
          },
          py::arg("doc_id"), py::arg("text"), py::arg("source") = "")
      .def("ingest_directory", &retrieval::VectorIndex::ingest_directory, py::arg("dir"),
           py::arg("chunk_size") = retrieval::kDefaultChunkSize, py::arg("overlap") = retrieval::kDefaultOverlap)
      .def(
          "search",
          [](const retrieval::VectorIndex& self, const std::string& query, std::size_t k, double min_score) {
            py::list out;
            for (const auto& h : self.search(query, k, min_score)) {
              auto d = chunk_dict(h.chunk);
              d["score"] = h.score;
              out.append(d);
            }
            return out;
          },
          py::arg("query"), py::arg("k") = 5, py::arg("min_score") = retrieval::kDefaultMinScore)
      .def("save", &retrieval::VectorIndex::save, py::arg("dir"))
      .def_static("load", &retrieval::VectorIndex::load, py::arg("dir"))
      .def("__len__", &retrieval::VectorIndex::size);

  py::class_<kg::KnowledgeGraph>(m, "KnowledgeGraph")
      .def_static("from_files", &kg::KnowledgeGraph::from_files, py::arg("triples"), py::arg("entities"))
      .def(
          "link",
          [](const kg::KnowledgeGraph& g, const std::vector<std::string>& keywords) {
            std::vector<std::string> ids;
            for (const auto& e : g.link_entities(keywords)) ids.push_back(e.id);
            return ids;
          },
          py::arg("keywords"))
      .def(
          "neighborhood",
          [](const kg::KnowledgeGraph& g, const std::string& id, int depth) {
            std::vector<std::tuple<std::string, std::string, std::string, std::string>> out;
            for (const auto& t : g.neighborhood(id, depth)) out.emplace_back(t.subject, t.predicate, t.object, t.provenance);
            return out;
          },
          py::arg("entity_id"), py::arg("depth") = 1)
      .def_property_readonly("triple_count", &kg::KnowledgeGraph::triple_count)
      .def_property_readonly("entity_count", &kg::KnowledgeGraph::entity_count);

  py::class_<System>(m, "System")
      .def(py::init([](const std::string& config_json) {
             return std::make_unique<System>(ServiceConfig::from_json(nlohmann::json::parse(config_json)));
           }),
           py::arg("config_json"))
      .def_static("default_data_dir", &ServiceConfig::default_data_dir)
      .def_static(
          "default_config_json",
          [](const std::string& data_dir) { return ServiceConfig::with_data_dir(data_dir).to_json().dump(); },
          py::arg("data_dir"))
      .def(
          "ask_json",
          [](const System& s, const std::string& question, const std::string& session) {
            AskResponse r;
            {
              py::gil_scoped_release release;
              r = s.ask(question, session);
            }
            return to_json(r).dump();
          },
          py::arg("question"), py::arg("session_id") = "")
      .def(
          "eval_json",
          [](const System& s) {
            eval::ScoreReport report;
            {
              py::gil_scoped_release release;
              report = eval::run_eval(s.dataset(),
                                      eval::episode_answers(s.orchestrator(), s.config().ablation, "eval/"),
                                      s.config().weights, s.config().rouge, "system");
            }
            return eval::to_json(report).dump();
          })
      .def("ingest_text", &System::ingest_text, py::arg("doc_id"), py::arg("text"), py::arg("source") = "")
      .def_property_readonly("tool_names", [](const System& s) {
        std::vector<std::string> out;
        for (const auto& spec : s.registry().list_tools()) out.push_back(spec.name);
        return out;
      });
}
