#include "agriqa/service.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>

#include <httplib.h>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"

#ifndef AGRIQA_DEFAULT_DATA_DIR
#define AGRIQA_DEFAULT_DATA_DIR "data"
#endif

namespace agriqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidConfig, std::string("config field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + where + it.key() + "'");
  }
}

void require_file(const std::string& path, const char* what) {
  std::error_code ec;
  if (!path.empty() && !fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + " not found: " + path);
  }
}

void require_dir(const std::string& path, const char* what) {
  std::error_code ec;
  if (!path.empty() && !fs::is_directory(path, ec)) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + " not found: " + path);
  }
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  reply_json(res, http_status(code), error_body(error_code_name(code), message));
}

json parse_body(const httplib::Request& req) {
  if (text::trim(req.body).empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidInput, "request body must be a JSON object");
  return j;
}

json spec_json(const tools::ToolSpec& s) {
  json fields = json::array();
  for (const auto& f : s.input_schema) {
    fields.push_back({{"name", f.name}, {"type", tools::field_type_name(f.type)}, {"required", f.required}});
  }
  return {{"name", s.name},
          {"description", s.description},
          {"input_schema", fields},
          {"output_kind", tools::output_kind_name(s.output_kind)}};
}

json triple_json(const kg::Triple& t) {
  return {{"subject", t.subject}, {"predicate", t.predicate}, {"object", t.object}, {"provenance", t.provenance}};
}

std::vector<eval::QAPair> dataset_from_body(const json& body, const System& system) {
  if (!body.contains("dataset")) return system.dataset();
  if (!body["dataset"].is_array()) throw Error(ErrorCode::InvalidInput, "dataset must be an array");
  std::string lines;
  for (const auto& item : body["dataset"]) lines += item.dump() + "\n";
  return eval::parse_dataset(lines);
}

eval::MetricWeights weights_from_body(const json& body, eval::MetricWeights w) {
  if (!body.contains("weights")) return w;
  const auto& j = body["weights"];
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "weights must be an object");
  w.alpha = j.value("alpha", w.alpha);
  w.beta = j.value("beta", w.beta);
  w.gamma = j.value("gamma", w.gamma);
  w.validate();
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string ServiceConfig::default_data_dir() {
  if (const char* env = std::getenv("AGRIQA_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return AGRIQA_DEFAULT_DATA_DIR;
}

ServiceConfig ServiceConfig::with_data_dir(const std::string& data_dir) {
  fs::path d(data_dir);
  ServiceConfig c;
  c.corpus_dir = (d / "corpus").string();
  c.kg_triples = (d / "kg" / "triples.tsv").string();
  c.kg_entities = (d / "kg" / "entities.tsv").string();
  c.search_fixture_dir = (d / "search_fixtures").string();
  c.advisory_dir = (d / "tools" / "advisory").string();
  c.phenotype_coefficients = (d / "tools" / "phenotype_coefficients.tsv").string();
  c.stoplist = (d / "stoplist.txt").string();
  c.lexicon = (d / "intent_lexicon.tsv").string();
  c.dataset = (d / "eval" / "dataset.jsonl").string();
  c.transcript = (d / "transcripts" / "default.txt").string();
  return c;
}

ServiceConfig ServiceConfig::from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  reject_unknown(j,
                 {"host", "port", "corpus_dir", "index_dir", "kg_triples", "kg_entities", "search_fixture_dir",
                  "advisory_dir", "phenotype_coefficients", "stoplist", "lexicon", "dataset", "traces_dir",
                  "static_dir", "provider", "transcript", "remote_url", "remote_path", "remote_model", "api_key_env",
                  "timeout_ms", "ablation", "weights", "rouge", "max_steps", "chunk_size", "chunk_overlap",
                  "retrieval_k", "min_score"},
                 "");
  ServiceConfig c;
  read_field(j, "host", c.host);
  read_field(j, "port", c.port);
  for (auto [key, field] : std::initializer_list<std::pair<const char*, std::string*>>{
           {"corpus_dir", &c.corpus_dir},
           {"index_dir", &c.index_dir},
           {"kg_triples", &c.kg_triples},
           {"kg_entities", &c.kg_entities},
           {"search_fixture_dir", &c.search_fixture_dir},
           {"advisory_dir", &c.advisory_dir},
           {"phenotype_coefficients", &c.phenotype_coefficients},
           {"stoplist", &c.stoplist},
           {"lexicon", &c.lexicon},
           {"dataset", &c.dataset},
           {"traces_dir", &c.traces_dir},
           {"static_dir", &c.static_dir},
           {"transcript", &c.transcript}}) {
    read_field(j, key, *field);
    *field = resolve(base_dir, *field);
  }
  read_field(j, "provider", c.provider);
  read_field(j, "remote_url", c.remote_url);
  read_field(j, "remote_path", c.remote_path);
  read_field(j, "remote_model", c.remote_model);
  read_field(j, "api_key_env", c.api_key_env);
  read_field(j, "timeout_ms", c.timeout_ms);
  read_field(j, "max_steps", c.max_steps);
  read_field(j, "chunk_size", c.chunk_size);
  read_field(j, "chunk_overlap", c.chunk_overlap);
  read_field(j, "retrieval_k", c.retrieval_k);
  read_field(j, "min_score", c.min_score);
  if (j.contains("ablation")) {
    reject_unknown(j["ablation"], {"rag_enabled", "tools_enabled", "kg_enabled", "search_enabled"}, "ablation.");
    try {
      c.ablation = agent::ablation_from_json(j["ablation"]);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
  }
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    reject_unknown(w, {"alpha", "beta", "gamma"}, "weights.");
    read_field(w, "alpha", c.weights.alpha);
    read_field(w, "beta", c.weights.beta);
    read_field(w, "gamma", c.weights.gamma);
  }
  if (j.contains("rouge")) {
    const auto& r = j["rouge"];
    reject_unknown(r, {"lambda", "omega1", "omega2", "skip_gap"}, "rouge.");
    read_field(r, "lambda", c.rouge.lambda);
    read_field(r, "omega1", c.rouge.omega1);
    read_field(r, "omega2", c.rouge.omega2);
    read_field(r, "skip_gap", c.rouge.skip_gap);
  }
  return c;
}

ServiceConfig ServiceConfig::from_file(const std::string& path) {
  auto j = json::parse(text::read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, path + ": invalid JSON");
  return from_json(j, fs::path(path).parent_path().string());
}

json ServiceConfig::to_json() const {
  return {{"host", host},
          {"port", port},
          {"corpus_dir", corpus_dir},
          {"index_dir", index_dir},
          {"kg_triples", kg_triples},
          {"kg_entities", kg_entities},
          {"search_fixture_dir", search_fixture_dir},
          {"advisory_dir", advisory_dir},
          {"phenotype_coefficients", phenotype_coefficients},
          {"stoplist", stoplist},
          {"lexicon", lexicon},
          {"dataset", dataset},
          {"traces_dir", traces_dir},
          {"static_dir", static_dir},
          {"provider", provider},
          {"transcript", transcript},
          {"remote_url", remote_url},
          {"remote_path", remote_path},
          {"remote_model", remote_model},
          {"api_key_env", api_key_env},
          {"timeout_ms", timeout_ms},
          {"ablation", agent::to_json(ablation)},
          {"weights", {{"alpha", weights.alpha}, {"beta", weights.beta}, {"gamma", weights.gamma}}},
          {"rouge", {{"lambda", rouge.lambda}, {"omega1", rouge.omega1}, {"omega2", rouge.omega2}, {"skip_gap", rouge.skip_gap}}},
          {"max_steps", max_steps},
          {"chunk_size", chunk_size},
          {"chunk_overlap", chunk_overlap},
          {"retrieval_k", retrieval_k},
          {"min_score", min_score}};
}

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidConfig, "port out of range");
  require_dir(corpus_dir, "corpus directory");
  require_file(kg_triples, "KG triples file");
  require_file(kg_entities, "KG entities file");
  if (kg_triples.empty() != kg_entities.empty()) {
    throw Error(ErrorCode::InvalidConfig, "kg_triples and kg_entities must be given together");
  }
  require_dir(search_fixture_dir, "search fixture directory");
  require_dir(advisory_dir, "advisory directory");
  require_file(phenotype_coefficients, "phenotype coefficients file");
  require_file(stoplist, "stop-list file");
  require_file(lexicon, "intent lexicon file");
  require_file(dataset, "dataset file");
  require_dir(static_dir, "static asset directory");
  if (provider == "mock") {
    if (transcript.empty()) throw Error(ErrorCode::InvalidConfig, "mock provider needs a transcript");
    require_file(transcript, "transcript file");
  } else if (provider == "remote") {
    if (remote_url.empty()) throw Error(ErrorCode::InvalidConfig, "remote provider needs remote_url");
  } else {
    throw Error(ErrorCode::InvalidConfig, "provider must be 'mock' or 'remote'");
  }
  if (timeout_ms <= 0) throw Error(ErrorCode::InvalidConfig, "timeout_ms must be positive");
  if (max_steps == 0) throw Error(ErrorCode::InvalidConfig, "max_steps must be positive");
  if (chunk_size == 0 || chunk_overlap >= chunk_size) {
    throw Error(ErrorCode::InvalidConfig, "chunking requires 0 <= chunk_overlap < chunk_size");
  }
  if (retrieval_k == 0) throw Error(ErrorCode::InvalidConfig, "retrieval_k must be positive");
  try {
    weights.validate();
    rouge.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

json to_json(const AskResponse& r) {
  return {{"answer", r.answer}, {"trace", agent::to_json(r.trace)}, {"sources", r.sources}, {"timing_ms", r.timing_ms}};
}

// ---------------------------------------------------------------------------

System::System(ServiceConfig config) : config_(std::move(config)) {
  config_.validate();
  stoplist_ = config_.stoplist.empty() ? StopList::builtin() : StopList::from_file(config_.stoplist);
  lexicon_ = config_.lexicon.empty() ? IntentLexicon::builtin() : IntentLexicon::from_file(config_.lexicon);

  if (config_.provider == "mock") {
    gateway_.register_provider("mock", llm::ScriptedTranscript::from_file(config_.transcript));
  } else {
    llm::RemoteEndpoint ep;
    ep.base_url = config_.remote_url;
    ep.path = config_.remote_path;
    ep.model = config_.remote_model;
    ep.api_key_env = config_.api_key_env;
    ep.timeout = std::chrono::milliseconds(config_.timeout_ms);
    gateway_.register_provider("remote", ep);
  }

  std::error_code ec;
  if (!config_.index_dir.empty() && fs::is_regular_file(fs::path(config_.index_dir) / "chunks.tsv", ec)) {
    index_ = retrieval::VectorIndex::load(config_.index_dir);
  } else if (!config_.corpus_dir.empty()) {
    index_.ingest_directory(config_.corpus_dir, config_.chunk_size, config_.chunk_overlap);
  }

  if (!config_.kg_triples.empty()) {
    graph_.reload(kg::KnowledgeGraph::parse_triples(text::read_file(config_.kg_triples)),
                  kg::KnowledgeGraph::parse_entities(text::read_file(config_.kg_entities)));
  }

  auto phenotype = std::make_shared<const tools::PhenotypeModel>(
      config_.phenotype_coefficients.empty() ? tools::PhenotypeModel::builtin()
                                             : tools::PhenotypeModel::from_file(config_.phenotype_coefficients));
  tools::register_default_tools(registry_, phenotype, config_.advisory_dir);

  if (!config_.search_fixture_dir.empty()) {
    search_ = std::make_unique<tools::FixtureSearchConnector>(config_.search_fixture_dir);
  }

  agent::Resources res;
  res.gateway = &gateway_;
  res.index = &index_;
  res.graph = &graph_;
  res.registry = &registry_;
  res.search = search_.get();
  res.stoplist = &stoplist_;
  res.lexicon = &lexicon_;
  agent::AgentConfig ac;
  ac.max_steps = config_.max_steps;
  ac.provider = config_.provider;
  ac.retrieval_k = config_.retrieval_k;
  ac.min_score = config_.min_score;
  orchestrator_ = std::make_unique<agent::Orchestrator>(res, ac);
}

AskResponse System::ask(const std::string& question, const std::string& session_id,
                        const std::optional<agent::AblationConfig>& ablation) const {
  auto start = std::chrono::steady_clock::now();
  auto session = session_id.empty() ? "session-" + std::to_string(++session_counter_) : session_id;
  AskResponse r;
  r.trace = orchestrator_->run_episode(question, ablation.value_or(config_.ablation), session);
  r.answer = r.trace.final_answer;
  r.sources = r.trace.sources;
  r.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  if (!config_.traces_dir.empty()) agent::write_trace(r.trace, config_.traces_dir);
  return r;
}

std::size_t System::ingest_text(const std::string& doc_id, const std::string& body, const std::string& source) {
  if (text::trim(doc_id).empty()) throw Error(ErrorCode::InvalidInput, "doc_id is required");
  auto chunks = retrieval::chunk_document(doc_id, body, config_.chunk_size, config_.chunk_overlap, source);
  if (chunks.empty()) return 0;
  return index_.add(chunks);
}

std::vector<eval::QAPair> System::dataset() const {
  if (config_.dataset.empty()) throw Error(ErrorCode::InvalidConfig, "no dataset configured");
  return eval::load_dataset(config_.dataset);
}

// ---------------------------------------------------------------------------

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::EntityNotFound:
    case ErrorCode::ToolNotFound:
      return 404;
    case ErrorCode::UpstreamError:
    case ErrorCode::ScriptExhausted:
    case ErrorCode::ProviderNotFound:
    case ErrorCode::EpisodeFailed:
      return 502;
    case ErrorCode::StorageError:
    case ErrorCode::InvalidConfig:
      return 500;
    default:
      return 400;
  }
}

json error_body(std::string_view code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

HttpService::HttpService(System& system) : system_(system), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::routes() {
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const agent::EpisodeFailed& e) {
      auto body = error_body(error_code_name(e.code()), e.what());
      body["error"]["partial_trace"] = agent::to_json(e.partial_trace());
      reply_json(res, http_status(e.code()), body);
    } catch (const Error& e) {
      reply_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      reply_json(res, 500, error_body("internal", e.what()));
    } catch (...) {
      reply_json(res, 500, error_body("internal", "unknown failure"));
    }
  });
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      reply_json(res, 404, error_body("not_found", "no route for " + req.method + " " + req.path));
    } else {
      reply_json(res, res.status, error_body("http_error", "HTTP status " + std::to_string(res.status)));
    }
  });

  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    reply_json(res, 200, {{"status", "ok"}});
  });

  srv.Post("/ask", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body.contains("question") || !body["question"].is_string()) {
      return reply_error(res, ErrorCode::InvalidQuery, "question is required");
    }
    std::optional<agent::AblationConfig> ablation;
    if (body.contains("ablation")) ablation = agent::ablation_from_json(body["ablation"], system_.config().ablation);
    auto session = body.contains("session_id") && body["session_id"].is_string() ? body["session_id"].get<std::string>() : "";
    reply_json(res, 200, to_json(system_.ask(body["question"].get<std::string>(), session, ablation)));
  });

  srv.Post("/documents", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body.contains("doc_id") || !body["doc_id"].is_string() || !body.contains("text") || !body["text"].is_string()) {
      return reply_error(res, ErrorCode::InvalidInput, "doc_id and text are required");
    }
    auto doc_id = body["doc_id"].get<std::string>();
    auto n = system_.ingest_text(doc_id, body["text"].get<std::string>(), body.value("source", std::string()));
    reply_json(res, 200, {{"doc_id", doc_id}, {"chunks", n}, {"index_size", system_.index().size()}});
  });

  srv.Get(R"(/kg/entity/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto name = httplib::detail::decode_url(req.matches[1].str(), false);
    auto linked = system_.graph().link_entities({name});
    if (linked.empty()) return reply_error(res, ErrorCode::EntityNotFound, name);
    const auto& e = linked.front();
    json triples = json::array();
    for (const auto& t : system_.graph().neighborhood(e.id, 1)) triples.push_back(triple_json(t));
    reply_json(res, 200,
               {{"entity",
                 {{"id", e.id}, {"canonical_name", e.canonical_name}, {"aliases", e.aliases}, {"type_label", e.type_label}}},
                {"triples", triples}});
  });

  srv.Get("/tools", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& s : system_.registry().list_tools()) out.push_back(spec_json(s));
    reply_json(res, 200, {{"tools", out}});
  });

  srv.Post("/eval/run", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    auto dataset = dataset_from_body(body, system_);
    auto weights = weights_from_body(body, system_.config().weights);
    eval::ScoreReport report;
    if (body.contains("answers")) {
      if (!body["answers"].is_object()) throw Error(ErrorCode::InvalidInput, "answers must map id to text");
      std::map<std::string, std::string> answers;
      for (auto it = body["answers"].begin(); it != body["answers"].end(); ++it) {
        if (!it->is_string()) throw Error(ErrorCode::InvalidInput, "answer for " + it.key() + " must be a string");
        answers[it.key()] = it->get<std::string>();
      }
      report = eval::run_eval(dataset, answers, weights, system_.config().rouge, "answers");
    } else {
      auto ablation = body.contains("ablation") ? agent::ablation_from_json(body["ablation"], system_.config().ablation)
                                                : system_.config().ablation;
      report = eval::run_eval(dataset, eval::episode_answers(system_.orchestrator(), ablation, "eval/"), weights,
                              system_.config().rouge, "system");
    }
    auto out = eval::to_json(report);
    out["table"] = eval::render_report(report);
    reply_json(res, 200, out);
  });

  srv.Post("/eval/ablation", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    auto dataset = dataset_from_body(body, system_);
    auto weights = weights_from_body(body, system_.config().weights);
    auto configs = agent::standard_ablations();
    if (body.contains("configs")) {
      if (!body["configs"].is_array()) throw Error(ErrorCode::InvalidInput, "configs must be an array");
      configs.clear();
      for (const auto& c : body["configs"]) {
        if (!c.is_object() || !c.contains("label") || !c["label"].is_string()) {
          throw Error(ErrorCode::InvalidInput, "each config needs a label");
        }
        configs.emplace_back(c["label"].get<std::string>(),
                             agent::ablation_from_json(c.value("ablation", json::object())));
      }
    }
    auto rows = eval::run_ablation(dataset, configs, system_.orchestrator(), weights, system_.config().rouge);
    reply_json(res, 200, {{"rows", eval::to_json(rows)}, {"table", eval::render_ablation(rows)}});
  });

  if (!system_.config().static_dir.empty()) srv.set_mount_point("/", system_.config().static_dir);
}

int HttpService::bind(const std::string& host, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::InvalidConfig, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void HttpService::listen() { server_->listen_after_bind(); }

void HttpService::stop() {
  if (server_) server_->stop();
}

}  // namespace agriqa
