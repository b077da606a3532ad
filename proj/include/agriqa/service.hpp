#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "agriqa/agent.hpp"
#include "agriqa/eval.hpp"
#include "agriqa/knowledge_graph.hpp"
#include "agriqa/llm_gateway.hpp"
#include "agriqa/query_analysis.hpp"
#include "agriqa/tools.hpp"
#include "agriqa/vector_retrieval.hpp"

namespace httplib {
class Server;
}

namespace agriqa {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;

  std::string corpus_dir;
  /// Persisted index; loaded when present, otherwise the corpus is ingested.
  std::string index_dir;
  std::string kg_triples;
  std::string kg_entities;
  std::string search_fixture_dir;
  std::string advisory_dir;
  std::string phenotype_coefficients;
  std::string stoplist;
  std::string lexicon;
  std::string dataset;
  std::string traces_dir;
  std::string static_dir;

  /// "mock" (scripted transcript) or "remote".
  std::string provider = "mock";
  std::string transcript;
  std::string remote_url;
  std::string remote_path = "/v1/chat/completions";
  std::string remote_model;
  std::string api_key_env = "AGRIQA_API_KEY";
  int timeout_ms = 30000;

  agent::AblationConfig ablation;
  eval::MetricWeights weights;
  eval::RougeParams rouge;

  std::size_t max_steps = 8;
  std::size_t chunk_size = retrieval::kDefaultChunkSize;
  std::size_t chunk_overlap = retrieval::kDefaultOverlap;
  std::size_t retrieval_k = 5;
  double min_score = retrieval::kDefaultMinScore;

  /// Paths below `data_dir` using the repository layout.
  static ServiceConfig with_data_dir(const std::string& data_dir);
  /// Data directory from $AGRIQA_DATA_DIR, else the build-time default.
  static std::string default_data_dir();

  /// Relative paths resolve against `base_dir`. Unknown keys are rejected.
  static ServiceConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
  static ServiceConfig from_file(const std::string& path);
  nlohmann::json to_json() const;

  /// Throws Error(InvalidConfig) naming the first problem.
  void validate() const;
};

struct AskResponse {
  std::string answer;
  agent::AgentTrace trace;
  std::vector<std::string> sources;
  long long timing_ms = 0;
};

nlohmann::json to_json(const AskResponse& r);

/// All modules wired together from one configuration.
class System {
 public:
  explicit System(ServiceConfig config);
  System(const System&) = delete;
  System& operator=(const System&) = delete;

  /// Throws Error(InvalidQuery) and agent::EpisodeFailed.
  AskResponse ask(const std::string& question, const std::string& session_id = "",
                  const std::optional<agent::AblationConfig>& ablation = std::nullopt) const;

  /// Chunks and indexes one document. Returns the chunk count.
  std::size_t ingest_text(const std::string& doc_id, const std::string& body, const std::string& source = "");

  std::vector<eval::QAPair> dataset() const;

  const ServiceConfig& config() const { return config_; }
  const retrieval::VectorIndex& index() const { return index_; }
  retrieval::VectorIndex& index() { return index_; }
  const kg::KnowledgeGraph& graph() const { return graph_; }
  const tools::ToolRegistry& registry() const { return registry_; }
  const llm::Gateway& gateway() const { return gateway_; }
  const agent::Orchestrator& orchestrator() const { return *orchestrator_; }

 private:
  ServiceConfig config_;
  StopList stoplist_;
  IntentLexicon lexicon_;
  llm::Gateway gateway_;
  retrieval::VectorIndex index_;
  kg::KnowledgeGraph graph_;
  tools::ToolRegistry registry_;
  std::unique_ptr<tools::SearchConnector> search_;
  std::unique_ptr<agent::Orchestrator> orchestrator_;
  mutable std::atomic<unsigned long> session_counter_{0};
};

/// HTTP front end over a System.
class HttpService {
 public:
  explicit HttpService(System& system);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds `host:port` (port 0 picks a free port). Throws
  /// Error(InvalidConfig) when binding fails.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  void routes();
  System& system_;
  std::unique_ptr<httplib::Server> server_;
};

/// Stable HTTP status for an error code.
int http_status(ErrorCode code);
nlohmann::json error_body(std::string_view code, const std::string& message);

}  // namespace agriqa
