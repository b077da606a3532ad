// Command-line front end: serve, ask, ingest, kg, eval.

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "agriqa/error.hpp"
#include "agriqa/eval.hpp"
#include "agriqa/service.hpp"
#include "agriqa/text.hpp"

namespace fs = std::filesystem;
using namespace agriqa;

namespace {

// Every config field has a flag; unset flags leave the file/default value.
struct Overrides {
  std::string config_file;
  std::string data_dir;
  std::optional<std::string> host, corpus_dir, index_dir, kg_triples, kg_entities, search_fixture_dir, advisory_dir,
      phenotype_coefficients, stoplist, lexicon, dataset, traces_dir, static_dir, provider, transcript, remote_url,
      remote_path, remote_model, api_key_env;
  std::optional<int> port, timeout_ms;
  std::optional<std::size_t> max_steps, chunk_size, chunk_overlap, retrieval_k, skip_gap;
  std::optional<double> min_score, alpha, beta, gamma, lambda, omega1, omega2;
  bool no_rag = false, no_tools = false, no_kg = false, no_search = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "JSON config file");
    app.add_option("--data-dir", data_dir, "data directory used when no config file is given");
    app.add_option("--host", host);
    app.add_option("--port", port);
    app.add_option("--corpus-dir", corpus_dir);
    app.add_option("--index-dir", index_dir);
    app.add_option("--kg-triples", kg_triples);
    app.add_option("--kg-entities", kg_entities);
    app.add_option("--search-fixtures", search_fixture_dir);
    app.add_option("--advisory-dir", advisory_dir);
    app.add_option("--phenotype-coefficients", phenotype_coefficients);
    app.add_option("--stoplist", stoplist);
    app.add_option("--lexicon", lexicon);
    app.add_option("--dataset", dataset);
    app.add_option("--traces-dir", traces_dir);
    app.add_option("--static-dir", static_dir);
    app.add_option("--provider", provider)->check(CLI::IsMember({"mock", "remote"}));
    app.add_option("--transcript", transcript);
    app.add_option("--remote-url", remote_url);
    app.add_option("--remote-path", remote_path);
    app.add_option("--remote-model", remote_model);
    app.add_option("--api-key-env", api_key_env);
    app.add_option("--timeout-ms", timeout_ms);
    app.add_option("--max-steps", max_steps);
    app.add_option("--chunk-size", chunk_size);
    app.add_option("--chunk-overlap", chunk_overlap);
    app.add_option("--retrieval-k", retrieval_k);
    app.add_option("--min-score", min_score);
    app.add_option("--weight-bleu", alpha);
    app.add_option("--weight-rouge", beta);
    app.add_option("--weight-gleu", gamma);
    app.add_option("--rouge-lambda", lambda);
    app.add_option("--rouge-omega1", omega1);
    app.add_option("--rouge-omega2", omega2);
    app.add_option("--rouge-skip-gap", skip_gap);
    app.add_flag("--no-rag", no_rag);
    app.add_flag("--no-tools", no_tools);
    app.add_flag("--no-kg", no_kg);
    app.add_flag("--no-search", no_search);
  }

  ServiceConfig build() const {
    ServiceConfig c = !config_file.empty()
                          ? ServiceConfig::from_file(config_file)
                          : ServiceConfig::with_data_dir(data_dir.empty() ? ServiceConfig::default_data_dir() : data_dir);
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(c.host, host);
    set(c.port, port);
    set(c.corpus_dir, corpus_dir);
    set(c.index_dir, index_dir);
    set(c.kg_triples, kg_triples);
    set(c.kg_entities, kg_entities);
    set(c.search_fixture_dir, search_fixture_dir);
    set(c.advisory_dir, advisory_dir);
    set(c.phenotype_coefficients, phenotype_coefficients);
    set(c.stoplist, stoplist);
    set(c.lexicon, lexicon);
    set(c.dataset, dataset);
    set(c.traces_dir, traces_dir);
    set(c.static_dir, static_dir);
    set(c.provider, provider);
    set(c.transcript, transcript);
    set(c.remote_url, remote_url);
    set(c.remote_path, remote_path);
    set(c.remote_model, remote_model);
    set(c.api_key_env, api_key_env);
    set(c.timeout_ms, timeout_ms);
    set(c.max_steps, max_steps);
    set(c.chunk_size, chunk_size);
    set(c.chunk_overlap, chunk_overlap);
    set(c.retrieval_k, retrieval_k);
    set(c.min_score, min_score);
    set(c.weights.alpha, alpha);
    set(c.weights.beta, beta);
    set(c.weights.gamma, gamma);
    set(c.rouge.lambda, lambda);
    set(c.rouge.omega1, omega1);
    set(c.rouge.omega2, omega2);
    set(c.rouge.skip_gap, skip_gap);
    if (no_rag) c.ablation.rag_enabled = false;
    if (no_tools) c.ablation.tools_enabled = false;
    if (no_kg) c.ablation.kg_enabled = false;
    if (no_search) c.ablation.search_enabled = false;
    return c;
  }
};

// A value naming an existing file is read from disk; anything else is literal.
std::string file_or_text(const std::string& value) {
  std::error_code ec;
  if (fs::is_regular_file(value, ec)) return text::read_file(value);
  return value;
}

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

int run_serve(const ServiceConfig& config) {
  System system(config);
  HttpService service(system);
  int port = service.bind(config.host, config.port);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << config.host << ":" << port << " (" << system.index().size() << " chunks, "
            << system.graph().triple_count() << " triples, " << system.registry().list_tools().size() << " tools)"
            << std::endl;
  service.listen();
  g_service = nullptr;
  return 0;
}

void print_steps(const agent::AgentTrace& trace, const std::string& indent) {
  for (const auto& step : trace.steps) {
    std::cout << indent << step.index + 1 << ". " << agent::action_name(step.action);
    if (!step.action_input.empty()) {
      auto input = step.action_input;
      std::replace(input.begin(), input.end(), '\n', ' ');
      if (input.size() > 80) input = input.substr(0, 77) + "...";
      std::cout << " " << input;
    }
    if (step.action != agent::ActionKind::Answer) std::cout << (step.ok ? " [ok]" : " [failed]");
    std::cout << "\n";
    for (const auto& child : step.children) {
      std::cout << indent << "   sub-question: " << child.question << "\n";
      print_steps(child, indent + "      ");
    }
  }
}

int run_ask(const ServiceConfig& config, const std::string& question, const std::string& session, bool as_json) {
  System system(config);
  try {
    auto r = system.ask(question, session);
    if (as_json) {
      std::cout << to_json(r).dump(2) << "\n";
    } else {
      std::cout << r.answer << "\n\nTrace (" << r.trace.session_id << ", " << r.timing_ms << " ms"
                << (r.trace.truncated ? ", truncated" : "") << "):\n";
      print_steps(r.trace, "  ");
    }
    return 0;
  } catch (const agent::EpisodeFailed& e) {
    if (as_json) {
      auto body = error_body(error_code_name(e.code()), e.what());
      body["error"]["partial_trace"] = agent::to_json(e.partial_trace());
      std::cout << body.dump(2) << "\n";
    }
    throw;
  }
}

int run_ingest(const ServiceConfig& config, const std::string& dir, std::string out) {
  if (out.empty()) out = config.index_dir;
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no output directory: pass --out or --index-dir");
  retrieval::VectorIndex index;
  auto n = index.ingest_directory(dir, config.chunk_size, config.chunk_overlap);
  index.save(out);
  std::cout << "indexed " << n << " chunks from " << dir << " into " << out << "\n";
  return 0;
}

int run_kg_load(const std::string& triples, const std::string& entities, const std::string& out) {
  auto graph = kg::KnowledgeGraph::from_files(triples, entities);
  std::cout << "loaded " << graph.entity_count() << " entities and " << graph.triple_count() << " triples\n";
  if (!out.empty()) {
    fs::create_directories(out);
    graph.save((fs::path(out) / "triples.tsv").string(), (fs::path(out) / "entities.tsv").string());
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int run_eval(const ServiceConfig& config, const std::string& answers_file, bool as_json) {
  auto dataset = eval::load_dataset(config.dataset);
  eval::ScoreReport report;
  if (!answers_file.empty()) {
    report = eval::run_eval(dataset, eval::load_answers(answers_file), config.weights, config.rouge, "answers");
  } else {
    System system(config);
    report = eval::run_eval(dataset, eval::episode_answers(system.orchestrator(), config.ablation, "eval/"),
                            config.weights, config.rouge, "system");
  }
  if (as_json) {
    std::cout << eval::to_json(report).dump(2) << "\n";
  } else {
    std::cout << eval::render_report(report);
  }
  return 0;
}

int run_ablation(const ServiceConfig& config, bool as_json) {
  System system(config);
  auto rows = eval::run_ablation(system.dataset(), agent::standard_ablations(), system.orchestrator(), config.weights,
                                 config.rouge);
  if (as_json) {
    std::cout << eval::to_json(rows).dump(2) << "\n";
  } else {
    std::cout << eval::render_ablation(rows);
  }
  return 0;
}

int run_score(const ServiceConfig& config, const std::string& candidate, const std::string& reference) {
  config.weights.validate();
  config.rouge.validate();
  auto cand = file_or_text(candidate);
  auto ref = file_or_text(reference);
  auto s = eval::score_pair("pair", cand, ref, config.weights, config.rouge);
  auto b = eval::rouge_breakdown(text::metric_tokens(cand), text::metric_tokens(ref), config.rouge);
  std::cout << "bleu\t" << text::format_real(s.bleu) << "\n"
            << "rouge_l\t" << text::format_real(b.rouge_l) << "\n"
            << "rouge_su\t" << text::format_real(b.rouge_su) << "\n"
            << "rouge_ls\t" << text::format_real(b.rouge_ls) << "\n"
            << "rouge\t" << text::format_real(s.rouge) << "\n"
            << "gleu\t" << text::format_real(s.gleu) << "\n"
            << "composite\t" << text::format_real(s.composite) << "\n";
  return 0;
}

int run_manual(const std::string& file) {
  std::cout << eval::render_manual(eval::parse_manual_scores(text::read_file(file)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agricultural question answering agent"};
  app.require_subcommand(1);
  Overrides ov;
  ov.attach(app);

  auto* serve = app.add_subcommand("serve", "run the HTTP API");

  auto* ask = app.add_subcommand("ask", "answer one question");
  std::string question, session;
  bool ask_json = false;
  ask->add_option("question", question)->required();
  ask->add_option("--session", session);
  ask->add_flag("--json", ask_json, "print the answer with its full trace");

  auto* ingest = app.add_subcommand("ingest", "index a document directory");
  std::string ingest_dir, ingest_out;
  ingest->add_option("dir", ingest_dir)->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--out", ingest_out, "index directory to write");

  auto* kg_cmd = app.add_subcommand("kg", "knowledge graph utilities");
  kg_cmd->require_subcommand(1);
  auto* kg_load = kg_cmd->add_subcommand("load", "validate triple and entity files");
  std::string kg_triples, kg_entities, kg_out;
  kg_load->add_option("triples", kg_triples)->required()->check(CLI::ExistingFile);
  kg_load->add_option("entities", kg_entities)->required()->check(CLI::ExistingFile);
  kg_load->add_option("--out", kg_out, "directory for normalized copies");

  auto* eval_cmd = app.add_subcommand("eval", "evaluation");
  eval_cmd->require_subcommand(1);
  auto* eval_run = eval_cmd->add_subcommand("run", "score the dataset");
  std::string answers_file;
  bool eval_json = false;
  eval_run->add_option("--answers", answers_file, "JSONL answers to score instead of running the agent")
      ->check(CLI::ExistingFile);
  eval_run->add_flag("--json", eval_json);
  auto* eval_ablation = eval_cmd->add_subcommand("ablation", "score the standard ablation configurations");
  bool ablation_json = false;
  eval_ablation->add_flag("--json", ablation_json);
  auto* eval_score = eval_cmd->add_subcommand("score", "score one candidate against one reference");
  std::string candidate, reference;
  eval_score->add_option("--candidate", candidate, "text or file")->required();
  eval_score->add_option("--reference", reference, "text or file")->required();
  auto* eval_manual = eval_cmd->add_subcommand("manual", "weighted totals of manual ratings");
  std::string manual_file;
  eval_manual->add_option("file", manual_file)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*kg_load) return run_kg_load(kg_triples, kg_entities, kg_out);
    if (*eval_manual) return run_manual(manual_file);
    auto config = ov.build();
    if (*serve) return run_serve(config);
    if (*ask) return run_ask(config, question, session, ask_json);
    if (*ingest) return run_ingest(config, ingest_dir, ingest_out);
    if (*eval_run) return run_eval(config, answers_file, eval_json);
    if (*eval_ablation) return run_ablation(config, ablation_json);
    if (*eval_score) return run_score(config, candidate, reference);
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
