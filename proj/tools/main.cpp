// Command line front end for the masking gateway library.
//
// Subcommands: extract, sanitize, restore, score, stats, simulate,
// bench-extract, serve. Options resolve as CLI flag > environment variable >
// config file > built-in default. See README.md for examples.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <maskgate/corpus.hpp>
#include <maskgate/extract.hpp>
#include <maskgate/gateway.hpp>
#include <maskgate/metrics.hpp>
#include <maskgate/remote.hpp>
#include <maskgate/restore.hpp>
#include <maskgate/sanitize.hpp>
#include <maskgate/service.hpp>
#include <maskgate/store.hpp>
#if defined(MASKGATE_HAVE_SODIUM) && MASKGATE_HAVE_SODIUM
#include <maskgate/store_codec_sodium.hpp>
#endif

namespace {

using maskgate::MaskStrategy;
using maskgate::PrivacyLevel;
using nlohmann::ordered_json;

struct Settings {
  std::string config_file;
  std::string store_dir = "maskgate_store";
  std::string strategy = "typed_reversible";
  std::string min_level = "PL2";
  std::string endpoint;
  std::string api_key;
  std::string model;
  std::string store_key;
  std::string prompt_file;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw std::runtime_error("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_input(const std::string& message, const std::string& input) {
  if (!message.empty()) return message;
  if (input.empty() || input == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return read_file(input);
}

// Resolution order: CLI flag > environment variable > config file > default.
// CLI11 has already written flag values into the slots by the time this runs,
// so a slot is only replaced when its flag was absent on the command line.
void apply_config_and_env(const CLI::App& app, Settings& s) {
  nlohmann::json cfg = nlohmann::json::object();
  if (!s.config_file.empty()) {
    cfg = nlohmann::json::parse(read_file(s.config_file));
    if (!cfg.is_object()) throw std::runtime_error("config file must hold a JSON object");
  }
  auto resolve = [&](const char* flag, const char* env, const char* key, std::string& slot) {
    if (flag && app.count(flag) > 0) return;  // explicit flag wins
    std::string from_env = env ? env_or(env, "") : "";
    if (!from_env.empty()) {
      slot = from_env;
      return;
    }
    if (cfg.contains(key) && cfg[key].is_string()) slot = cfg[key].get<std::string>();
  };
  resolve("--store-dir", nullptr, "store_dir", s.store_dir);
  resolve("--strategy", nullptr, "strategy", s.strategy);
  resolve("--min-level", nullptr, "min_level", s.min_level);
  resolve("--endpoint", "MASKGATE_ENDPOINT", "endpoint", s.endpoint);
  resolve("--model", "MASKGATE_MODEL", "model", s.model);
  resolve("--prompt-file", nullptr, "prompt_file", s.prompt_file);
  resolve(nullptr, "MASKGATE_API_KEY", "api_key", s.api_key);
  resolve(nullptr, "MASKGATE_STORE_KEY", "store_key", s.store_key);
}

MaskStrategy strategy_of(const Settings& s) {
  auto st = maskgate::parse_mask_strategy(s.strategy);
  if (!st) throw std::runtime_error("unknown strategy: " + s.strategy);
  return *st;
}

PrivacyLevel min_level_of(const Settings& s) {
  auto lv = maskgate::parse_privacy_level(s.min_level);
  if (!lv) throw std::runtime_error("unknown privacy level: " + s.min_level);
  return *lv;
}

std::unique_ptr<maskgate::MappingStore> open_store(const Settings& s) {
  maskgate::MappingStore::Options o;
  o.directory = s.store_dir;
  if (!s.store_key.empty()) {
#if defined(MASKGATE_HAVE_SODIUM) && MASKGATE_HAVE_SODIUM
    o.codec = std::make_shared<maskgate::SecretBoxCodec>(
        maskgate::SecretBoxCodec::from_hex(s.store_key));
#else
    throw std::runtime_error("store key set but this build has no encryption support");
#endif
  }
  return std::make_unique<maskgate::MappingStore>(std::move(o));
}

maskgate::RemoteConfig remote_config(const Settings& s) {
  maskgate::RemoteConfig cfg;
  if (s.endpoint.empty())
    throw std::runtime_error("remote endpoint not set (flag, MASKGATE_ENDPOINT or config)");
  cfg.endpoint = s.endpoint;
  cfg.api_key = s.api_key;
  if (!s.model.empty()) cfg.model = s.model;
  return cfg;
}

std::string default_prompt_path() {
  return std::string(MASKGATE_REPO_DIR) + "/data/prompts/extract_en.txt";
}

std::vector<maskgate::PrivacyItem> items_from_json(const ordered_json& arr,
                                                   const std::string& what) {
  if (!arr.is_array()) throw std::runtime_error(what + " must be a JSON array");
  std::vector<maskgate::PrivacyItem> items;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    items.push_back(
        maskgate::privacy_item_from_json(arr[i], what + "[" + std::to_string(i) + "]"));
  }
  return items;
}

ordered_json items_to_json(const std::vector<maskgate::PrivacyItem>& items) {
  ordered_json arr = ordered_json::array();
  for (const auto& it : items) arr.push_back(maskgate::to_json(it));
  return arr;
}

void emit(const ordered_json& j, const std::string& out_file) {
  if (out_file.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_file, std::ios::binary);
    if (!out.is_open()) throw std::runtime_error("cannot write: " + out_file);
    out << j.dump(2) << "\n";
  }
}

// Rendered tables ride along with the JSON report: to their own file when
// --table is given, otherwise to stdout when the JSON went to a file, else to
// stderr so stdout stays machine-parseable.
void emit_table(const std::string& table, const std::string& table_file,
                const std::string& json_out_file) {
  if (!table_file.empty()) {
    std::ofstream out(table_file, std::ios::binary);
    if (!out.is_open()) throw std::runtime_error("cannot write: " + table_file);
    out << table;
  } else if (!json_out_file.empty()) {
    std::cout << table;
  } else {
    std::cerr << table;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-masking gateway: local span extraction, reversible masking, restoration"};
  app.require_subcommand(1);
  app.fallthrough();  // lets global flags appear after the subcommand name

  Settings st;
  app.add_option("--config", st.config_file, "JSON config file");
  app.add_option("--store-dir", st.store_dir, "Mapping store directory");
  app.add_option("--strategy", st.strategy,
                 "Masking strategy: typed_reversible | untyped | irreversible | none");
  app.add_option("--min-level", st.min_level, "Lowest privacy level to mask (PL2..PL4)");
  app.add_option("--endpoint", st.endpoint, "Cloud endpoint (or MASKGATE_ENDPOINT)");
  app.add_option("--model", st.model, "Cloud model name (or MASKGATE_MODEL)");
  app.add_option("--prompt-file", st.prompt_file, "Extraction prompt template file");

  // extract
  std::string x_message, x_input, x_real_name, x_out;
  bool x_remote = false;
  auto* cmd_extract = app.add_subcommand("extract", "Detect privacy spans in a message");
  cmd_extract->add_option("--message", x_message, "Message text");
  cmd_extract->add_option("--input", x_input, "Read message from file ('-' = stdin)");
  cmd_extract->add_option("--real-name", x_real_name, "User's real name hint");
  cmd_extract->add_flag("--remote", x_remote, "Use the remote extraction model");
  cmd_extract->add_option("--out", x_out, "Write JSON here instead of stdout");

  // sanitize
  std::string z_user, z_message, z_input, z_real_name, z_out;
  bool z_remote = false;
  auto* cmd_sanitize = app.add_subcommand("sanitize", "Mask privacy spans in a message");
  cmd_sanitize->add_option("--user", z_user, "User id")->required();
  cmd_sanitize->add_option("--message", z_message, "Message text");
  cmd_sanitize->add_option("--input", z_input, "Read message from file ('-' = stdin)");
  cmd_sanitize->add_option("--real-name", z_real_name, "User's real name hint");
  cmd_sanitize->add_flag("--remote", z_remote, "Use the remote extraction model");
  cmd_sanitize->add_option("--out", z_out, "Write JSON here instead of stdout");

  // restore
  std::string r_user, r_message, r_input, r_out;
  auto* cmd_restore = app.add_subcommand("restore", "Replace placeholders with stored values");
  cmd_restore->add_option("--user", r_user, "User id")->required();
  cmd_restore->add_option("--message", r_message, "Text containing placeholders");
  cmd_restore->add_option("--input", r_input, "Read text from file ('-' = stdin)");
  cmd_restore->add_option("--out", r_out, "Write JSON here instead of stdout");

  // score
  std::string s_pred, s_gold, s_out;
  auto* cmd_score = app.add_subcommand("score", "Score predicted extraction items against gold");
  cmd_score->add_option("--pred", s_pred, "Predicted items JSON file")->required();
  cmd_score->add_option("--gold", s_gold, "Gold items JSON file")->required();
  cmd_score->add_option("--out", s_out, "Write JSON here instead of stdout");

  // stats
  std::string t_corpus, t_out;
  auto* cmd_stats = app.add_subcommand("stats", "Corpus statistics");
  cmd_stats->add_option("--corpus", t_corpus, "Corpus JSON file")->required();
  cmd_stats->add_option("--out", t_out, "Write JSON here instead of stdout");

  // simulate
  std::string m_corpus, m_strategies, m_work_dir, m_out, m_table;
  std::size_t m_workers = 1;
  auto* cmd_sim = app.add_subcommand(
      "simulate", "Replay a corpus under each masking strategy and compare quality vs leakage");
  cmd_sim->add_option("--corpus", m_corpus, "Corpus JSON file")->required();
  cmd_sim->add_option("--strategies", m_strategies,
                      "Comma-separated strategies (default: all four)");
  cmd_sim->add_option("--workers", m_workers, "Parallel strategy workers");
  cmd_sim->add_option("--work-dir", m_work_dir, "Keep per-strategy stores here");
  cmd_sim->add_option("--out", m_out, "Write report JSON here instead of stdout");
  cmd_sim->add_option("--table", m_table, "Write the rendered comparison table here");

  // bench-extract
  std::string b_corpus, b_out, b_table;
  bool b_remote = false;
  auto* cmd_bench = app.add_subcommand("bench-extract", "Extraction quality on annotated corpus");
  cmd_bench->add_option("--corpus", b_corpus, "Corpus JSON file")->required();
  cmd_bench->add_flag("--remote", b_remote, "Benchmark the remote extraction model");
  cmd_bench->add_option("--out", b_out, "Write JSON here instead of stdout");
  cmd_bench->add_option("--table", b_table, "Write the rendered score table here");

  // serve
  std::string v_host = "127.0.0.1", v_cloud = "echo";
  int v_port = 8787;
  auto* cmd_serve = app.add_subcommand("serve", "Run the local gateway HTTP service");
  cmd_serve->add_option("--host", v_host, "Bind host");
  cmd_serve->add_option("--port", v_port, "Bind port");
  cmd_serve->add_option("--cloud", v_cloud, "Cloud backend: echo | remote");

  CLI11_PARSE(app, argc, argv);

  try {
    apply_config_and_env(app, st);

    maskgate::RuleExtractor rules;
    auto make_remote_parts = [&](std::unique_ptr<maskgate::RemoteCloudClient>& client,
                                 std::unique_ptr<maskgate::RemoteExtractor>& extractor) {
      client = std::make_unique<maskgate::RemoteCloudClient>(remote_config(st));
      std::string prompt_path = st.prompt_file.empty() ? default_prompt_path() : st.prompt_file;
      extractor = std::make_unique<maskgate::RemoteExtractor>(*client, read_file(prompt_path));
    };

    if (*cmd_extract) {
      std::string msg = read_input(x_message, x_input);
      std::optional<std::string> name;
      if (!x_real_name.empty()) name = x_real_name;
      std::vector<maskgate::PrivacyItem> items;
      if (x_remote) {
        std::unique_ptr<maskgate::RemoteCloudClient> client;
        std::unique_ptr<maskgate::RemoteExtractor> extractor;
        make_remote_parts(client, extractor);
        items = extractor->extract(msg, name);
      } else {
        items = rules.extract(msg, name);
      }
      emit(items_to_json(items), x_out);
    } else if (*cmd_sanitize) {
      std::string msg = read_input(z_message, z_input);
      std::optional<std::string> name;
      if (!z_real_name.empty()) name = z_real_name;
      std::vector<maskgate::PrivacyItem> items;
      std::unique_ptr<maskgate::RemoteCloudClient> client;
      std::unique_ptr<maskgate::RemoteExtractor> extractor;
      if (z_remote) {
        make_remote_parts(client, extractor);
        items = extractor->extract(msg, name);
      } else {
        items = rules.extract(msg, name);
      }
      auto store = open_store(st);
      maskgate::UntypedMaskSession session;
      maskgate::Sanitizer sanitizer(strategy_of(st), store.get(), &session, min_level_of(st));
      auto s = sanitizer.sanitize(z_user, msg, items);
      ordered_json j;
      j["user_id"] = z_user;
      j["strategy"] = to_string(s.strategy);
      j["text"] = s.text;
      j["applied"] = ordered_json::array();
      for (const auto& m : s.applied) {
        j["applied"].push_back({{"token", m.token},
                                {"original_value", m.original_value},
                                {"type_slug", m.type_slug},
                                {"privacy_level", to_string(m.privacy_level)},
                                {"occurrences", m.occurrences}});
      }
      j["warnings"] = s.warnings;
      emit(j, z_out);
    } else if (*cmd_restore) {
      std::string msg = read_input(r_message, r_input);
      auto store = open_store(st);
      auto r = maskgate::restore_text(*store, r_user, msg);
      ordered_json j;
      j["user_id"] = r_user;
      j["text"] = r.text;
      j["resolved"] = r.resolved;
      j["unresolved"] = r.unresolved;
      emit(j, r_out);
    } else if (*cmd_score) {
      ordered_json pred = ordered_json::parse(read_file(s_pred));
      ordered_json gold = ordered_json::parse(read_file(s_gold));
      ordered_json j;
      bool per_message = pred.is_array() && !pred.empty() && pred[0].is_array();
      if (per_message) {
        if (!gold.is_array() || gold.size() != pred.size())
          throw std::runtime_error("--pred and --gold must have the same number of messages");
        ordered_json rows = ordered_json::array();
        double sp = 0, sr = 0, sf = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          auto s = maskgate::score_extraction(items_from_json(pred[i], "pred"),
                                              items_from_json(gold[i], "gold"));
          rows.push_back({{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
          sp += s.precision;
          sr += s.recall;
          sf += s.f1;
        }
        j["messages"] = pred.size();
        j["macro_precision"] = sp / double(pred.size());
        j["macro_recall"] = sr / double(pred.size());
        j["macro_f1"] = sf / double(pred.size());
        j["per_message"] = std::move(rows);
      } else {
        auto s = maskgate::score_extraction(items_from_json(pred, "pred"),
                                            items_from_json(gold, "gold"));
        j["precision"] = s.precision;
        j["recall"] = s.recall;
        j["f1"] = s.f1;
        j["matched_pairs"] = s.pairs.size();
        j["n_pred"] = s.n_pred;
        j["n_gold"] = s.n_gold;
      }
      emit(j, s_out);
    } else if (*cmd_stats) {
      auto corpus = maskgate::load_corpus(t_corpus, true);
      emit(maskgate::to_json(maskgate::compute_stats(corpus)), t_out);
    } else if (*cmd_sim) {
      auto corpus = maskgate::load_corpus(m_corpus, true);
      maskgate::ExperimentOptions opts;
      opts.min_level = min_level_of(st);
      opts.workers = m_workers;
      if (!m_work_dir.empty()) opts.work_dir = m_work_dir;
      if (!m_strategies.empty()) {
        opts.strategies.clear();
        std::stringstream ss(m_strategies);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          auto strat = maskgate::parse_mask_strategy(tok);
          if (!strat) throw std::runtime_error("unknown strategy: " + tok);
          opts.strategies.push_back(*strat);
        }
      }
      auto report = maskgate::run_experiment(corpus, rules, opts);
      emit(maskgate::to_json(report), m_out);
      emit_table(maskgate::render_strategy_table(report), m_table, m_out);
    } else if (*cmd_bench) {
      auto corpus = maskgate::load_corpus(b_corpus, true);
      ordered_json j;
      std::string table;
      if (b_remote) {
        std::unique_ptr<maskgate::RemoteCloudClient> client;
        std::unique_ptr<maskgate::RemoteExtractor> extractor;
        make_remote_parts(client, extractor);
        auto rep = maskgate::run_extraction_benchmark(corpus, *extractor);
        j = maskgate::to_json(rep);
        j["dropped_items"] = extractor->dropped_items();
        table = maskgate::render_extraction_table(rep, "remote");
      } else {
        auto rep = maskgate::run_extraction_benchmark(corpus, rules);
        j = maskgate::to_json(rep);
        table = maskgate::render_extraction_table(rep, "rules");
      }
      emit(j, b_out);
      emit_table(table, b_table, b_out);
    } else if (*cmd_serve) {
      auto store = open_store(st);
      std::unique_ptr<maskgate::CloudAgentClient> cloud;
      if (v_cloud == "echo") {
        cloud = std::make_unique<maskgate::EchoCloudClient>();
      } else if (v_cloud == "remote") {
        cloud = std::make_unique<maskgate::RemoteCloudClient>(remote_config(st));
      } else {
        throw std::runtime_error("unknown cloud backend: " + v_cloud);
      }
      maskgate::ServiceOptions so;
      so.strategy = strategy_of(st);
      so.min_level = min_level_of(st);
      maskgate::GatewayService service(rules, *store, *cloud, so);
      std::cerr << "listening on http://" << v_host << ":" << v_port << " (cloud: " << v_cloud
                << ", strategy: " << to_string(so.strategy) << ")\n";
      if (!service.listen(v_host, v_port)) {
        throw std::runtime_error("cannot bind " + v_host + ":" + std::to_string(v_port));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
