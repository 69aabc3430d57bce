#pragma once

// The privacy gateway and the offline evaluation harness around it.
//
// Online path (process_turn): extract sensitive spans locally, mask them,
// send only masked text to the cloud agent, restore the response locally.
// The cloud side of the conversation history therefore never contains an
// original value.
//
// Offline path (run_experiment): replays an annotated corpus through a small
// deterministic memory-augmented assistant under each masking strategy and
// reports answer quality and residual leakage side by side. The memory mock
// is intentionally simple — bag-of-tokens retrieval plus a span-continuation
// answer rule — so results are exactly reproducible.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include <maskgate/corpus.hpp>
#include <maskgate/extract.hpp>
#include <maskgate/metrics.hpp>
#include <maskgate/restore.hpp>
#include <maskgate/sanitize.hpp>
#include <maskgate/store.hpp>
#include <maskgate/text.hpp>

namespace maskgate {

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

class CloudAgentClient {
 public:
  virtual ~CloudAgentClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

// Echoes the newest user message back; with this client the gateway's
// sanitize → cloud → restore loop must reproduce the input byte for byte.
class EchoCloudClient final : public CloudAgentClient {
 public:
  std::string complete(const std::vector<ChatMessage>& messages) override {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
      if (it->role == "user") return it->content;
    return "";
  }
};

class FunctionCloudClient final : public CloudAgentClient {
 public:
  using Fn = std::function<std::string(const std::vector<ChatMessage>&)>;
  explicit FunctionCloudClient(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const std::vector<ChatMessage>& messages) override { return fn_(messages); }

 private:
  Fn fn_;
};

// --- deterministic retrieval memory ------------------------------------------

// Matches one token of the retrieval alphabet that must stay atomic: any
// angle-bracketed mask token <Word_N> (letters of either case, so both
// <EMAIL_2> and <Mask_3> qualify). Returns one past '>' on a match.
inline std::optional<std::size_t> match_mask_token(std::string_view s, std::size_t i) {
  if (i >= s.size() || s[i] != '<') return std::nullopt;
  auto is_letter = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); };
  auto is_body = [&](char c) { return is_letter(c) || (c >= '0' && c <= '9') || c == '_'; };
  std::size_t j = i + 1;
  if (j >= s.size() || !is_letter(s[j])) return std::nullopt;
  std::size_t last_us = std::string_view::npos;
  while (j < s.size() && is_body(s[j])) {
    if (s[j] == '_') last_us = j;
    ++j;
  }
  if (j >= s.size() || s[j] != '>') return std::nullopt;
  if (last_us == std::string_view::npos || last_us + 1 >= j) return std::nullopt;
  if (s[last_us + 1] < '1' || s[last_us + 1] > '9') return std::nullopt;  // no leading zeros
  for (std::size_t k = last_us + 1; k < j; ++k)
    if (s[k] < '0' || s[k] > '9') return std::nullopt;
  return j + 1;
}

// Simulates the provider-side conversation memory. It stores the sanitized
// user messages verbatim, retrieves by distinct-token overlap and answers
// with the span that follows the matched part of the memory — a stand-in for
// "the model repeats the relevant remainder of what it was told".
class MockMemorySystem {
 public:
  // Tokenization for retrieval: like tokenize(), but mask tokens (<EMAIL_1>,
  // <Mask_2>) and redaction runs (***) are kept as single opaque tokens, the
  // way a subword model treats consistently repeated artifacts.
  static std::vector<Token> memory_token_spans(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0, seg_begin = 0;
    auto flush = [&](std::size_t end) {
      if (end <= seg_begin) return;
      for (auto& t : tokenize_spans(text.substr(seg_begin, end - seg_begin))) {
        t.begin += seg_begin;
        t.end += seg_begin;
        out.push_back(std::move(t));
      }
    };
    while (i < text.size()) {
      if (text[i] == '<') {
        if (auto end = match_mask_token(text, i)) {
          flush(i);
          out.push_back(Token{std::string(text.substr(i, *end - i)), i, *end});
          seg_begin = i = *end;
          continue;
        }
      } else if (text[i] == '*') {
        std::size_t j = i;
        while (j < text.size() && text[j] == '*') ++j;
        if (j - i >= 3) {
          flush(i);
          out.push_back(Token{std::string(text.substr(i, j - i)), i, j});
          seg_begin = i = j;
          continue;
        }
        i = j;
        continue;
      }
      ++i;
    }
    flush(text.size());
    return out;
  }

  static std::vector<std::string> memory_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : memory_token_spans(text)) out.push_back(std::move(t.text));
    return out;
  }

  static bool contains_contiguous(const std::vector<std::string>& haystack,
                                  const std::vector<std::string>& needle) {
    if (needle.empty()) return true;
    if (needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
      bool all = true;
      for (std::size_t k = 0; k < needle.size(); ++k) {
        if (haystack[i + k] != needle[k]) {
          all = false;
          break;
        }
      }
      if (all) return true;
    }
    return false;
  }

  void ingest(const std::string& user_id, const std::string& text) {
    auto& mem = memories_[user_id];
    Entry e;
    e.text = text;
    e.tokens = memory_tokens(text);
    mem.push_back(std::move(e));
  }

  std::size_t size(const std::string& user_id) const {
    auto it = memories_.find(user_id);
    return it == memories_.end() ? 0 : it->second.size();
  }

  struct Retrieved {
    std::size_t index = 0;   // insertion index within the user's memory
    std::string text;
    std::size_t overlap = 0;  // distinct shared tokens with the query
  };

  // Highest distinct-token overlap wins; ties go to the earlier memory. No
  // overlap means no retrieval.
  std::optional<Retrieved> retrieve(const std::string& user_id, const std::string& query) const {
    auto it = memories_.find(user_id);
    if (it == memories_.end()) return std::nullopt;
    auto qt = memory_tokens(query);
    std::unordered_set<std::string> qset(qt.begin(), qt.end());
    std::size_t best_index = 0, best_overlap = 0;
    for (std::size_t idx = 0; idx < it->second.size(); ++idx) {
      std::unordered_set<std::string> counted;
      std::size_t overlap = 0;
      for (const auto& tok : it->second[idx].tokens)
        if (qset.count(tok) && counted.insert(tok).second) ++overlap;
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best_index = idx;
      }
    }
    if (best_overlap == 0) return std::nullopt;
    return Retrieved{best_index, it->second[best_index].text, best_overlap};
  }

  // Answer rule: inside the retrieved memory, find the first maximal run of
  // tokens the query also contains, and answer with everything after that
  // run — the part the question did not already say. Degenerate runs (none,
  // or running to the end) answer with the whole memory.
  std::string answer(const std::string& user_id, const std::string& query) const {
    auto got = retrieve(user_id, query);
    if (!got) return "";
    auto qt = memory_tokens(query);
    std::unordered_set<std::string> qset(qt.begin(), qt.end());
    auto toks = memory_token_spans(got->text);
    std::size_t run_end = std::string::npos;
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (qset.count(toks[k].text)) {
        run_end = k;
        while (run_end + 1 < toks.size() && qset.count(toks[run_end + 1].text)) ++run_end;
        break;
      }
    }
    if (run_end == std::string::npos || run_end + 1 >= toks.size()) return got->text;
    return got->text.substr(toks[run_end + 1].begin);
  }

 private:
  struct Entry {
    std::string text;
    std::vector<std::string> tokens;
  };
  std::unordered_map<std::string, std::vector<Entry>> memories_;
};

// --- online gateway -----------------------------------------------------------

struct TurnAudit {
  std::string user_id;
  MaskStrategy strategy = MaskStrategy::typed_reversible;
  bool rejected = false;         // precondition failed; nothing left the machine
  std::string error;             // non-empty when the cloud call failed
  std::vector<PrivacyItem> extracted;
  SanitizedMessage sanitized;    // exactly what was sent
  std::string cloud_response;    // exactly what came back
  RestoredText restored;         // what the local user sees

  bool ok() const { return !rejected && error.empty(); }
};

struct GatewayOptions {
  MaskStrategy strategy = MaskStrategy::typed_reversible;
  PrivacyLevel min_level = PrivacyLevel::PL2;
};

class Gateway {
 public:
  Gateway(const Extractor& extractor, MappingStore& store, CloudAgentClient& cloud,
          GatewayOptions options = {})
      : extractor_(extractor),
        store_(store),
        cloud_(cloud),
        options_(options),
        sanitizer_(options.strategy, &store, &session_, options.min_level) {}

  // One conversational turn. The outbound history only ever holds sanitized
  // user messages and raw cloud responses, never original values.
  TurnAudit process_turn(const std::string& user_id, const std::string& message,
                         const std::optional<std::string>& real_name = std::nullopt) {
    TurnAudit audit;
    audit.user_id = user_id;
    audit.strategy = options_.strategy;
    if (contains_placeholder(message)) {
      // Letting such input through would let a user forge or probe mask
      // tokens; the turn is refused before anything is extracted or sent.
      audit.rejected = true;
      audit.error = "input contains placeholder-shaped tokens";
      return audit;
    }
    try {
      audit.extracted = extractor_.extract(message, real_name);
      audit.sanitized = sanitizer_.sanitize(user_id, message, audit.extracted);
    } catch (const std::exception& e) {
      // Fail closed: when span extraction cannot run, nothing leaves the
      // machine rather than sending the message unmasked.
      audit.error = std::string("extraction failed: ") + e.what();
      return audit;
    }

    auto& history = histories_[user_id];
    std::vector<ChatMessage> outbound = history;
    outbound.push_back(ChatMessage{"user", audit.sanitized.text});
    try {
      audit.cloud_response = cloud_.complete(outbound);
    } catch (const std::exception& e) {
      audit.error = std::string("cloud call failed: ") + e.what();
      return audit;  // history unchanged; the turn can simply be retried
    }
    history = std::move(outbound);
    history.push_back(ChatMessage{"assistant", audit.cloud_response});

    if (options_.strategy == MaskStrategy::typed_reversible) {
      audit.restored = restore_text(store_, user_id, audit.cloud_response);
    } else {
      audit.restored.text = audit.cloud_response;
    }
    return audit;
  }

  const std::vector<ChatMessage>& history(const std::string& user_id) const {
    static const std::vector<ChatMessage> kEmpty;
    auto it = histories_.find(user_id);
    return it == histories_.end() ? kEmpty : it->second;
  }

  void reset_history(const std::string& user_id) { histories_.erase(user_id); }

 private:
  const Extractor& extractor_;
  MappingStore& store_;
  CloudAgentClient& cloud_;
  GatewayOptions options_;
  UntypedMaskSession session_;
  Sanitizer sanitizer_;
  std::unordered_map<std::string, std::vector<ChatMessage>> histories_;
};

// --- strategy comparison experiment -------------------------------------------

struct QaOutcome {
  std::string user_id;
  std::string category;
  bool privacy_dependent = false;
  bool correct = false;
  std::string answer;  // post-restore answer, kept in memory for inspection only
};

struct StrategyResult {
  MaskStrategy strategy = MaskStrategy::none;

  std::size_t user_messages = 0;
  std::size_t masked_messages = 0;
  std::size_t masked_values = 0;
  std::size_t sanitize_warnings = 0;

  std::size_t leak_eligible = 0;  // annotated values at/above the leakage threshold
  std::size_t leak_leaked = 0;    // of those, still present verbatim after masking

  std::size_t qa_total = 0, qa_correct = 0;
  std::size_t dep_total = 0, dep_correct = 0;

  // Generation-quality scores of the (restored) answers against the reference
  // answers, summed over all QA items; read them through the mean accessors.
  double bleu1_sum = 0.0;
  double bleu2_sum = 0.0;
  double meteor_sum = 0.0;
  double rouge_l_sum = 0.0;

  std::vector<QaOutcome> outcomes;

  std::optional<double> qa_accuracy_delta_vs_none;
  std::optional<double> leakage_delta_vs_none;

  double qa_accuracy() const { return qa_total ? double(qa_correct) / double(qa_total) : 0.0; }
  double dep_accuracy() const { return dep_total ? double(dep_correct) / double(dep_total) : 0.0; }
  double indep_accuracy() const {
    std::size_t n = qa_total - dep_total;
    return n ? double(qa_correct - dep_correct) / double(n) : 0.0;
  }
  double residual_leakage() const {
    return leak_eligible ? double(leak_leaked) / double(leak_eligible) : 0.0;
  }
  double mean_bleu1() const { return qa_total ? bleu1_sum / double(qa_total) : 0.0; }
  double mean_bleu2() const { return qa_total ? bleu2_sum / double(qa_total) : 0.0; }
  double mean_meteor() const { return qa_total ? meteor_sum / double(qa_total) : 0.0; }
  double mean_rouge_l() const { return qa_total ? rouge_l_sum / double(qa_total) : 0.0; }
};

struct ExperimentReport {
  std::size_t users = 0;
  std::size_t qa_items = 0;
  PrivacyLevel min_level = PrivacyLevel::PL2;
  PrivacyLevel leakage_threshold = PrivacyLevel::PL2;
  std::vector<StrategyResult> strategies;

  const StrategyResult* result_for(MaskStrategy s) const {
    for (const auto& r : strategies)
      if (r.strategy == s) return &r;
    return nullptr;
  }
};

struct ExperimentOptions {
  std::vector<MaskStrategy> strategies = all_mask_strategies();
  PrivacyLevel min_level = PrivacyLevel::PL2;
  PrivacyLevel leakage_threshold = PrivacyLevel::PL2;
  // Root for per-strategy mapping stores; empty means a fresh temp directory
  // that is removed when the run finishes.
  std::filesystem::path work_dir;
  std::size_t workers = 1;
};

namespace detail {

inline StrategyResult run_strategy(const Corpus& corpus, const Extractor& extractor,
                                   MaskStrategy strategy, PrivacyLevel min_level,
                                   PrivacyLevel leakage_threshold,
                                   const std::filesystem::path& store_dir) {
  StrategyResult res;
  res.strategy = strategy;

  std::unique_ptr<MappingStore> store;
  if (strategy == MaskStrategy::typed_reversible) {
    MappingStore::Options so;
    so.directory = store_dir;
    so.fsync_each_append = false;
    store = std::make_unique<MappingStore>(std::move(so));
  }
  UntypedMaskSession session;
  Sanitizer sanitizer(strategy, store.get(), &session, min_level);
  MockMemorySystem memory;

  for (const auto& user : corpus.users) {
    for (const auto& dialogue : user.dialogues) {
      for (const auto& msg : dialogue.messages) {
        if (msg.role != "user") continue;
        ++res.user_messages;
        auto items = extractor.extract(msg.content, user.real_name);
        auto s = sanitizer.sanitize(user.user_id, msg.content, items);
        if (!s.applied.empty()) ++res.masked_messages;
        res.masked_values += s.applied.size();
        res.sanitize_warnings += s.warnings.size();
        memory.ingest(user.user_id, s.text);
        for (const auto& gold : msg.annotations) {
          if (gold.privacy_level < leakage_threshold) continue;
          ++res.leak_eligible;
          if (s.text.find(gold.original_text) != std::string::npos) ++res.leak_leaked;
        }
      }
    }
  }

  for (const auto& user : corpus.users) {
    for (const auto& qa : user.qa_items) {
      ++res.qa_total;
      if (qa.privacy_dependent) ++res.dep_total;
      auto items = extractor.extract(qa.question, user.real_name);
      auto sq = sanitizer.sanitize(user.user_id, qa.question, items);
      std::string answer = memory.answer(user.user_id, sq.text);
      if (store) answer = restore_text(*store, user.user_id, answer).text;
      auto answer_tokens = MockMemorySystem::memory_tokens(answer);
      auto reference_tokens = MockMemorySystem::memory_tokens(qa.reference_answer);
      bool correct =
          !answer.empty() && MockMemorySystem::contains_contiguous(answer_tokens, reference_tokens);
      res.bleu1_sum += bleu_n(answer_tokens, reference_tokens, 1);
      res.bleu2_sum += bleu_n(answer_tokens, reference_tokens, 2);
      res.meteor_sum += meteor(answer_tokens, reference_tokens);
      res.rouge_l_sum += rouge_l(answer_tokens, reference_tokens);
      if (correct) {
        ++res.qa_correct;
        if (qa.privacy_dependent) ++res.dep_correct;
      }
      res.outcomes.push_back(
          QaOutcome{user.user_id, qa.category, qa.privacy_dependent, correct, answer});
    }
  }
  return res;
}

}  // namespace detail

inline ExperimentReport run_experiment(const Corpus& corpus, const Extractor& extractor,
                                       ExperimentOptions options = {}) {
  if (options.strategies.empty()) throw GatewayError("experiment needs at least one strategy");
  ExperimentReport report;
  report.users = corpus.users.size();
  for (const auto& u : corpus.users) report.qa_items += u.qa_items.size();
  report.min_level = options.min_level;
  report.leakage_threshold = options.leakage_threshold;
  report.strategies.resize(options.strategies.size());

  std::filesystem::path root = options.work_dir;
  bool scratch = root.empty();
  if (scratch) {
    root = std::filesystem::temp_directory_path() /
           ("maskgate_experiment_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(&report)));
  }
  std::filesystem::create_directories(root);

  auto run_one = [&](std::size_t i) {
    MaskStrategy s = options.strategies[i];
    auto dir = root / (std::to_string(i) + "_" + to_string(s));
    report.strategies[i] = detail::run_strategy(corpus, extractor, s, options.min_level,
                                                options.leakage_threshold, dir);
  };

  std::size_t n = options.strategies.size();
  std::size_t workers = std::min(options.workers == 0 ? std::size_t{1} : options.workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  if (scratch) {
    std::error_code ec;
    std::filesystem::remove_all(root, ec);
  }

  if (const StrategyResult* base = report.result_for(MaskStrategy::none)) {
    double base_acc = base->qa_accuracy();
    double base_leak = base->residual_leakage();
    for (auto& r : report.strategies) {
      r.qa_accuracy_delta_vs_none = score_delta(base_acc, r.qa_accuracy());
      r.leakage_delta_vs_none = score_delta(base_leak, r.residual_leakage());
    }
  }
  return report;
}

inline nlohmann::ordered_json to_json(const StrategyResult& r) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(r.strategy);
  nlohmann::ordered_json qa;
  qa["total"] = r.qa_total;
  qa["correct"] = r.qa_correct;
  qa["accuracy"] = r.qa_accuracy();
  qa["privacy_dependent"] = {{"total", r.dep_total},
                             {"correct", r.dep_correct},
                             {"accuracy", r.dep_accuracy()}};
  qa["privacy_independent"] = {{"total", r.qa_total - r.dep_total},
                               {"correct", r.qa_correct - r.dep_correct},
                               {"accuracy", r.indep_accuracy()}};
  if (r.qa_accuracy_delta_vs_none)
    qa["accuracy_delta_vs_none"] = *r.qa_accuracy_delta_vs_none;
  j["qa"] = std::move(qa);
  j["generation"] = {{"bleu1", r.mean_bleu1()},
                     {"bleu2", r.mean_bleu2()},
                     {"meteor", r.mean_meteor()},
                     {"rouge_l", r.mean_rouge_l()}};
  nlohmann::ordered_json leak;
  leak["eligible_values"] = r.leak_eligible;
  leak["leaked_values"] = r.leak_leaked;
  leak["residual_leakage"] = r.residual_leakage();
  if (r.leakage_delta_vs_none) leak["leakage_delta_vs_none"] = *r.leakage_delta_vs_none;
  j["privacy"] = std::move(leak);
  j["masking"] = {{"user_messages", r.user_messages},
                  {"masked_messages", r.masked_messages},
                  {"masked_values", r.masked_values},
                  {"warnings", r.sanitize_warnings}};
  nlohmann::ordered_json outs = nlohmann::ordered_json::array();
  for (const auto& o : r.outcomes) {
    outs.push_back({{"user_id", o.user_id},
                    {"category", o.category},
                    {"privacy_dependent", o.privacy_dependent},
                    {"correct", o.correct}});
  }
  j["qa_outcomes"] = std::move(outs);
  return j;
}

inline nlohmann::ordered_json to_json(const ExperimentReport& rep) {
  nlohmann::ordered_json j;
  j["users"] = rep.users;
  j["qa_items"] = rep.qa_items;
  j["min_level"] = to_string(rep.min_level);
  j["leakage_threshold"] = to_string(rep.leakage_threshold);
  j["strategies"] = nlohmann::ordered_json::array();
  for (const auto& r : rep.strategies) j["strategies"].push_back(to_json(r));
  return j;
}

// --- extraction benchmark ------------------------------------------------------

struct ExtractionBenchReport {
  std::size_t messages = 0;
  std::size_t gold_items = 0;
  std::size_t predicted_items = 0;
  std::size_t matched_items = 0;   // exact (text, type, level) matches
  double match_score_sum = 0.0;    // pooled greedy pair scores (partial credit)
  double precision = 1.0;          // micro-averaged pair scores over all messages
  double recall = 1.0;
  double f1 = 1.0;
  double exact_precision = 1.0;  // verbatim (text, type, level) agreement only
  double exact_recall = 1.0;
  double exact_f1 = 1.0;
  std::vector<std::pair<std::string, double>> recall_per_level;           // "PL2" -> recall
  std::vector<std::tuple<std::string, std::size_t, double>> recall_per_type;  // label, gold, recall
  double mean_extract_ms = 0.0;  // wall clock; excluded from determinism guarantees
};

inline ExtractionBenchReport run_extraction_benchmark(
    const Corpus& corpus, const Extractor& extractor,
    const TypeEmbedder& embedder = default_type_embedder(),
    const Taxonomy& taxonomy = Taxonomy::canonical()) {
  ExtractionBenchReport rep;
  using Key = std::tuple<std::string, std::string, int>;
  std::map<std::string, std::pair<std::size_t, std::size_t>> level_counts;  // gold, matched
  std::map<std::string, std::pair<std::size_t, std::size_t>> type_counts;
  std::chrono::steady_clock::duration total_time{};

  for (const auto& user : corpus.users) {
    for (const auto& dialogue : user.dialogues) {
      for (const auto& msg : dialogue.messages) {
        if (msg.role != "user") continue;
        ++rep.messages;
        auto t0 = std::chrono::steady_clock::now();
        auto predicted = extractor.extract(msg.content, user.real_name);
        total_time += std::chrono::steady_clock::now() - t0;
        rep.gold_items += msg.annotations.size();
        rep.predicted_items += predicted.size();

        auto scored = score_extraction(predicted, msg.annotations, embedder, taxonomy);
        for (const auto& pair : scored.pairs) rep.match_score_sum += pair.total;

        std::map<Key, std::size_t> bag;
        for (const auto& p : predicted)
          ++bag[Key{p.original_text, p.privacy_type, static_cast<int>(p.privacy_level)}];
        for (const auto& g : msg.annotations) {
          auto lvl = std::string(to_string(g.privacy_level));
          ++level_counts[lvl].first;
          ++type_counts[g.privacy_type].first;
          auto it = bag.find(Key{g.original_text, g.privacy_type, static_cast<int>(g.privacy_level)});
          if (it != bag.end() && it->second > 0) {
            --it->second;
            ++rep.matched_items;
            ++level_counts[lvl].second;
            ++type_counts[g.privacy_type].second;
          }
        }
      }
    }
  }

  rep.precision =
      rep.predicted_items ? rep.match_score_sum / double(rep.predicted_items) : 1.0;
  rep.recall = rep.gold_items ? rep.match_score_sum / double(rep.gold_items) : 1.0;
  rep.f1 = (rep.precision + rep.recall) > 0.0
               ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
               : 0.0;
  rep.exact_precision = rep.predicted_items
                            ? double(rep.matched_items) / double(rep.predicted_items)
                            : 1.0;
  rep.exact_recall = rep.gold_items ? double(rep.matched_items) / double(rep.gold_items) : 1.0;
  rep.exact_f1 = (rep.exact_precision + rep.exact_recall) > 0.0
                     ? 2.0 * rep.exact_precision * rep.exact_recall /
                           (rep.exact_precision + rep.exact_recall)
                     : 0.0;
  for (const auto& [lvl, gm] : level_counts)
    rep.recall_per_level.emplace_back(lvl, gm.first ? double(gm.second) / double(gm.first) : 1.0);
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> types(
      type_counts.begin(), type_counts.end());
  std::sort(types.begin(), types.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  for (const auto& [label, gm] : types)
    rep.recall_per_type.emplace_back(label, gm.first,
                                     gm.first ? double(gm.second) / double(gm.first) : 1.0);
  rep.mean_extract_ms =
      rep.messages
          ? std::chrono::duration<double, std::milli>(total_time).count() / double(rep.messages)
          : 0.0;
  return rep;
}

inline nlohmann::ordered_json to_json(const ExtractionBenchReport& rep) {
  nlohmann::ordered_json j;
  j["messages"] = rep.messages;
  j["gold_items"] = rep.gold_items;
  j["predicted_items"] = rep.predicted_items;
  j["matched_items"] = rep.matched_items;
  j["precision"] = rep.precision;
  j["recall"] = rep.recall;
  j["f1"] = rep.f1;
  j["exact"] = {{"precision", rep.exact_precision},
                {"recall", rep.exact_recall},
                {"f1", rep.exact_f1}};
  j["recall_per_level"] = nlohmann::ordered_json::object();
  for (const auto& [lvl, r] : rep.recall_per_level) j["recall_per_level"][lvl] = r;
  j["recall_per_type"] = nlohmann::ordered_json::array();
  for (const auto& [label, gold, r] : rep.recall_per_type)
    j["recall_per_type"].push_back({{"type", label}, {"gold", gold}, {"recall", r}});
  j["mean_extract_ms"] = rep.mean_extract_ms;
  return j;
}

// --- rendered tables -----------------------------------------------------------

namespace detail {

inline std::string percent_cell(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value * 100.0);
  return buf;
}

inline std::string percent_cell(double value, const std::optional<double>& delta_vs_baseline) {
  std::string cell = percent_cell(value);
  if (delta_vs_baseline) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " (%+.2f)", *delta_vs_baseline * 100.0);
    cell += buf;
  }
  return cell;
}

// Left-aligned columns separated by two spaces, dashed rule under the header.
inline std::string render_columns(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) out += "  ";
      out += rows[r][c];
      if (c + 1 < rows[r].size()) out.append(width[c] - rows[r][c].size(), ' ');
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      out.append(total, '-');
      out += '\n';
    }
  }
  return out;
}

}  // namespace detail

// Plain-text table over a strategy-comparison report: one row per strategy.
// Scores are percentages; the accuracy and leakage columns are annotated
// "(+x.xx)" / "(-x.xx)" against the unmasked baseline when it was part of the
// run. The masking-level column lists the levels the strategy masks.
inline std::string render_strategy_table(const ExperimentReport& rep) {
  std::string masked_levels;
  for (PrivacyLevel lvl : {PrivacyLevel::PL2, PrivacyLevel::PL3, PrivacyLevel::PL4}) {
    if (lvl < rep.min_level) continue;
    if (!masked_levels.empty()) masked_levels += ", ";
    masked_levels += to_string(lvl);
  }
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Strategy", "Masking Level", "Accuracy", "BLEU-1", "BLEU-2", "METEOR",
                  "ROUGE-L", "Leakage"});
  for (const auto& r : rep.strategies) {
    rows.push_back({std::string(to_string(r.strategy)),
                    r.strategy == MaskStrategy::none ? "--" : masked_levels,
                    detail::percent_cell(r.qa_accuracy(), r.qa_accuracy_delta_vs_none),
                    detail::percent_cell(r.mean_bleu1()),
                    detail::percent_cell(r.mean_bleu2()),
                    detail::percent_cell(r.mean_meteor()),
                    detail::percent_cell(r.mean_rouge_l()),
                    detail::percent_cell(r.residual_leakage(), r.leakage_delta_vs_none)});
  }
  return detail::render_columns(rows);
}

// Plain-text table over an extraction benchmark: F1 / Precision / Recall as
// percentages plus mean wall-clock seconds per message.
inline std::string render_extraction_table(const ExtractionBenchReport& rep,
                                           const std::string& extractor_name = "rules") {
  char time_cell[32];
  std::snprintf(time_cell, sizeof time_cell, "%.3f", rep.mean_extract_ms / 1000.0);
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Extractor", "F1", "Precision", "Recall", "Time (s)"});
  rows.push_back({extractor_name, detail::percent_cell(rep.f1),
                  detail::percent_cell(rep.precision), detail::percent_cell(rep.recall),
                  time_cell});
  return detail::render_columns(rows);
}

}  // namespace maskgate
