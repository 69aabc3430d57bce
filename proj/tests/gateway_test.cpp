#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <maskgate/gateway.hpp>

using namespace maskgate;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("maskgate_gateway_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

MappingStore::Options store_opts(const TempDir& td) {
  MappingStore::Options o;
  o.directory = td.path;
  o.fsync_each_append = false;
  o.clock = [] { return std::int64_t{1}; };
  return o;
}

Corpus fixture() {
  return load_corpus(std::string(MASKGATE_REPO_DIR) + "/data/fixtures/eval_corpus.json", true);
}

}  // namespace

TEST_CASE("memory tokenization keeps mask artifacts atomic") {
  auto toks = MockMemorySystem::memory_tokens("Hi <REAL_NAME_1>, code *** and <Mask_2>!");
  CHECK(toks == std::vector<std::string>{"hi", "<REAL_NAME_1>", "code", "***", "and", "<Mask_2>"});

  CHECK(MockMemorySystem::memory_tokens("a ** b") == std::vector<std::string>{"a", "b"});
  CHECK(MockMemorySystem::memory_tokens("x ****** y") ==
        std::vector<std::string>{"x", "******", "y"});
  // Angle-bracket text that is not a well-formed mask token tokenizes as prose.
  CHECK(MockMemorySystem::memory_tokens("<_1> <A_0> <A> a<b") ==
        std::vector<std::string>{"1", "a", "0", "a", "a", "b"});
  CHECK(MockMemorySystem::memory_tokens("手机号是<PHONE_NUMBER_1>。") ==
        std::vector<std::string>{"手", "机", "号", "是", "<PHONE_NUMBER_1>"});
}

TEST_CASE("memory retrieval ranks by distinct token overlap with earlier-wins ties") {
  MockMemorySystem mem;
  mem.ingest("u1", "alpha beta gamma");
  mem.ingest("u1", "beta gamma delta");
  mem.ingest("u1", "delta epsilon zeta");

  auto r = mem.retrieve("u1", "beta gamma question");
  REQUIRE(r.has_value());
  CHECK(r->index == 0);  // 2-2 tie with the second memory; earlier one wins
  CHECK(r->overlap == 2);

  auto r2 = mem.retrieve("u1", "delta epsilon");
  REQUIRE(r2.has_value());
  CHECK(r2->index == 2);

  CHECK_FALSE(mem.retrieve("u1", "nothing shared here").has_value());
  CHECK_FALSE(mem.retrieve("ghost", "beta").has_value());

  SECTION("repeated tokens count once") {
    mem.ingest("u2", "spam spam spam spam other");
    mem.ingest("u2", "spam ham eggs");
    auto r3 = mem.retrieve("u2", "spam ham");
    REQUIRE(r3.has_value());
    CHECK(r3->index == 1);  // overlap 2 beats overlap 1, despite four spams
  }
}

TEST_CASE("memory answers with the span after the matched run") {
  MockMemorySystem mem;
  mem.ingest("u1", "My email is alice@example.com, use it.");
  CHECK(mem.answer("u1", "what is my email") == "alice@example.com, use it.");

  mem.ingest("u2", "The team offsite deck is due Friday.");
  // The matched run reaches the end of the memory, so the whole memory comes back.
  CHECK(mem.answer("u2", "what is due friday") == "The team offsite deck is due Friday.");

  CHECK(mem.answer("u1", "zzz qqq") == "");
}

TEST_CASE("process_turn masks outbound text and restores the response") {
  TempDir td;
  MappingStore store(store_opts(td));
  RuleExtractor extractor;
  EchoCloudClient echo;
  Gateway gw(extractor, store, echo);

  auto audit = gw.process_turn("u_chen", "你好，我叫陈伟，手机号是13912345678。",
                               std::optional<std::string>("陈伟"));
  REQUIRE(audit.ok());
  CHECK(audit.sanitized.text == "你好，我叫<REAL_NAME_1>，手机号是<PHONE_NUMBER_1>。");
  CHECK(audit.cloud_response == audit.sanitized.text);
  CHECK(audit.restored.text == "你好，我叫陈伟，手机号是13912345678。");
  CHECK(audit.restored.resolved == 2);
  CHECK(audit.extracted.size() == 2);

  SECTION("outbound history never contains original values") {
    gw.process_turn("u_chen", "我的身份证号是110105199003078515，帮我查社保。",
                    std::optional<std::string>("陈伟"));
    for (const auto& msg : gw.history("u_chen")) {
      CHECK(msg.content.find("陈伟") == std::string::npos);
      CHECK(msg.content.find("13912345678") == std::string::npos);
      CHECK(msg.content.find("110105199003078515") == std::string::npos);
    }
    CHECK(gw.history("u_chen").size() == 4);
  }
}

TEST_CASE("process_turn rejects placeholder-shaped input before any cloud call") {
  TempDir td;
  MappingStore store(store_opts(td));
  RuleExtractor extractor;
  std::size_t calls = 0;
  FunctionCloudClient counting([&](const std::vector<ChatMessage>&) {
    ++calls;
    return std::string("ok");
  });
  Gateway gw(extractor, store, counting);

  auto audit = gw.process_turn("u1", "please expand <EMAIL_1> for me");
  CHECK(audit.rejected);
  CHECK_FALSE(audit.ok());
  CHECK(calls == 0);
  CHECK(gw.history("u1").empty());

  // Lowercase mask-style tokens are not reversible placeholders and pass.
  auto ok = gw.process_turn("u1", "the literal string <Mask_1> is fine");
  CHECK(ok.ok());
  CHECK(calls == 1);
}

TEST_CASE("a failing cloud call leaves history untouched") {
  TempDir td;
  MappingStore store(store_opts(td));
  RuleExtractor extractor;
  int failures_left = 1;
  FunctionCloudClient flaky([&](const std::vector<ChatMessage>& msgs) {
    if (failures_left-- > 0) throw std::runtime_error("boom");
    return msgs.back().content;
  });
  Gateway gw(extractor, store, flaky);

  auto bad = gw.process_turn("u1", "my email is a@b.co");
  CHECK_FALSE(bad.ok());
  CHECK(bad.error.find("cloud call failed") != std::string::npos);
  CHECK(gw.history("u1").empty());

  auto good = gw.process_turn("u1", "my email is a@b.co");
  CHECK(good.ok());
  CHECK(gw.history("u1").size() == 2);
  // The mapping minted during the failed turn is reused, not duplicated.
  CHECK(good.sanitized.text == "my email is <EMAIL_1>");
}

TEST_CASE("experiment reproduces the expected strategy trade-off") {
  Corpus corpus = fixture();
  RuleExtractor extractor;
  TempDir td;
  ExperimentOptions opts;
  opts.work_dir = td.path;
  auto report = run_experiment(corpus, extractor, opts);

  REQUIRE(report.strategies.size() == 4);
  CHECK(report.users == 3);
  CHECK(report.qa_items == 9);

  const auto* typed = report.result_for(MaskStrategy::typed_reversible);
  const auto* untyped = report.result_for(MaskStrategy::untyped);
  const auto* starred = report.result_for(MaskStrategy::irreversible);
  const auto* none = report.result_for(MaskStrategy::none);
  REQUIRE((typed && untyped && starred && none));

  SECTION("answer quality per strategy") {
    CHECK(none->qa_correct == 9);
    CHECK(typed->qa_correct == 9);
    CHECK(untyped->qa_correct == 3);
    CHECK(starred->qa_correct == 2);

    CHECK(typed->dep_accuracy() == 1.0);
    CHECK(none->dep_accuracy() == 1.0);
    CHECK(untyped->dep_accuracy() == 0.0);
    CHECK(starred->dep_accuracy() == 0.0);

    // Reversible masking keeps non-private answers too; lossy masking decays.
    CHECK(typed->qa_accuracy() >= untyped->qa_accuracy());
    CHECK(untyped->qa_accuracy() >= starred->qa_accuracy());
    CHECK(typed->indep_accuracy() == 1.0);
    CHECK(untyped->indep_accuracy() == 1.0);
    CHECK(starred->indep_accuracy() == Catch::Approx(2.0 / 3.0));
  }

  SECTION("privacy leakage per strategy") {
    CHECK(none->leak_eligible == 18);
    CHECK(none->leak_leaked == 18);
    CHECK(none->residual_leakage() == 1.0);
    CHECK(typed->residual_leakage() == 0.0);
    CHECK(untyped->residual_leakage() == 0.0);
    CHECK(starred->residual_leakage() == 0.0);
  }

  SECTION("deltas are reported against the unmasked baseline") {
    REQUIRE(typed->qa_accuracy_delta_vs_none.has_value());
    CHECK(*typed->qa_accuracy_delta_vs_none == Catch::Approx(0.0));
    CHECK(*untyped->qa_accuracy_delta_vs_none == Catch::Approx(3.0 / 9.0 - 1.0));
    CHECK(*starred->qa_accuracy_delta_vs_none == Catch::Approx(2.0 / 9.0 - 1.0));
    CHECK(*typed->leakage_delta_vs_none == Catch::Approx(-1.0));
    CHECK(*none->leakage_delta_vs_none == Catch::Approx(0.0));
  }

  SECTION("masking counts") {
    CHECK(typed->user_messages == 18);
    CHECK(typed->masked_messages == 16);
    CHECK(typed->masked_values == 18);
    CHECK(none->masked_values == 0);
    CHECK(typed->sanitize_warnings == 0);
  }

  SECTION("which questions survive lossy masking") {
    auto correct_categories = [](const StrategyResult& r) {
      std::vector<std::string> out;
      for (const auto& o : r.outcomes)
        if (o.correct) out.push_back(o.user_id + "/" + o.category);
      return out;
    };
    CHECK(correct_categories(*untyped) ==
          std::vector<std::string>{"u_alice/preference", "u_alice/schedule", "u_chen/schedule"});
    CHECK(correct_categories(*starred) ==
          std::vector<std::string>{"u_alice/schedule", "u_chen/schedule"});
  }

  SECTION("generation metrics are the metric totals over the recorded answers") {
    auto recompute = [&](const StrategyResult& r) {
      std::array<double, 4> sums{0.0, 0.0, 0.0, 0.0};
      std::size_t k = 0;
      for (const auto& user : corpus.users) {
        for (const auto& qa : user.qa_items) {
          REQUIRE(k < r.outcomes.size());
          auto cand = MockMemorySystem::memory_tokens(r.outcomes[k].answer);
          auto ref = MockMemorySystem::memory_tokens(qa.reference_answer);
          sums[0] += bleu_n(cand, ref, 1);
          sums[1] += bleu_n(cand, ref, 2);
          sums[2] += meteor(cand, ref);
          sums[3] += rouge_l(cand, ref);
          ++k;
        }
      }
      return sums;
    };
    for (const auto* r : {typed, untyped, starred, none}) {
      auto sums = recompute(*r);
      CHECK(r->bleu1_sum == sums[0]);
      CHECK(r->bleu2_sum == sums[1]);
      CHECK(r->meteor_sum == sums[2]);
      CHECK(r->rouge_l_sum == sums[3]);
      for (double mean :
           {r->mean_bleu1(), r->mean_bleu2(), r->mean_meteor(), r->mean_rouge_l()}) {
        CHECK(mean >= 0.0);
        CHECK(mean <= 1.0);
      }
    }

    // Reversible masking restores every answer byte-for-byte, so generation
    // quality matches the unmasked baseline exactly; lossy masking decays it.
    CHECK(typed->mean_bleu1() == none->mean_bleu1());
    CHECK(typed->mean_bleu2() == none->mean_bleu2());
    CHECK(typed->mean_meteor() == none->mean_meteor());
    CHECK(typed->mean_rouge_l() == none->mean_rouge_l());
    CHECK(untyped->mean_rouge_l() < none->mean_rouge_l());
    CHECK(starred->mean_rouge_l() < untyped->mean_rouge_l());
    CHECK(starred->mean_bleu1() < untyped->mean_bleu1());
  }
}

TEST_CASE("experiment report is byte-identical across runs and worker counts") {
  Corpus corpus = fixture();
  RuleExtractor extractor;

  TempDir a, b, c;
  ExperimentOptions oa, ob, oc;
  oa.work_dir = a.path;
  ob.work_dir = b.path;
  oc.work_dir = c.path;
  oc.workers = 4;

  auto ja = to_json(run_experiment(corpus, extractor, oa)).dump(2);
  auto jb = to_json(run_experiment(corpus, extractor, ob)).dump(2);
  auto jc = to_json(run_experiment(corpus, extractor, oc)).dump(2);
  CHECK(ja == jb);
  CHECK(ja == jc);
  CHECK(ja.find("\"residual_leakage\": 1.0") != std::string::npos);
}

TEST_CASE("extraction benchmark scores the rule extractor on the fixture") {
  Corpus corpus = fixture();
  RuleExtractor extractor;
  auto rep = run_extraction_benchmark(corpus, extractor);

  CHECK(rep.messages == 18);
  CHECK(rep.gold_items == 18);
  CHECK(rep.predicted_items == 18);
  CHECK(rep.matched_items == 18);
  CHECK(rep.match_score_sum == 18.0);
  CHECK(rep.precision == 1.0);
  CHECK(rep.recall == 1.0);
  CHECK(rep.f1 == 1.0);
  CHECK(rep.exact_precision == 1.0);
  CHECK(rep.exact_recall == 1.0);
  CHECK(rep.exact_f1 == 1.0);

  REQUIRE(rep.recall_per_level.size() == 3);
  for (const auto& [lvl, r] : rep.recall_per_level) CHECK(r == 1.0);
  CHECK(rep.recall_per_level[0].first == "PL2");

  REQUIRE(rep.recall_per_type.size() == 10);
  CHECK(std::get<0>(rep.recall_per_type[0]) == "Key");
  CHECK(std::get<1>(rep.recall_per_type[0]) == 3);
  CHECK(rep.mean_extract_ms >= 0.0);

  auto j = to_json(rep);
  CHECK(j["f1"] == 1.0);
  CHECK(j["exact"]["f1"] == 1.0);
  CHECK(j["recall_per_level"]["PL4"] == 1.0);
}

namespace {

// Returns the gold annotations, but demotes every PL3 item to PL2: the text
// and type stay right, so soft scoring grants partial credit where exact
// triple matching gives zero.
struct LevelSkewExtractor : Extractor {
  const Corpus* corpus;
  explicit LevelSkewExtractor(const Corpus& c) : corpus(&c) {}
  std::vector<PrivacyItem> extract(std::string_view message,
                                   const std::optional<std::string>&) const override {
    for (const auto& user : corpus->users)
      for (const auto& dialogue : user.dialogues)
        for (const auto& msg : dialogue.messages)
          if (msg.content == message) {
            auto items = msg.annotations;
            for (auto& it : items)
              if (it.privacy_level == PrivacyLevel::PL3) it.privacy_level = PrivacyLevel::PL2;
            return items;
          }
    return {};
  }
};

}  // namespace

TEST_CASE("extraction benchmark grants partial credit where exact matching does not") {
  Corpus corpus;
  UserRecord user;
  user.user_id = "u_t";
  Dialogue d;
  d.dialogue_id = "d1";
  Message m;
  m.role = "user";
  m.content = "my doctor noted mild anemia and my email is a@b.example";
  m.annotations = {{"mild anemia", "Medical Health", PrivacyLevel::PL3},
                   {"a@b.example", "Email", PrivacyLevel::PL2}};
  d.messages.push_back(m);
  user.dialogues.push_back(d);
  corpus.users.push_back(user);

  LevelSkewExtractor extractor(corpus);
  auto rep = run_extraction_benchmark(corpus, extractor);

  CHECK(rep.messages == 1);
  CHECK(rep.gold_items == 2);
  CHECK(rep.predicted_items == 2);
  // Only the email survives exact (text, type, level) matching...
  CHECK(rep.matched_items == 1);
  CHECK(rep.exact_precision == 0.5);
  CHECK(rep.exact_recall == 0.5);
  // ...but the demoted item still earns its text and type components.
  CHECK(rep.match_score_sum == 1.0 + 2.0 / 3.0);
  CHECK(rep.precision == (1.0 + 2.0 / 3.0) / 2.0);
  CHECK(rep.recall == rep.precision);
  CHECK(rep.f1 > rep.exact_f1);

  // The pooled sum is exactly what per-message scoring reports.
  auto direct = score_extraction(extractor.extract(m.content, std::nullopt), m.annotations);
  double direct_sum = 0.0;
  for (const auto& p : direct.pairs) direct_sum += p.total;
  CHECK(rep.match_score_sum == direct_sum);
}

TEST_CASE("rendered tables carry the comparison columns and baseline deltas") {
  Corpus corpus = fixture();
  RuleExtractor extractor;
  TempDir td;
  ExperimentOptions opts;
  opts.work_dir = td.path;
  auto report = run_experiment(corpus, extractor, opts);

  SECTION("strategy comparison table") {
    std::string table = render_strategy_table(report);
    std::string header = table.substr(0, table.find('\n'));
    std::size_t pos = 0;
    for (const char* col : {"Strategy", "Masking Level", "Accuracy", "BLEU-1", "BLEU-2",
                            "METEOR", "ROUGE-L", "Leakage"}) {
      auto at = header.find(col, pos);
      REQUIRE(at != std::string::npos);
      pos = at + 1;
    }

    // Header + rule + one row per strategy.
    CHECK(std::count(table.begin(), table.end(), '\n') == 6);
    // Percentages with the "(+x.xx)" / "(-x.xx)" baseline annotation.
    CHECK(table.find("100.00 (+0.00)") != std::string::npos);   // unmasked accuracy
    CHECK(table.find("33.33 (-66.67)") != std::string::npos);   // untyped accuracy
    CHECK(table.find("0.00 (-100.00)") != std::string::npos);   // masked residual leakage
    CHECK(table.find("PL2, PL3, PL4") != std::string::npos);
    CHECK(table.find("--") != std::string::npos);  // the unmasked row masks no levels
  }

  SECTION("strategies outside the run carry no delta annotation") {
    ExperimentOptions solo;
    TempDir td2;
    solo.work_dir = td2.path;
    solo.strategies = {MaskStrategy::typed_reversible};
    std::string table = render_strategy_table(run_experiment(corpus, extractor, solo));
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
    CHECK(table.find("(+") == std::string::npos);
    CHECK(table.find("(-") == std::string::npos);
  }

  SECTION("extraction score table") {
    auto bench = run_extraction_benchmark(corpus, extractor);
    std::string table = render_extraction_table(bench, "rules");
    std::string header = table.substr(0, table.find('\n'));
    std::size_t pos = 0;
    for (const char* col : {"Extractor", "F1", "Precision", "Recall", "Time (s)"}) {
      auto at = header.find(col, pos);
      REQUIRE(at != std::string::npos);
      pos = at + 1;
    }
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
    CHECK(table.find("rules") != std::string::npos);
    CHECK(table.find("100.00") != std::string::npos);
  }

  SECTION("cell formatting") {
    CHECK(detail::percent_cell(0.6537) == "65.37");
    CHECK(detail::percent_cell(0.6407, -0.0130) == "64.07 (-1.30)");
    CHECK(detail::percent_cell(1.0, 0.0) == "100.00 (+0.00)");
    CHECK(detail::percent_cell(0.5542, std::nullopt) == "55.42");
  }
}
