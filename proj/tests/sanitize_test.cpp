#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <maskgate/sanitize.hpp>

using namespace maskgate;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("maskgate_sanitize_test_" + std::to_string(::getpid()) + "_" +
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

}  // namespace

TEST_CASE("strategy names round trip") {
  for (MaskStrategy s : all_mask_strategies()) {
    CHECK(parse_mask_strategy(to_string(s)) == s);
  }
  CHECK(parse_mask_strategy("typed") == MaskStrategy::typed_reversible);
  CHECK_FALSE(parse_mask_strategy("starred").has_value());
}

TEST_CASE("typed sanitization mints reversible placeholders") {
  TempDir td;
  MappingStore store(store_opts(td));
  Sanitizer san(MaskStrategy::typed_reversible, &store);

  std::string msg = "I'm Alice Wang. My email is alice.w@example.com, use it for the report.";
  std::vector<PrivacyItem> items{
      {"Alice Wang", "Real Name", PrivacyLevel::PL2},
      {"alice.w@example.com", "Email", PrivacyLevel::PL2},
  };
  auto s = san.sanitize("u_alice", msg, items);
  CHECK(s.text == "I'm <REAL_NAME_1>. My email is <EMAIL_1>, use it for the report.");
  REQUIRE(s.applied.size() == 2);
  CHECK(s.applied[0].token == "<REAL_NAME_1>");
  CHECK(s.applied[0].original_value == "Alice Wang");
  CHECK(s.applied[0].occurrences == 1);
  CHECK(s.applied[1].token == "<EMAIL_1>");
  CHECK(s.warnings.empty());

  SECTION("the store can reverse every applied mask") {
    for (const auto& m : s.applied) {
      auto rec = store.resolve("u_alice", m.token);
      REQUIRE(rec.has_value());
      CHECK(rec->original_value == m.original_value);
    }
  }
  SECTION("a later message reuses existing placeholders and extends counters") {
    auto s2 = san.sanitize("u_alice",
                           "Remind alice.w@example.com and cc bob.t@corp.example please.",
                           {{"alice.w@example.com", "Email", PrivacyLevel::PL2},
                            {"bob.t@corp.example", "Email", PrivacyLevel::PL2}});
    CHECK(s2.text == "Remind <EMAIL_1> and cc <EMAIL_2> please.");
  }
  SECTION("another user gets an independent counter space") {
    auto s3 = san.sanitize("u_bob", "mail me at alice.w@example.com",
                           {{"alice.w@example.com", "Email", PrivacyLevel::PL2}});
    CHECK(s3.text == "mail me at <EMAIL_1>");
    CHECK(store.resolve("u_bob", "<EMAIL_1>")->original_value == "alice.w@example.com");
  }
}

TEST_CASE("token numbering follows first appearance in the text") {
  TempDir td;
  MappingStore store(store_opts(td));
  Sanitizer san(MaskStrategy::typed_reversible, &store);
  // Items arrive in reverse of their textual order.
  auto s = san.sanitize("u1", "first a@x.io then b@y.io",
                        {{"b@y.io", "Email", PrivacyLevel::PL2},
                         {"a@x.io", "Email", PrivacyLevel::PL2}});
  CHECK(s.text == "first <EMAIL_1> then <EMAIL_2>");
  CHECK(store.find_by_value("u1", "a@x.io")->placeholder == "<EMAIL_1>");
  CHECK(store.find_by_value("u1", "b@y.io")->placeholder == "<EMAIL_2>");
}

TEST_CASE("untyped sanitization is session scoped") {
  UntypedMaskSession session;
  Sanitizer san(MaskStrategy::untyped, nullptr, &session);

  auto s = san.sanitize("u1", "name Zhang San, phone 13800138000",
                        {{"Zhang San", "Real Name", PrivacyLevel::PL2},
                         {"13800138000", "Phone Number", PrivacyLevel::PL2}});
  CHECK(s.text == "name <Mask_1>, phone <Mask_2>");

  SECTION("the same value keeps its token across messages") {
    auto s2 = san.sanitize("u1", "call 13800138000 now",
                           {{"13800138000", "Phone Number", PrivacyLevel::PL2}});
    CHECK(s2.text == "call <Mask_2> now");
  }
  SECTION("users do not share tokens") {
    auto s2 = san.sanitize("u2", "call 13800138000 now",
                           {{"13800138000", "Phone Number", PrivacyLevel::PL2}});
    CHECK(s2.text == "call <Mask_1> now");
  }
  SECTION("reset forgets all assignments") {
    session.reset();
    auto s2 = san.sanitize("u1", "call 13800138000 now",
                           {{"13800138000", "Phone Number", PrivacyLevel::PL2}});
    CHECK(s2.text == "call <Mask_1> now");
  }
  SECTION("untyped tokens sit outside the reversible placeholder grammar") {
    CHECK_FALSE(parse_placeholder("<Mask_1>").has_value());
  }
}

TEST_CASE("irreversible sanitization stars every span") {
  Sanitizer san(MaskStrategy::irreversible);
  auto s = san.sanitize("u1", "code 1234, again 1234, email a@b.co",
                        {{"1234", "Verification Code", PrivacyLevel::PL4},
                         {"a@b.co", "Email", PrivacyLevel::PL2}});
  CHECK(s.text == "code ***, again ***, email ***");
  REQUIRE(s.applied.size() == 2);
  CHECK(s.applied[0].token == "***");
  CHECK(s.applied[0].occurrences == 2);
  CHECK(s.applied[1].occurrences == 1);
}

TEST_CASE("pass-through strategy masks nothing") {
  Sanitizer san(MaskStrategy::none);
  auto s = san.sanitize("u1", "secret 13800138000",
                        {{"13800138000", "Phone Number", PrivacyLevel::PL2}});
  CHECK(s.text == "secret 13800138000");
  CHECK(s.applied.empty());
}

TEST_CASE("sanitizer dependency checks") {
  CHECK_THROWS_AS(Sanitizer(MaskStrategy::typed_reversible), SanitizeError);
  CHECK_THROWS_AS(Sanitizer(MaskStrategy::untyped), SanitizeError);
  CHECK_NOTHROW(Sanitizer(MaskStrategy::irreversible));
  CHECK_NOTHROW(Sanitizer(MaskStrategy::none));
}

TEST_CASE("minimum level filter") {
  Sanitizer strict(MaskStrategy::irreversible, nullptr, nullptr, PrivacyLevel::PL4);
  auto s = strict.sanitize("u1", "email a@b.co code 9999",
                           {{"a@b.co", "Email", PrivacyLevel::PL2},
                            {"9999", "Verification Code", PrivacyLevel::PL4}});
  CHECK(s.text == "email a@b.co code ***");
  REQUIRE(s.applied.size() == 1);
  CHECK(s.applied[0].original_value == "9999");
}

TEST_CASE("nested values mask only their standalone occurrences") {
  TempDir td;
  MappingStore store(store_opts(td));
  Sanitizer san(MaskStrategy::typed_reversible, &store);

  SECTION("the inner value also appears on its own") {
    auto s = san.sanitize("u1", "I live in Haidian District, Beijing. Beijing is big.",
                          {{"Haidian District, Beijing", "Detailed Address", PrivacyLevel::PL2},
                           {"Beijing", "Precise Location", PrivacyLevel::PL3}});
    CHECK(s.text == "I live in <DETAILED_ADDRESS_1>. <PRECISE_LOCATION_1> is big.");
    REQUIRE(s.applied.size() == 2);
    CHECK(s.applied[0].original_value == "Haidian District, Beijing");
    CHECK(s.applied[1].occurrences == 1);
    CHECK(s.warnings.empty());
  }
  SECTION("the inner value exists nowhere else and is skipped with a note") {
    auto s = san.sanitize("u1", "I live in Haidian District, Beijing.",
                          {{"Haidian District, Beijing", "Detailed Address", PrivacyLevel::PL2},
                           {"Beijing", "Precise Location", PrivacyLevel::PL3}});
    CHECK(s.text == "I live in <DETAILED_ADDRESS_1>.");
    REQUIRE(s.applied.size() == 1);
    REQUIRE(s.warnings.size() == 1);
    CHECK(s.warnings[0].find("fully covered") != std::string::npos);
    CHECK(s.warnings[0].find("Beijing") == std::string::npos);  // warnings stay value-free
    CHECK_FALSE(store.find_by_value("u1", "Beijing").has_value());  // no orphan mapping
  }
  SECTION("claiming is by length, not item order") {
    auto s = san.sanitize("u1", "route ab abc ab",
                          {{"ab", "Account ID/Username", PrivacyLevel::PL2},
                           {"abc", "Account ID/Username", PrivacyLevel::PL2}});
    CHECK(s.text == "route <ACCOUNT_ID_USERNAME_1> <ACCOUNT_ID_USERNAME_2> <ACCOUNT_ID_USERNAME_1>");
    CHECK(s.applied[0].original_value == "ab");
    CHECK(s.applied[0].occurrences == 2);
  }
}

TEST_CASE("duplicate extraction entries collapse to the first") {
  Sanitizer san(MaskStrategy::irreversible);
  auto s = san.sanitize("u1", "id 4111111111111111 end",
                        {{"4111111111111111", "Financial Account", PrivacyLevel::PL3},
                         {"4111111111111111", "Account ID/Username", PrivacyLevel::PL2}});
  REQUIRE(s.applied.size() == 1);
  CHECK(s.applied[0].type_slug == "FINANCIAL_ACCOUNT");
  CHECK(s.applied[0].privacy_level == PrivacyLevel::PL3);
}

TEST_CASE("missing and empty values are skipped with value-free warnings") {
  Sanitizer san(MaskStrategy::irreversible);
  auto s = san.sanitize("u1", "nothing to see",
                        {{"", "Email", PrivacyLevel::PL2},
                         {"ghost@example.com", "Email", PrivacyLevel::PL2}});
  CHECK(s.text == "nothing to see");
  CHECK(s.applied.empty());
  REQUIRE(s.warnings.size() == 2);
  CHECK(s.warnings[0].find("empty value") != std::string::npos);
  CHECK(s.warnings[1].find("not present") != std::string::npos);
  CHECK(s.warnings[1].find("ghost@example.com") == std::string::npos);
}

TEST_CASE("values that look like placeholders are masked and flagged") {
  TempDir td;
  MappingStore store(store_opts(td));
  Sanitizer san(MaskStrategy::typed_reversible, &store);
  auto s = san.sanitize("u1", "my token is <KEY_1> literally",
                        {{"<KEY_1>", "Token", PrivacyLevel::PL4}});
  CHECK(s.text == "my token is <TOKEN_1> literally");
  REQUIRE(s.warnings.size() == 1);
  CHECK(s.warnings[0].find("placeholder grammar") != std::string::npos);
}

TEST_CASE("multibyte text splices on byte-accurate boundaries") {
  TempDir td;
  MappingStore store(store_opts(td));
  Sanitizer san(MaskStrategy::typed_reversible, &store);
  auto s = san.sanitize("u_chen", "你好，我叫陈伟，手机号是13912345678。",
                        {{"陈伟", "Real Name", PrivacyLevel::PL2},
                         {"13912345678", "Phone Number", PrivacyLevel::PL2}});
  CHECK(s.text == "你好，我叫<REAL_NAME_1>，手机号是<PHONE_NUMBER_1>。");
}

TEST_CASE("unknown type labels fall back to a generic slug") {
  Sanitizer san(MaskStrategy::irreversible);
  auto s = san.sanitize("u1", "the launch date is 2031-01-01",
                        {{"2031-01-01", "", PrivacyLevel::PL4}});
  REQUIRE(s.applied.size() == 1);
  CHECK(s.applied[0].type_slug == "PRIVATE");
}

TEST_CASE("self-overlapping values claim disjoint spans only") {
  Sanitizer san(MaskStrategy::irreversible);
  auto s = san.sanitize("u1", "aaaa", {{"aa", "Token", PrivacyLevel::PL4}});
  CHECK(s.text == "******");  // two disjoint "aa" spans, no overlap double-count
  CHECK(s.applied[0].occurrences == 2);
}
