#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <maskgate/placeholder.hpp>
#include <maskgate/text.hpp>

using namespace maskgate;

namespace {
std::vector<std::string> tok(const std::string& s) { return tokenize(s); }
}  // namespace

TEST_CASE("tokenizer lowercases and splits ascii words") {
  CHECK(tok("The cat sat") == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(tok("hello, world!") == std::vector<std::string>{"hello", "world"});
  CHECK(tok("a1b2 c3") == std::vector<std::string>{"a1b2", "c3"});
  CHECK(tok("") == std::vector<std::string>{});
  CHECK(tok("   \t\n ") == std::vector<std::string>{});
  CHECK(tok("!!! ... ???") == std::vector<std::string>{});
}

TEST_CASE("tokenizer treats cjk ideographs as single tokens") {
  CHECK(tok("北京海淀区") == std::vector<std::string>{"北", "京", "海", "淀", "区"});
  CHECK(tok("我的email是x") == std::vector<std::string>{"我", "的", "email", "是", "x"});
  // Mixed script with punctuation between.
  CHECK(tok("验证码是 667788。") == std::vector<std::string>{"验", "证", "码", "是", "667788"});
}

TEST_CASE("tokenizer keeps kana and hangul runs as words") {
  CHECK(tok("テスト です") == std::vector<std::string>{"テスト", "です"});
  CHECK(tok("안녕 세계") == std::vector<std::string>{"안녕", "세계"});
}

TEST_CASE("tokenizer records byte spans") {
  auto spans = tokenize_spans("ab 北x");
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].text == "ab");
  CHECK(spans[0].begin == 0);
  CHECK(spans[0].end == 2);
  CHECK(spans[1].text == "北");
  CHECK(spans[1].begin == 3);
  CHECK(spans[1].end == 6);
  CHECK(spans[2].text == "x");
  CHECK(spans[2].begin == 6);
  CHECK(spans[2].end == 7);
}

TEST_CASE("tokenizer survives invalid utf-8") {
  std::string bad = "ok\xC3(more";
  auto toks = tok(bad);
  REQUIRE(toks.size() >= 2);
  CHECK(toks.front() == "ok");
  CHECK(toks.back() == "more");
}

TEST_CASE("placeholder alphabet detector") {
  CHECK(placeholder_alphabet_only("<PHONE_NUMBER_1>"));
  CHECK(placeholder_alphabet_only("ABC_123"));
  CHECK_FALSE(placeholder_alphabet_only("abc"));
  CHECK_FALSE(placeholder_alphabet_only("A B"));
  CHECK_FALSE(placeholder_alphabet_only(""));
}

TEST_CASE("placeholder build and parse round trip") {
  CHECK(make_placeholder("PHONE_NUMBER", 3) == "<PHONE_NUMBER_3>");
  auto parts = parse_placeholder("<PHONE_NUMBER_3>");
  REQUIRE(parts.has_value());
  CHECK(parts->slug == "PHONE_NUMBER");
  CHECK(parts->index == 3);

  auto mask = parse_placeholder("<Mask_2>");
  CHECK_FALSE(mask.has_value());  // lowercase letters are outside the grammar

  CHECK_FALSE(parse_placeholder("<EMAIL_0>").has_value());   // indices start at 1
  CHECK_FALSE(parse_placeholder("<EMAIL_01>").has_value());  // no leading zeros
  CHECK_FALSE(parse_placeholder("<EMAIL>").has_value());     // missing index
  CHECK_FALSE(parse_placeholder("<_1>").has_value());        // empty slug
  CHECK_FALSE(parse_placeholder("EMAIL_1").has_value());     // no angle brackets
  CHECK_FALSE(parse_placeholder("<9EMAIL_1>").has_value());  // must start with a letter
}

TEST_CASE("placeholder parse splits on the last underscore") {
  auto parts = parse_placeholder("<ID_NUMBER_12>");
  REQUIRE(parts.has_value());
  CHECK(parts->slug == "ID_NUMBER");
  CHECK(parts->index == 12);
}

TEST_CASE("find_placeholder scans through noise") {
  std::string s = "x < y, <abc_1>, <EMAIL_2> end";
  auto m = find_placeholder(s, 0);
  REQUIRE(m.has_value());
  CHECK(m->parts.slug == "EMAIL");
  CHECK(m->parts.index == 2);
  CHECK(s.substr(m->begin, m->end - m->begin) == "<EMAIL_2>");
  CHECK_FALSE(find_placeholder(s, m->end).has_value());
}

TEST_CASE("find_placeholder handles adjacent and nested-looking brackets") {
  std::string s = "<<KEY_1>><PHONE_NUMBER_2>";
  auto m1 = find_placeholder(s, 0);
  REQUIRE(m1.has_value());
  CHECK(m1->parts.slug == "KEY");
  auto m2 = find_placeholder(s, m1->end);
  REQUIRE(m2.has_value());
  CHECK(m2->parts.slug == "PHONE_NUMBER");
  CHECK_FALSE(find_placeholder(s, m2->end).has_value());
}

TEST_CASE("contains_placeholder sees only well-formed tokens") {
  CHECK(contains_placeholder("before <TOKEN_7> after"));
  CHECK_FALSE(contains_placeholder("a < b and c > d"));
  CHECK_FALSE(contains_placeholder("<lowercase_1>"));
  CHECK_FALSE(contains_placeholder("plain text"));
}
