#pragma once

// Benchmark corpus data model: users with annotated dialogues and QA probes.
// JSON layout (see data/corpus.schema.json):
//
//   {"users": [{"user_id": "...", "real_name": "...",
//               "dialogues": [{"dialogue_id": "...",
//                              "messages": [{"role": "user|assistant",
//                                            "content": "...",
//                                            "annotations": [{"original_text": "...",
//                                                             "privacy_type": "...",
//                                                             "privacy_level": "PL2"}]}]}],
//               "qa_items": [{"question": "...", "reference_answer": "...",
//                             "category": "...", "privacy_dependent": true}]}]}
//
// Serialization round-trips exactly (ordered_json keeps key order stable;
// absent optionals are not emitted).

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskgate/taxonomy.hpp"
#include "maskgate/text.hpp"

namespace maskgate {

using ordered_json = nlohmann::ordered_json;

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PrivacyItem {
  std::string original_text;
  std::string privacy_type;
  PrivacyLevel privacy_level = PrivacyLevel::PL2;

  bool operator==(const PrivacyItem&) const = default;
};

struct Message {
  std::string role;  // "user" or "assistant"
  std::string content;
  std::vector<PrivacyItem> annotations;

  bool operator==(const Message&) const = default;
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<Message> messages;

  bool operator==(const Dialogue&) const = default;
};

struct QAItem {
  std::string question;
  std::string reference_answer;
  std::string category;
  bool privacy_dependent = false;

  bool operator==(const QAItem&) const = default;
};

struct UserRecord {
  std::string user_id;
  std::optional<std::string> real_name;
  std::vector<Dialogue> dialogues;
  std::vector<QAItem> qa_items;

  bool operator==(const UserRecord&) const = default;
};

struct Corpus {
  std::vector<UserRecord> users;

  bool operator==(const Corpus&) const = default;

  const UserRecord* find_user(std::string_view user_id) const {
    for (const auto& u : users)
      if (u.user_id == user_id) return &u;
    return nullptr;
  }
};

// --- JSON conversion ---------------------------------------------------------

namespace detail {

inline const ordered_json& require(const ordered_json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw CorpusError(where + ": missing field '" + key + "'");
  return *it;
}

inline std::string require_string(const ordered_json& j, const char* key, const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_string()) throw CorpusError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline ordered_json to_json(const PrivacyItem& it) {
  return ordered_json{{"original_text", it.original_text},
                      {"privacy_type", it.privacy_type},
                      {"privacy_level", to_string(it.privacy_level)}};
}

inline PrivacyItem privacy_item_from_json(const ordered_json& j, const std::string& where) {
  if (!j.is_object()) throw CorpusError(where + ": annotation must be an object");
  PrivacyItem it;
  it.original_text = detail::require_string(j, "original_text", where);
  it.privacy_type = detail::require_string(j, "privacy_type", where);
  auto lvl = parse_privacy_level(detail::require_string(j, "privacy_level", where));
  if (!lvl) throw CorpusError(where + ": privacy_level must be one of PL1..PL4");
  it.privacy_level = *lvl;
  return it;
}

inline ordered_json to_json(const Message& m) {
  ordered_json j{{"role", m.role}, {"content", m.content}};
  if (!m.annotations.empty()) {
    auto arr = ordered_json::array();
    for (const auto& a : m.annotations) arr.push_back(to_json(a));
    j["annotations"] = std::move(arr);
  }
  return j;
}

inline ordered_json to_json(const Corpus& c) {
  auto users = ordered_json::array();
  for (const auto& u : c.users) {
    ordered_json ju{{"user_id", u.user_id}};
    if (u.real_name) ju["real_name"] = *u.real_name;
    auto dialogues = ordered_json::array();
    for (const auto& d : u.dialogues) {
      auto messages = ordered_json::array();
      for (const auto& m : d.messages) messages.push_back(to_json(m));
      dialogues.push_back(ordered_json{{"dialogue_id", d.dialogue_id}, {"messages", std::move(messages)}});
    }
    ju["dialogues"] = std::move(dialogues);
    auto qa = ordered_json::array();
    for (const auto& q : u.qa_items)
      qa.push_back(ordered_json{{"question", q.question},
                                {"reference_answer", q.reference_answer},
                                {"category", q.category},
                                {"privacy_dependent", q.privacy_dependent}});
    ju["qa_items"] = std::move(qa);
    users.push_back(std::move(ju));
  }
  return ordered_json{{"users", std::move(users)}};
}

inline Corpus corpus_from_json(const ordered_json& j) {
  if (!j.is_object()) throw CorpusError("corpus: top level must be an object");
  const auto& users = detail::require(j, "users", "corpus");
  if (!users.is_array()) throw CorpusError("corpus: 'users' must be an array");
  Corpus c;
  for (std::size_t ui = 0; ui < users.size(); ++ui) {
    std::string uw = "users[" + std::to_string(ui) + "]";
    const auto& ju = users[ui];
    if (!ju.is_object()) throw CorpusError(uw + ": must be an object");
    UserRecord u;
    u.user_id = detail::require_string(ju, "user_id", uw);
    if (auto it = ju.find("real_name"); it != ju.end() && !it->is_null()) {
      if (!it->is_string()) throw CorpusError(uw + ": real_name must be a string");
      u.real_name = it->get<std::string>();
    }
    if (auto it = ju.find("dialogues"); it != ju.end()) {
      if (!it->is_array()) throw CorpusError(uw + ": dialogues must be an array");
      for (std::size_t di = 0; di < it->size(); ++di) {
        std::string dw = uw + ".dialogues[" + std::to_string(di) + "]";
        const auto& jd = (*it)[di];
        Dialogue d;
        d.dialogue_id = detail::require_string(jd, "dialogue_id", dw);
        const auto& msgs = detail::require(jd, "messages", dw);
        if (!msgs.is_array()) throw CorpusError(dw + ": messages must be an array");
        for (std::size_t mi = 0; mi < msgs.size(); ++mi) {
          std::string mw = dw + ".messages[" + std::to_string(mi) + "]";
          const auto& jm = msgs[mi];
          Message m;
          m.role = detail::require_string(jm, "role", mw);
          if (m.role != "user" && m.role != "assistant")
            throw CorpusError(mw + ": role must be 'user' or 'assistant', got '" + m.role + "'");
          m.content = detail::require_string(jm, "content", mw);
          if (auto an = jm.find("annotations"); an != jm.end()) {
            if (!an->is_array()) throw CorpusError(mw + ": annotations must be an array");
            for (std::size_t ai = 0; ai < an->size(); ++ai)
              m.annotations.push_back(
                  privacy_item_from_json((*an)[ai], mw + ".annotations[" + std::to_string(ai) + "]"));
          }
          d.messages.push_back(std::move(m));
        }
        u.dialogues.push_back(std::move(d));
      }
    }
    if (auto it = ju.find("qa_items"); it != ju.end()) {
      if (!it->is_array()) throw CorpusError(uw + ": qa_items must be an array");
      for (std::size_t qi = 0; qi < it->size(); ++qi) {
        std::string qw = uw + ".qa_items[" + std::to_string(qi) + "]";
        const auto& jq = (*it)[qi];
        QAItem q;
        q.question = detail::require_string(jq, "question", qw);
        q.reference_answer = detail::require_string(jq, "reference_answer", qw);
        q.category = detail::require_string(jq, "category", qw);
        if (auto pd = jq.find("privacy_dependent"); pd != jq.end()) {
          if (!pd->is_boolean()) throw CorpusError(qw + ": privacy_dependent must be a boolean");
          q.privacy_dependent = pd->get<bool>();
        }
        u.qa_items.push_back(std::move(q));
      }
    }
    c.users.push_back(std::move(u));
  }
  return c;
}

// --- validation ---------------------------------------------------------------

// Structural problems beyond what parsing can see. Returns human-readable
// issues with full location paths; empty means valid.
inline std::vector<std::string> validate(const Corpus& c) {
  std::vector<std::string> issues;
  std::vector<std::string> seen_ids;
  for (std::size_t ui = 0; ui < c.users.size(); ++ui) {
    const auto& u = c.users[ui];
    std::string uw = "users[" + std::to_string(ui) + "]";
    if (u.user_id.empty()) issues.push_back(uw + ": user_id is empty");
    for (const auto& id : seen_ids)
      if (id == u.user_id) issues.push_back(uw + ": duplicate user_id '" + u.user_id + "'");
    seen_ids.push_back(u.user_id);
    for (std::size_t di = 0; di < u.dialogues.size(); ++di) {
      const auto& d = u.dialogues[di];
      std::string dw = uw + ".dialogues[" + std::to_string(di) + "]";
      for (std::size_t mi = 0; mi < d.messages.size(); ++mi) {
        const auto& m = d.messages[mi];
        std::string mw = dw + ".messages[" + std::to_string(mi) + "]";
        if (m.role != "user" && m.role != "assistant")
          issues.push_back(mw + ": role must be 'user' or 'assistant', got '" + m.role + "'");
        for (std::size_t ai = 0; ai < m.annotations.size(); ++ai) {
          const auto& a = m.annotations[ai];
          std::string aw = mw + ".annotations[" + std::to_string(ai) + "]";
          if (a.original_text.empty())
            issues.push_back(aw + ": original_text is empty");
          else if (m.content.find(a.original_text) == std::string::npos)
            issues.push_back(aw + ": original_text '" + a.original_text +
                             "' is not a substring of the message content");
          if (a.privacy_type.empty()) issues.push_back(aw + ": privacy_type is empty");
        }
      }
    }
    for (std::size_t qi = 0; qi < u.qa_items.size(); ++qi) {
      const auto& q = u.qa_items[qi];
      std::string qw = uw + ".qa_items[" + std::to_string(qi) + "]";
      if (q.question.empty()) issues.push_back(qw + ": question is empty");
      if (q.reference_answer.empty()) issues.push_back(qw + ": reference_answer is empty");
    }
  }
  return issues;
}

// --- file IO -------------------------------------------------------------------

inline Corpus load_corpus_text(const std::string& text, bool strict = true) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw CorpusError(std::string("corpus: invalid JSON: ") + e.what());
  }
  Corpus c = corpus_from_json(j);
  if (strict) {
    auto issues = validate(c);
    if (!issues.empty()) {
      std::ostringstream os;
      os << "corpus: " << issues.size() << " validation issue(s):";
      for (const auto& s : issues) os << "\n  " << s;
      throw CorpusError(os.str());
    }
  }
  return c;
}

inline Corpus load_corpus(const std::string& path, bool strict = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("corpus: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_corpus_text(buf.str(), strict);
}

inline void save_corpus(const Corpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("corpus: cannot write " + path);
  out << to_json(c).dump(2) << '\n';
}

// --- statistics ------------------------------------------------------------------

struct StatsReport {
  std::size_t n_users = 0;
  std::size_t total_dialogues = 0;
  std::size_t total_turns = 0;     // a turn = one user message
  std::size_t total_messages = 0;  // user + assistant
  std::size_t messages_with_privacy = 0;
  std::size_t privacy_instances = 0;
  std::size_t total_tokens = 0;
  std::vector<std::pair<std::string, std::size_t>> per_level;  // "PL2" -> count, sorted
  std::vector<std::pair<std::string, std::size_t>> per_type;   // label -> count, sorted by count desc then label
  double avg_dialogues_per_user = 0;
  double avg_turns_per_user = 0;
  double avg_messages_per_user = 0;
  double avg_instances_per_user = 0;
  double avg_tokens_per_message = 0;
};

inline StatsReport compute_stats(const Corpus& c) {
  StatsReport r;
  r.n_users = c.users.size();
  std::vector<std::pair<std::string, std::size_t>> types;
  std::size_t level_counts[5] = {0, 0, 0, 0, 0};
  for (const auto& u : c.users) {
    r.total_dialogues += u.dialogues.size();
    for (const auto& d : u.dialogues) {
      for (const auto& m : d.messages) {
        ++r.total_messages;
        if (m.role == "user") ++r.total_turns;
        r.total_tokens += tokenize(m.content).size();
        if (!m.annotations.empty()) ++r.messages_with_privacy;
        for (const auto& a : m.annotations) {
          ++r.privacy_instances;
          ++level_counts[static_cast<int>(a.privacy_level)];
          bool found = false;
          for (auto& [label, n] : types)
            if (label == a.privacy_type) {
              ++n;
              found = true;
              break;
            }
          if (!found) types.emplace_back(a.privacy_type, 1);
        }
      }
    }
  }
  for (int l = 1; l <= 4; ++l)
    if (level_counts[l] > 0)
      r.per_level.emplace_back(to_string(static_cast<PrivacyLevel>(l)), level_counts[l]);
  std::sort(types.begin(), types.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  r.per_type = std::move(types);
  if (r.n_users > 0) {
    r.avg_dialogues_per_user = static_cast<double>(r.total_dialogues) / r.n_users;
    r.avg_turns_per_user = static_cast<double>(r.total_turns) / r.n_users;
    r.avg_messages_per_user = static_cast<double>(r.total_messages) / r.n_users;
    r.avg_instances_per_user = static_cast<double>(r.privacy_instances) / r.n_users;
  }
  if (r.total_messages > 0)
    r.avg_tokens_per_message = static_cast<double>(r.total_tokens) / r.total_messages;
  return r;
}

inline ordered_json to_json(const StatsReport& r) {
  ordered_json per_level = ordered_json::object();
  for (const auto& [k, v] : r.per_level) per_level[k] = v;
  ordered_json per_type = ordered_json::object();
  for (const auto& [k, v] : r.per_type) per_type[k] = v;
  return ordered_json{{"n_users", r.n_users},
                      {"total_dialogues", r.total_dialogues},
                      {"total_turns", r.total_turns},
                      {"total_messages", r.total_messages},
                      {"messages_with_privacy", r.messages_with_privacy},
                      {"privacy_instances", r.privacy_instances},
                      {"total_tokens", r.total_tokens},
                      {"per_level", std::move(per_level)},
                      {"per_type", std::move(per_type)},
                      {"avg_dialogues_per_user", r.avg_dialogues_per_user},
                      {"avg_turns_per_user", r.avg_turns_per_user},
                      {"avg_messages_per_user", r.avg_messages_per_user},
                      {"avg_instances_per_user", r.avg_instances_per_user},
                      {"avg_tokens_per_message", r.avg_tokens_per_message}};
}

}  // namespace maskgate
