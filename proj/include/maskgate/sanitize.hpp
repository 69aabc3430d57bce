#pragma once

// Replaces extracted sensitive spans in a message with masking tokens before
// the text leaves the machine. Masking is span-based: distinct values claim
// non-overlapping byte ranges (longest value first, then earliest first
// occurrence), every claimed range is spliced in a single pass, and tokens
// are assigned to distinct values in the order those values first appear in
// the message.
//
// Strategies:
//   typed_reversible — typed placeholders like <EMAIL_1> minted by the
//                      mapping store; fully reversible per user.
//   untyped          — opaque session-scoped tokens like <Mask_1>; the
//                      lowercase spelling keeps them outside the restorer's
//                      placeholder grammar, so they are deliberately not
//                      reversible through the store.
//   irreversible     — every masked span becomes "***".
//   none             — pass-through baseline (no masking at all).

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <maskgate/corpus.hpp>
#include <maskgate/placeholder.hpp>
#include <maskgate/store.hpp>
#include <maskgate/taxonomy.hpp>

namespace maskgate {

class SanitizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MaskStrategy { typed_reversible, untyped, irreversible, none };

inline const char* to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::typed_reversible: return "typed_reversible";
    case MaskStrategy::untyped: return "untyped";
    case MaskStrategy::irreversible: return "irreversible";
    case MaskStrategy::none: return "none";
  }
  return "?";
}

inline std::optional<MaskStrategy> parse_mask_strategy(std::string_view s) {
  if (s == "typed_reversible" || s == "typed") return MaskStrategy::typed_reversible;
  if (s == "untyped") return MaskStrategy::untyped;
  if (s == "irreversible") return MaskStrategy::irreversible;
  if (s == "none") return MaskStrategy::none;
  return std::nullopt;
}

inline const std::vector<MaskStrategy>& all_mask_strategies() {
  static const std::vector<MaskStrategy> v{MaskStrategy::typed_reversible, MaskStrategy::untyped,
                                           MaskStrategy::irreversible, MaskStrategy::none};
  return v;
}

// One distinct masked value in a sanitized message.
struct AppliedMask {
  std::string token;           // what now stands in the text ("<EMAIL_1>", "<Mask_2>", "***")
  std::string original_value;
  std::string type_slug;
  PrivacyLevel privacy_level = PrivacyLevel::PL2;
  std::size_t occurrences = 0;  // spans spliced for this value

  friend bool operator==(const AppliedMask&, const AppliedMask&) = default;
};

struct SanitizedMessage {
  std::string text;
  MaskStrategy strategy = MaskStrategy::none;
  std::vector<AppliedMask> applied;    // in order of first appearance in the message
  std::vector<std::string> warnings;   // value-free notes about skipped/odd items
};

// Session-scoped token table for the untyped strategy: within one session a
// value always gets the same <Mask_N>, numbered per user in first-assignment
// order. Nothing is persisted; a new session forgets everything.
class UntypedMaskSession {
 public:
  std::string get_or_assign(const std::string& user_id, const std::string& value) {
    auto& user = users_[user_id];
    auto it = user.token_by_value.find(value);
    if (it != user.token_by_value.end()) return it->second;
    std::string token = "<Mask_" + std::to_string(++user.last_index) + ">";
    user.token_by_value.emplace(value, token);
    return token;
  }

  void reset() { users_.clear(); }

 private:
  struct PerUser {
    std::unordered_map<std::string, std::string> token_by_value;
    long last_index = 0;
  };
  std::unordered_map<std::string, PerUser> users_;
};

class Sanitizer {
 public:
  // `store` is required for typed_reversible, `session` for untyped; the
  // other strategies need neither. `min_level` is the lowest privacy level
  // that still gets masked.
  Sanitizer(MaskStrategy strategy, MappingStore* store = nullptr,
            UntypedMaskSession* session = nullptr, PrivacyLevel min_level = PrivacyLevel::PL2)
      : strategy_(strategy), store_(store), session_(session), min_level_(min_level) {
    if (strategy_ == MaskStrategy::typed_reversible && !store_)
      throw SanitizeError("typed_reversible sanitizer needs a mapping store");
    if (strategy_ == MaskStrategy::untyped && !session_)
      throw SanitizeError("untyped sanitizer needs a mask session");
  }

  SanitizedMessage sanitize(const std::string& user_id, const std::string& text,
                            const std::vector<PrivacyItem>& items) const {
    SanitizedMessage out;
    out.strategy = strategy_;
    if (strategy_ == MaskStrategy::none) {
      out.text = text;
      return out;
    }

    // Dedup by original_text, first item wins; drop below-threshold and
    // empty values up front.
    struct Candidate {
      std::string value;
      std::string type_slug;
      PrivacyLevel level;
      std::size_t first_pos = 0;
      std::vector<std::pair<std::size_t, std::size_t>> spans;
    };
    std::vector<Candidate> candidates;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& item = items[i];
      if (item.privacy_level < min_level_) continue;
      if (item.original_text.empty()) {
        out.warnings.push_back("item " + std::to_string(i) + ": empty value skipped");
        continue;
      }
      if (seen.count(item.original_text)) continue;
      std::size_t pos = text.find(item.original_text);
      if (pos == std::string::npos) {
        out.warnings.push_back("item " + std::to_string(i) + " (" + item.privacy_type +
                               "): value not present in message, skipped");
        continue;
      }
      if (contains_placeholder(item.original_text)) {
        out.warnings.push_back("item " + std::to_string(i) + " (" + item.privacy_type +
                               "): value matches the placeholder grammar");
      }
      seen.emplace(item.original_text, candidates.size());
      auto slug = slug_or_private(item.privacy_type);
      candidates.push_back(Candidate{item.original_text, slug, item.privacy_level, pos, {}});
    }

    // Claim non-overlapping spans: longest value first, earliest first
    // occurrence breaking ties, so a value nested inside a longer one only
    // matches where it stands alone.
    std::vector<std::size_t> claim_order(candidates.size());
    for (std::size_t i = 0; i < claim_order.size(); ++i) claim_order[i] = i;
    std::sort(claim_order.begin(), claim_order.end(), [&](std::size_t a, std::size_t b) {
      if (candidates[a].value.size() != candidates[b].value.size())
        return candidates[a].value.size() > candidates[b].value.size();
      if (candidates[a].first_pos != candidates[b].first_pos)
        return candidates[a].first_pos < candidates[b].first_pos;
      return a < b;
    });
    std::vector<std::pair<std::size_t, std::size_t>> claimed;  // sorted by begin
    for (std::size_t idx : claim_order) {
      auto& cand = candidates[idx];
      std::size_t from = 0;
      while (true) {
        std::size_t pos = text.find(cand.value, from);
        if (pos == std::string::npos) break;
        std::size_t end = pos + cand.value.size();
        bool overlaps = false;
        for (const auto& [cb, ce] : claimed) {
          if (pos < ce && cb < end) {
            overlaps = true;
            break;
          }
        }
        if (!overlaps) {
          cand.spans.emplace_back(pos, end);
          claimed.emplace_back(pos, end);
        }
        from = pos + 1;  // values may overlap themselves; spans cannot
      }
    }

    // Assign tokens to distinct values in first-spliced-occurrence order.
    std::vector<std::size_t> token_order;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].spans.empty()) {
        out.warnings.push_back("value of type " + candidates[i].type_slug +
                               " fully covered by a longer masked value, skipped");
        continue;
      }
      std::sort(candidates[i].spans.begin(), candidates[i].spans.end());
      token_order.push_back(i);
    }
    std::sort(token_order.begin(), token_order.end(),
              [&](std::size_t a, std::size_t b) {
                return candidates[a].spans.front() < candidates[b].spans.front();
              });

    struct Splice {
      std::size_t begin, end;
      std::size_t applied_index;
    };
    std::vector<Splice> splices;
    for (std::size_t idx : token_order) {
      const auto& cand = candidates[idx];
      AppliedMask mask;
      mask.original_value = cand.value;
      mask.type_slug = cand.type_slug;
      mask.privacy_level = cand.level;
      mask.occurrences = cand.spans.size();
      mask.token = mint_token(user_id, cand);
      for (const auto& [b, e] : cand.spans)
        splices.push_back(Splice{b, e, out.applied.size()});
      out.applied.push_back(std::move(mask));
    }
    std::sort(splices.begin(), splices.end(),
              [](const Splice& a, const Splice& b) { return a.begin < b.begin; });

    out.text.reserve(text.size());
    std::size_t cursor = 0;
    for (const auto& sp : splices) {
      out.text.append(text, cursor, sp.begin - cursor);
      out.text += out.applied[sp.applied_index].token;
      cursor = sp.end;
    }
    out.text.append(text, cursor, std::string::npos);
    return out;
  }

 private:
  template <typename Candidate>
  std::string mint_token(const std::string& user_id, const Candidate& cand) const {
    switch (strategy_) {
      case MaskStrategy::typed_reversible:
        return store_->get_or_create(user_id, cand.value, cand.type_slug, cand.level).placeholder;
      case MaskStrategy::untyped:
        return session_->get_or_assign(user_id, cand.value);
      case MaskStrategy::irreversible:
        return "***";
      case MaskStrategy::none:
        break;
    }
    throw SanitizeError("no token for pass-through strategy");
  }

  MaskStrategy strategy_;
  MappingStore* store_;
  UntypedMaskSession* session_;
  PrivacyLevel min_level_;
};

}  // namespace maskgate
