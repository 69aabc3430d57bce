#pragma once

// Four-level privacy taxonomy: sensitivity levels, the canonical type-tag
// registry, per-level handling policy, and the slug normalization that embeds
// type names into placeholder tokens.
//
// Level semantics:
//   PL1  public/low-sensitivity preferences and habits — never extracted,
//        the only level eligible for long-term memory.
//   PL2  identifiable PII (names, phones, emails, addresses, identifiers).
//   PL3  highly sensitive PII (documents, finance, health, location, ...).
//   PL4  credentials and confidential material — absolutely prohibited from
//        storage, logs and model context.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace maskgate {

enum class PrivacyLevel : int { PL1 = 1, PL2 = 2, PL3 = 3, PL4 = 4 };

inline const char* to_string(PrivacyLevel l) {
  switch (l) {
    case PrivacyLevel::PL1: return "PL1";
    case PrivacyLevel::PL2: return "PL2";
    case PrivacyLevel::PL3: return "PL3";
    case PrivacyLevel::PL4: return "PL4";
  }
  return "PL?";
}

// Accepts "PL2", "pl2" or a bare digit "2".
inline std::optional<PrivacyLevel> parse_privacy_level(std::string_view s) {
  if (s.size() >= 2 && (s[0] == 'P' || s[0] == 'p') && (s[1] == 'L' || s[1] == 'l'))
    s.remove_prefix(2);
  if (s.size() != 1 || s[0] < '1' || s[0] > '4') return std::nullopt;
  return static_cast<PrivacyLevel>(s[0] - '0');
}

// --- slug normalization -----------------------------------------------------

// Uppercases ASCII letters, collapses every run of non-alphanumerics into a
// single underscore, trims edge underscores, and prefixes "T_" when the result
// would start with a digit. Idempotent. Returns nullopt when nothing survives
// (e.g. labels written entirely in CJK).
inline std::optional<std::string> try_slugify_type(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  bool pending_sep = false;
  for (char c : label) {
    char u = 0;
    if (c >= 'a' && c <= 'z') u = static_cast<char>(c - 'a' + 'A');
    else if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) u = c;
    if (u == 0) {
      if (!out.empty()) pending_sep = true;
      continue;
    }
    if (pending_sep) {
      out.push_back('_');
      pending_sep = false;
    }
    out.push_back(u);
  }
  if (out.empty()) return std::nullopt;
  if (out[0] >= '0' && out[0] <= '9') out.insert(0, "T_");
  return out;
}

inline std::string slugify_type(std::string_view label) {
  auto s = try_slugify_type(label);
  if (!s)
    throw std::invalid_argument("slugify_type: no ASCII alphanumerics survive in \"" +
                                std::string(label) + "\"");
  return *s;
}

// Fallback used when masking values whose type label cannot be slugified.
inline std::string slug_or_private(std::string_view label) {
  auto s = try_slugify_type(label);
  return s ? *s : std::string("PRIVATE");
}

// --- canonical registry ------------------------------------------------------

struct PrivacyTypeTag {
  std::string_view label;      // canonical tag label, e.g. "Account ID/Username"
  std::string_view slug;       // placeholder slug, e.g. "ACCOUNT_ID_USERNAME"
  PrivacyLevel default_level;  // level the tag belongs to in the registry
  bool strict_match;           // span scoring gives exact-match-or-zero credit
};

struct PolicyRule {
  PrivacyLevel level;
  bool long_term_memory_allowed;
  std::string_view default_storage;
  std::string_view default_model_behavior;
};

class Taxonomy {
 public:
  explicit Taxonomy(std::vector<PrivacyTypeTag> tags, std::vector<PolicyRule> policies)
      : tags_(std::move(tags)), policies_(std::move(policies)) {}

  static const Taxonomy& canonical();

  const std::vector<PrivacyTypeTag>& tags() const { return tags_; }

  const PrivacyTypeTag* find_by_label(std::string_view label) const {
    for (const auto& t : tags_)
      if (t.label == label) return &t;
    return nullptr;
  }

  const PrivacyTypeTag* find_by_slug(std::string_view slug) const {
    for (const auto& t : tags_)
      if (t.slug == slug) return &t;
    return nullptr;
  }

  // Accepts either a canonical label or its slug form; unknown types are
  // soft-matched (false): strictness is an opt-in property of known tags.
  bool is_strict(std::string_view label_or_slug) const {
    if (const auto* t = find_by_label(label_or_slug)) return t->strict_match;
    auto slug = try_slugify_type(label_or_slug);
    if (!slug) return false;
    if (const auto* t = find_by_slug(*slug)) return t->strict_match;
    return false;
  }

  const PolicyRule& policy(PrivacyLevel level) const {
    for (const auto& p : policies_)
      if (p.level == level) return p;
    throw std::out_of_range("taxonomy: no policy for level");
  }

 private:
  std::vector<PrivacyTypeTag> tags_;
  std::vector<PolicyRule> policies_;
};

inline const Taxonomy& Taxonomy::canonical() {
  static const Taxonomy instance = [] {
    using L = PrivacyLevel;
    std::vector<PrivacyTypeTag> tags = {
        // PL2 — identifiable PII
        {"Real Name", "REAL_NAME", L::PL2, false},
        {"Phone Number", "PHONE_NUMBER", L::PL2, true},
        {"Email", "EMAIL", L::PL2, true},
        {"Detailed Address", "DETAILED_ADDRESS", L::PL2, false},
        {"Account ID/Username", "ACCOUNT_ID_USERNAME", L::PL2, false},
        {"Network Identifier", "NETWORK_IDENTIFIER", L::PL2, false},
        {"Identity Background", "IDENTITY_BACKGROUND", L::PL2, false},
        {"Relationship Info", "RELATIONSHIP_INFO", L::PL2, false},
        // PL3 — highly sensitive PII
        {"ID Number", "ID_NUMBER", L::PL3, true},
        {"Financial Account", "FINANCIAL_ACCOUNT", L::PL3, true},
        {"Transaction Record", "TRANSACTION_RECORD", L::PL3, false},
        {"Assets/Income", "ASSETS_INCOME", L::PL3, false},
        {"Medical Health", "MEDICAL_HEALTH", L::PL3, false},
        {"Precise Location", "PRECISE_LOCATION", L::PL3, false},
        {"Itinerary/Trajectory", "ITINERARY_TRAJECTORY", L::PL3, false},
        {"Biometrics", "BIOMETRICS", L::PL3, false},
        {"Communication Content", "COMMUNICATION_CONTENT", L::PL3, false},
        {"Sensitive Identity", "SENSITIVE_IDENTITY", L::PL3, false},
        {"Judicial Record", "JUDICIAL_RECORD", L::PL3, false},
        // PL4 — credentials and confidential material. The seven credential
        // tags are strict (a near-miss credential is useless or dangerous);
        // the two descriptive tags score softly.
        {"Password", "PASSWORD", L::PL4, true},
        {"Verification Code", "VERIFICATION_CODE", L::PL4, true},
        {"Token", "TOKEN", L::PL4, true},
        {"Key", "KEY", L::PL4, true},
        {"Private Key", "PRIVATE_KEY", L::PL4, true},
        {"Payment Security Code", "PAYMENT_SECURITY_CODE", L::PL4, true},
        {"Database Connection String", "DATABASE_CONNECTION_STRING", L::PL4, true},
        {"Vulnerability Details", "VULNERABILITY_DETAILS", L::PL4, false},
        {"Business Secret", "BUSINESS_SECRET", L::PL4, false},
    };
    std::vector<PolicyRule> policies = {
        {L::PL1, true,
         "may persist as preference summaries or vectorized features; avoid retaining "
         "directly traceable raw utterances; honor one-click deletion",
         "usable for personalization; do not reify inferred profiles as facts"},
        {L::PL2, false,
         "disallowed by default; when a business purpose strictly requires it, store only "
         "in controlled systems with encryption, access control and auditing; retrieval "
         "indexes should hold pointers rather than raw text",
         "avoid repeating or exposing verbatim; confirm with the user and de-identify "
         "when mention is unavoidable"},
        {L::PL3, false,
         "not permitted absent a compelling necessity and clear legal basis; if stored at "
         "all, enforce strict minimization, field-level encryption and robust auditing",
         "do not collect by default; when the user volunteers it, mask the key fields "
         "and warn about the risk"},
        {L::PL4, false,
         "absolutely prohibited in databases, memory and logs; redact or block on "
         "detection; secrets must never enter model context",
         "refuse collection, storage or disclosure; advise credential rotation and "
         "escalation through incident response"},
    };
    return Taxonomy(std::move(tags), std::move(policies));
  }();
  return instance;
}

}  // namespace maskgate
