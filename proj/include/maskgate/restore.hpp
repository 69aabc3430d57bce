#pragma once

// Puts original values back into text coming from the cloud side. The scan
// walks the input once, looks up every well-formed placeholder token with the
// caller's resolver, splices the stored value when the token resolves and
// leaves it verbatim when it does not. Substituted content is never
// rescanned, so a stored value that happens to contain placeholder-shaped
// text cannot trigger cascading (or cyclic) expansion.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <maskgate/placeholder.hpp>
#include <maskgate/store.hpp>

namespace maskgate {

struct RestoredText {
  std::string text;
  std::size_t resolved = 0;                // substitutions performed (per occurrence)
  std::vector<std::string> unresolved;     // distinct unknown tokens, first-appearance order
};

inline RestoredText restore_text(const MappingResolver& resolver, const std::string& user_id,
                                 std::string_view input) {
  RestoredText out;
  out.text.reserve(input.size());
  std::size_t cursor = 0;
  while (auto match = find_placeholder(input, cursor)) {
    out.text.append(input.substr(cursor, match->begin - cursor));
    std::string token(input.substr(match->begin, match->end - match->begin));
    if (auto rec = resolver.resolve(user_id, token)) {
      out.text.append(rec->original_value);
      ++out.resolved;
    } else {
      out.text.append(token);
      bool known = false;
      for (const auto& t : out.unresolved)
        if (t == token) {
          known = true;
          break;
        }
      if (!known) out.unresolved.push_back(token);
    }
    cursor = match->end;
  }
  out.text.append(input.substr(cursor));
  return out;
}

}  // namespace maskgate
