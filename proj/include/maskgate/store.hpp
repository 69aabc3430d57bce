#pragma once

// Durable, per-user bijective mapping between original sensitive values and
// typed placeholder tokens. The on-disk format is an append-only JSONL
// journal (one record per line, optionally wrapped by a line codec). Loading
// rebuilds the in-memory index and enforces two invariants:
//
//   * bijection — within a user no value maps to two placeholders and no
//     placeholder maps to two values;
//   * counter contiguity — for each (user, type slug) the placeholder
//     indexes present are exactly 1..k.
//
// Crash safety: appends are flushed (and optionally fsynced) before the
// index is updated, so a torn final line is the only possible damage from a
// crash mid-append; it is detected and truncated away on the next open.
// Rewrites (delete_user / compact) go through a temp file + rename.
//
// If an append or rewrite throws, the file is still in a consistent state
// but the live object may be stale; treat the exception like a crash and
// reopen the directory.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include <maskgate/placeholder.hpp>
#include <maskgate/taxonomy.hpp>

namespace maskgate {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MappingRecord {
  std::string user_id;
  std::string placeholder;
  std::string original_value;
  std::string type_slug;
  PrivacyLevel privacy_level = PrivacyLevel::PL2;
  std::int64_t created_at = 0;

  friend bool operator==(const MappingRecord&, const MappingRecord&) = default;
};

// Read-only view used by the restorer; lets tests substitute fakes.
class MappingResolver {
 public:
  virtual ~MappingResolver() = default;
  virtual std::optional<MappingRecord> resolve(const std::string& user_id,
                                               const std::string& placeholder) const = 0;
};

// Per-line transform applied between the JSON record and the journal file.
// The default passes lines through untouched; an encrypting codec lives in
// store_codec_sodium.hpp. A journal must be read back with the same codec it
// was written with.
class RecordCodec {
 public:
  virtual ~RecordCodec() = default;
  virtual std::string name() const { return "plain"; }
  virtual std::string encode(const std::string& plain) const { return plain; }
  virtual std::string decode(const std::string& stored) const { return stored; }
};

namespace detail {

inline std::string record_to_line(const MappingRecord& r) {
  nlohmann::ordered_json j;
  j["user_id"] = r.user_id;
  j["placeholder"] = r.placeholder;
  j["original_value"] = r.original_value;
  j["type_slug"] = r.type_slug;
  j["privacy_level"] = to_string(r.privacy_level);
  j["created_at"] = r.created_at;
  return j.dump();
}

inline MappingRecord record_from_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw StoreError("record is not a JSON object");
  MappingRecord r;
  try {
    r.user_id = j.at("user_id").get<std::string>();
    r.placeholder = j.at("placeholder").get<std::string>();
    r.original_value = j.at("original_value").get<std::string>();
    r.type_slug = j.at("type_slug").get<std::string>();
    auto level = parse_privacy_level(j.at("privacy_level").get<std::string>());
    if (!level) throw StoreError("unknown privacy_level in record");
    r.privacy_level = *level;
    r.created_at = j.at("created_at").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(std::string("malformed record: ") + e.what());
  }
  return r;
}

inline void fsync_fd_or_throw(int fd, const char* what) {
  if (::fsync(fd) != 0) throw StoreError(std::string("fsync failed for ") + what + ": " + std::strerror(errno));
}

inline void fsync_directory(const std::filesystem::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) throw StoreError("cannot open directory for fsync: " + dir.string());
  int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw StoreError("directory fsync failed: " + dir.string());
}

}  // namespace detail

class MappingStore final : public MappingResolver {
 public:
  struct Options {
    std::filesystem::path directory;
    // fsync after each append. Turn off only in tests or bulk loads.
    bool fsync_each_append = true;
    // Injectable clock (seconds since epoch) for deterministic created_at.
    std::function<std::int64_t()> clock;
    std::shared_ptr<const RecordCodec> codec;
    // Test hook invoked at named points of the write paths; throwing from it
    // simulates a crash at that point.
    std::function<void(const std::string&)> crash_probe;
  };

  explicit MappingStore(Options opts) : opts_(std::move(opts)) {
    if (opts_.directory.empty()) throw StoreError("store directory must not be empty");
    if (!opts_.clock) {
      opts_.clock = [] { return static_cast<std::int64_t>(std::time(nullptr)); };
    }
    if (!opts_.codec) opts_.codec = std::make_shared<RecordCodec>();
    std::filesystem::create_directories(opts_.directory);
    remove_stale_temp_files();
    load();
    open_append_fd();
  }

  ~MappingStore() override {
    if (fd_ >= 0) ::close(fd_);
  }

  MappingStore(const MappingStore&) = delete;
  MappingStore& operator=(const MappingStore&) = delete;

  static std::filesystem::path journal_path(const std::filesystem::path& directory) {
    return directory / "mappings.jsonl";
  }

  // Returns the existing record for (user_id, original_value) or creates one
  // with the next free index for the requested type slug. When the value is
  // already mapped, the stored record wins even if the caller asked for a
  // different type: one value, one placeholder.
  MappingRecord get_or_create(const std::string& user_id, const std::string& original_value,
                              const std::string& type_slug, PrivacyLevel level) {
    if (user_id.empty()) throw StoreError("user_id must not be empty");
    if (original_value.empty()) throw StoreError("original_value must not be empty");
    if (!is_valid_slug(type_slug)) throw StoreError("invalid type slug: " + type_slug);

    std::unique_lock lock(mu_);
    auto& user = users_[user_id];
    if (auto it = user.by_value.find(original_value); it != user.by_value.end()) {
      return it->second;
    }
    long index = 1;
    if (auto it = user.next_index.find(type_slug); it != user.next_index.end()) index = it->second;
    MappingRecord rec{user_id, make_placeholder(type_slug, index), original_value,
                      type_slug, level, opts_.clock()};
    append_locked(rec);
    index_locked(rec);
    return rec;
  }

  std::optional<MappingRecord> resolve(const std::string& user_id,
                                       const std::string& placeholder) const override {
    std::shared_lock lock(mu_);
    auto u = users_.find(user_id);
    if (u == users_.end()) return std::nullopt;
    auto it = u->second.by_placeholder.find(placeholder);
    if (it == u->second.by_placeholder.end()) return std::nullopt;
    return it->second;
  }

  std::optional<MappingRecord> find_by_value(const std::string& user_id,
                                             const std::string& original_value) const {
    std::shared_lock lock(mu_);
    auto u = users_.find(user_id);
    if (u == users_.end()) return std::nullopt;
    auto it = u->second.by_value.find(original_value);
    if (it == u->second.by_value.end()) return std::nullopt;
    return it->second;
  }

  // All records of one user in journal (creation) order.
  std::vector<MappingRecord> export_user(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    std::vector<MappingRecord> out;
    for (const auto& r : journal_)
      if (r.user_id == user_id) out.push_back(r);
    return out;
  }

  // Appends foreign records (e.g. from export_user on another store). Records
  // identical to existing ones are skipped; records that conflict with the
  // bijection or would leave a counter gap reject the whole batch.
  std::size_t import_user(const std::vector<MappingRecord>& records) {
    std::unique_lock lock(mu_);
    // Validate the whole batch against current state before touching disk.
    std::unordered_map<std::string, UserIndex> staged;  // shadow additions per user
    std::vector<const MappingRecord*> to_write;
    for (const auto& r : records) {
      validate_record_shape(r);
      const UserIndex* existing = nullptr;
      if (auto u = users_.find(r.user_id); u != users_.end()) existing = &u->second;
      UserIndex& shadow = staged[r.user_id];
      auto lookup_value = [&](const std::string& v) -> const MappingRecord* {
        if (existing) {
          if (auto it = existing->by_value.find(v); it != existing->by_value.end()) return &it->second;
        }
        if (auto it = shadow.by_value.find(v); it != shadow.by_value.end()) return &it->second;
        return nullptr;
      };
      auto lookup_ph = [&](const std::string& p) -> const MappingRecord* {
        if (existing) {
          if (auto it = existing->by_placeholder.find(p); it != existing->by_placeholder.end())
            return &it->second;
        }
        if (auto it = shadow.by_placeholder.find(p); it != shadow.by_placeholder.end()) return &it->second;
        return nullptr;
      };
      const MappingRecord* by_v = lookup_value(r.original_value);
      const MappingRecord* by_p = lookup_ph(r.placeholder);
      if (by_v && *by_v == r && by_p && *by_p == r) continue;  // exact duplicate: idempotent
      if (by_v || by_p) throw StoreError("import conflicts with existing mapping: " + r.placeholder);
      long expected = 1;
      long have_existing = 0;
      if (existing) {
        if (auto it = existing->next_index.find(r.type_slug); it != existing->next_index.end())
          have_existing = it->second - 1;
      }
      if (auto it = shadow.next_index.find(r.type_slug); it != shadow.next_index.end())
        expected = it->second;
      expected = std::max(expected, have_existing + 1);
      auto parts = parse_placeholder(r.placeholder);
      if (parts->index != expected)
        throw StoreError("import would break counter contiguity at " + r.placeholder);
      shadow.by_value.emplace(r.original_value, r);
      shadow.by_placeholder.emplace(r.placeholder, r);
      shadow.next_index[r.type_slug] = expected + 1;
      to_write.push_back(&r);
    }
    for (const MappingRecord* r : to_write) {
      append_locked(*r);
      index_locked(*r);
    }
    return to_write.size();
  }

  // Removes every record of the user and compacts the journal. Returns the
  // number of records removed.
  std::size_t delete_user(const std::string& user_id) {
    std::unique_lock lock(mu_);
    auto u = users_.find(user_id);
    if (u == users_.end()) return 0;
    std::size_t n = u->second.by_placeholder.size();
    std::vector<MappingRecord> kept;
    kept.reserve(journal_.size() - n);
    for (const auto& r : journal_)
      if (r.user_id != user_id) kept.push_back(r);
    rewrite_locked(kept);
    users_.erase(user_id);
    journal_ = std::move(kept);
    return n;
  }

  // Rewrites the journal from the live index (drops a preserved-but-
  // unterminated tail, reclaims nothing else in normal operation).
  void compact() {
    std::unique_lock lock(mu_);
    std::vector<MappingRecord> kept = journal_;
    rewrite_locked(kept);
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return journal_.size();
  }

  std::vector<std::string> user_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    out.reserve(users_.size());
    for (const auto& [id, _] : users_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct UserIndex {
    std::unordered_map<std::string, MappingRecord> by_value;
    std::unordered_map<std::string, MappingRecord> by_placeholder;
    std::unordered_map<std::string, long> next_index;  // slug -> next free index
  };

  void probe(const char* stage) {
    if (opts_.crash_probe) opts_.crash_probe(stage);
  }

  void remove_stale_temp_files() {
    for (const auto& entry : std::filesystem::directory_iterator(opts_.directory)) {
      if (entry.is_regular_file() && entry.path().extension() == ".tmp")
        std::filesystem::remove(entry.path());
    }
  }

  static void validate_record_shape(const MappingRecord& r) {
    if (r.user_id.empty()) throw StoreError("record has empty user_id");
    if (r.original_value.empty()) throw StoreError("record has empty original_value");
    auto parts = parse_placeholder(r.placeholder);
    if (!parts) throw StoreError("record has malformed placeholder: " + r.placeholder);
    if (parts->slug != r.type_slug)
      throw StoreError("placeholder slug does not match type_slug: " + r.placeholder);
  }

  // Loads the journal, truncating a torn final line, and rebuilds the index.
  void load() {
    journal_.clear();
    users_.clear();
    auto path = journal_path(opts_.directory);
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) return;  // fresh store
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool tail_unterminated = false;
    while (pos < data.size()) {
      std::size_t nl = data.find('\n', pos);
      bool terminated = nl != std::string::npos;
      std::string line = data.substr(pos, terminated ? nl - pos : std::string::npos);
      ++line_no;
      if (line.empty() && terminated) {
        pos = nl + 1;
        continue;
      }
      MappingRecord rec;
      bool ok = true;
      try {
        rec = detail::record_from_line(opts_.codec->decode(line));
        validate_record_shape(rec);
      } catch (const StoreError&) {
        ok = false;
      }
      if (!ok) {
        if (!terminated) {
          // Torn tail from a crash mid-append: drop it.
          truncate_journal(path, pos);
          break;
        }
        throw StoreError("corrupt record at line " + std::to_string(line_no) + " of " +
                         path.string());
      }
      check_and_index_loaded(rec, line_no);
      journal_.push_back(std::move(rec));
      if (!terminated) {
        tail_unterminated = true;
        break;
      }
      pos = nl + 1;
    }
    if (tail_unterminated) needs_leading_newline_ = true;
    finalize_counters();
  }

  // Bijection check during load; counters are validated afterwards.
  void check_and_index_loaded(const MappingRecord& rec, std::size_t line_no) {
    auto& user = users_[rec.user_id];
    if (user.by_value.count(rec.original_value))
      throw StoreError("bijection violated: value mapped twice at line " + std::to_string(line_no));
    if (user.by_placeholder.count(rec.placeholder))
      throw StoreError("bijection violated: placeholder " + rec.placeholder +
                       " mapped twice at line " + std::to_string(line_no));
    user.by_value.emplace(rec.original_value, rec);
    user.by_placeholder.emplace(rec.placeholder, rec);
  }

  void finalize_counters() {
    for (auto& [uid, user] : users_) {
      std::unordered_map<std::string, std::vector<long>> seen;
      for (const auto& [ph, rec] : user.by_placeholder) {
        auto parts = parse_placeholder(ph);
        seen[rec.type_slug].push_back(parts->index);
      }
      for (auto& [slug, ids] : seen) {
        std::sort(ids.begin(), ids.end());
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (ids[i] != static_cast<long>(i) + 1)
            throw StoreError("counter gap for user " + uid + " slug " + slug + ": expected " +
                             std::to_string(i + 1) + ", found " + std::to_string(ids[i]));
        }
        user.next_index[slug] = static_cast<long>(ids.size()) + 1;
      }
    }
  }

  void truncate_journal(const std::filesystem::path& path, std::size_t keep_bytes) {
    if (::truncate(path.c_str(), static_cast<off_t>(keep_bytes)) != 0)
      throw StoreError("cannot truncate torn journal tail: " + std::string(std::strerror(errno)));
  }

  void open_append_fd() {
    auto path = journal_path(opts_.directory);
    fd_ = ::open(path.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0600);
    if (fd_ < 0) throw StoreError("cannot open journal for append: " + path.string());
  }

  void write_all(int fd, const char* buf, std::size_t n) {
    while (n > 0) {
      ssize_t w = ::write(fd, buf, n);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw StoreError(std::string("journal write failed: ") + std::strerror(errno));
      }
      buf += w;
      n -= static_cast<std::size_t>(w);
    }
  }

  // Durably appends one record. Called with mu_ held exclusively. The index
  // is updated by the caller only after this returns, so a failure here
  // leaves memory unchanged and at worst a torn line on disk.
  void append_locked(const MappingRecord& rec) {
    std::string line;
    if (needs_leading_newline_) line.push_back('\n');
    line += opts_.codec->encode(detail::record_to_line(rec));
    line.push_back('\n');
    probe("append.pre_write");
    write_all(fd_, line.data(), line.size());
    if (opts_.fsync_each_append) detail::fsync_fd_or_throw(fd_, "journal");
    needs_leading_newline_ = false;
    probe("append.post_write");
  }

  void index_locked(const MappingRecord& rec) {
    auto& user = users_[rec.user_id];
    user.by_value.emplace(rec.original_value, rec);
    user.by_placeholder.emplace(rec.placeholder, rec);
    auto parts = parse_placeholder(rec.placeholder);
    long& next = user.next_index[rec.type_slug];
    if (next == 0) next = 1;
    next = std::max(next, parts->index + 1);
    journal_.push_back(rec);
  }

  // Atomically replaces the journal with the given records. Called with mu_
  // held exclusively.
  void rewrite_locked(const std::vector<MappingRecord>& records) {
    auto path = journal_path(opts_.directory);
    auto tmp = path;
    tmp += ".tmp";
    int tfd = ::open(tmp.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0600);
    if (tfd < 0) throw StoreError("cannot open temp journal: " + tmp.string());
    try {
      std::string buf;
      for (const auto& r : records) {
        buf += opts_.codec->encode(detail::record_to_line(r));
        buf.push_back('\n');
      }
      write_all(tfd, buf.data(), buf.size());
      detail::fsync_fd_or_throw(tfd, "temp journal");
    } catch (...) {
      ::close(tfd);
      ::unlink(tmp.c_str());
      throw;
    }
    ::close(tfd);
    probe("rewrite.pre_rename");
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
      ::unlink(tmp.c_str());
      throw StoreError(std::string("journal rename failed: ") + std::strerror(errno));
    }
    probe("rewrite.post_rename");
    detail::fsync_directory(opts_.directory);
    if (fd_ >= 0) ::close(fd_);
    open_append_fd();
    needs_leading_newline_ = false;
  }

  Options opts_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, UserIndex> users_;
  std::vector<MappingRecord> journal_;
  int fd_ = -1;
  // Set when load preserved a record whose trailing newline was lost; the
  // next append must start on a fresh line.
  bool needs_leading_newline_ = false;
};

}  // namespace maskgate
