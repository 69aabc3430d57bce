#pragma once

// Optional at-rest encryption for the mapping-store journal, built on
// libsodium's secretbox (XSalsa20-Poly1305). Each journal line becomes
//
//   sbx1:<base64(nonce || ciphertext)>
//
// with a fresh random nonce per line. Decoding authenticates the line, so a
// wrong key or tampered record fails loudly instead of yielding garbage.
//
// Only compiled when the build found libsodium (MASKGATE_HAVE_SODIUM=1).

#if !defined(MASKGATE_HAVE_SODIUM) || !MASKGATE_HAVE_SODIUM
#error "store_codec_sodium.hpp requires libsodium; include it only when MASKGATE_HAVE_SODIUM=1"
#endif

#include <sodium.h>

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include <maskgate/store.hpp>

namespace maskgate {

class SecretBoxCodec final : public RecordCodec {
 public:
  static constexpr std::size_t kKeyBytes = crypto_secretbox_KEYBYTES;

  explicit SecretBoxCodec(const std::array<unsigned char, kKeyBytes>& key) : key_(key) {
    ensure_sodium();
  }

  // Builds a codec from a 64-hex-character key string (e.g. the value of the
  // MASKGATE_STORE_KEY environment variable).
  static SecretBoxCodec from_hex(const std::string& hex) {
    ensure_sodium();
    std::array<unsigned char, kKeyBytes> key{};
    std::size_t bin_len = 0;
    if (hex.size() != kKeyBytes * 2 ||
        sodium_hex2bin(key.data(), key.size(), hex.c_str(), hex.size(), nullptr, &bin_len,
                       nullptr) != 0 ||
        bin_len != kKeyBytes) {
      throw StoreError("store key must be exactly 64 hex characters");
    }
    return SecretBoxCodec(key);
  }

  // Reads MASKGATE_STORE_KEY; returns nothing if the variable is unset.
  static std::optional<SecretBoxCodec> from_env() {
    const char* v = std::getenv("MASKGATE_STORE_KEY");
    if (!v || !*v) return std::nullopt;
    return from_hex(v);
  }

  static std::string generate_hex_key() {
    ensure_sodium();
    std::array<unsigned char, kKeyBytes> key{};
    randombytes_buf(key.data(), key.size());
    std::string hex(kKeyBytes * 2 + 1, '\0');
    sodium_bin2hex(hex.data(), hex.size(), key.data(), key.size());
    hex.resize(kKeyBytes * 2);
    return hex;
  }

  std::string name() const override { return "secretbox"; }

  std::string encode(const std::string& plain) const override {
    std::vector<unsigned char> buf(crypto_secretbox_NONCEBYTES + plain.size() +
                                   crypto_secretbox_MACBYTES);
    unsigned char* nonce = buf.data();
    randombytes_buf(nonce, crypto_secretbox_NONCEBYTES);
    crypto_secretbox_easy(buf.data() + crypto_secretbox_NONCEBYTES,
                          reinterpret_cast<const unsigned char*>(plain.data()), plain.size(),
                          nonce, key_.data());
    return std::string(kPrefix) + to_base64(buf);
  }

  std::string decode(const std::string& stored) const override {
    if (stored.rfind(kPrefix, 0) != 0)
      throw StoreError("journal line is not secretbox-encoded (missing sbx1: prefix)");
    std::vector<unsigned char> buf = from_base64(stored.substr(sizeof(kPrefix) - 1));
    if (buf.size() < crypto_secretbox_NONCEBYTES + crypto_secretbox_MACBYTES)
      throw StoreError("secretbox line too short");
    std::size_t ct_len = buf.size() - crypto_secretbox_NONCEBYTES;
    std::string plain(ct_len - crypto_secretbox_MACBYTES, '\0');
    if (crypto_secretbox_open_easy(reinterpret_cast<unsigned char*>(plain.data()),
                                   buf.data() + crypto_secretbox_NONCEBYTES, ct_len, buf.data(),
                                   key_.data()) != 0) {
      throw StoreError("secretbox authentication failed (wrong key or tampered record)");
    }
    return plain;
  }

 private:
  static constexpr char kPrefix[] = "sbx1:";

  static void ensure_sodium() {
    if (sodium_init() < 0) throw StoreError("libsodium initialization failed");
  }

  static std::string to_base64(const std::vector<unsigned char>& bin) {
    std::string out(sodium_base64_encoded_len(bin.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), bin.data(), bin.size(),
                      sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::string::traits_type::length(out.c_str()));
    return out;
  }

  static std::vector<unsigned char> from_base64(const std::string& b64) {
    std::vector<unsigned char> out(b64.size());
    std::size_t bin_len = 0;
    if (sodium_base642bin(out.data(), out.size(), b64.c_str(), b64.size(), nullptr, &bin_len,
                          nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
      throw StoreError("journal line has invalid base64 payload");
    }
    out.resize(bin_len);
    return out;
  }

  std::array<unsigned char, kKeyBytes> key_;
};

}  // namespace maskgate
