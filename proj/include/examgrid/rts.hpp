#pragma once

// RTS1 container: packs the exam payloads (question paper, frameset,
// environment record) into one file, optionally passkey-encrypted.
//
// Layout, little-endian:
//
//   "RTS1" | flags u8 (bit0 = encrypted)
//          | [salt 16 | nonce 16]            encrypted only
//          | body_len u64 | body
//          | [tag 32]                        encrypted only
//
//   body = entry_count u16, then per entry
//          name_len u16 | name | type_tag u8 | method u8
//          | raw_len u64 | stored_len u64 | crc32 u32 | payload[stored_len]
//
// Encryption XORs the body with blocks SHA-256(K | nonce | le64(i)), where K
// is a 10000-round SHA-256 chain over (salt | passkey). The tag is
// HMAC-SHA256 keyed with SHA-256(K | "mac") over everything between the
// magic and the tag. This is a hash-only construction for desk use; it is
// not a substitute for a vetted AEAD.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "examgrid/bytes.hpp"
#include "examgrid/error.hpp"

namespace examgrid::rts {

enum class EntryType : std::uint8_t { Other = 0, Vqp = 1, Media = 2, EnvRec = 3 };
enum class Method : std::uint8_t { Stored = 0, Deflate = 1 };

std::string_view to_string(EntryType t);

struct Entry {
  std::string name;
  EntryType type = EntryType::Other;
  Method method = Method::Stored;
  Bytes data;

  bool operator==(const Entry&) const = default;
};

// Builds an entry whose method is DEFLATE only when deflating shrinks it.
Entry make_entry(std::string name, EntryType type, Bytes data);

using Salt = std::array<std::uint8_t, 16>;
using Nonce = std::array<std::uint8_t, 16>;
using Key = std::array<std::uint8_t, 32>;

inline constexpr int kKeyIterations = 10000;

// BadMagic, NeedPasskey, TagMismatch, CrcMismatch, Truncated, Malformed,
// DuplicateEntryName, DuplicateTypeTag, EmptyPasskey.
class RtsError : public Error {
 public:
  using Error::Error;
};

Key derive_key(const Salt& salt, std::string_view passkey);

std::uint32_t crc32(ByteView data);

// Packs with a fresh random salt and nonce.
Bytes pack(const std::vector<Entry>& entries, const std::optional<std::string>& passkey);

// Deterministic variant; salt and nonce are ignored without a passkey.
Bytes pack(const std::vector<Entry>& entries, const std::optional<std::string>& passkey,
           const Salt& salt, const Nonce& nonce);

std::vector<Entry> unpack(ByteView blob, const std::optional<std::string>& passkey);

// Reads only the magic and flags byte.
bool is_encrypted(ByteView blob);

const Entry* find(const std::vector<Entry>& entries, EntryType type);

}  // namespace examgrid::rts
