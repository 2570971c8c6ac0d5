#include "examgrid/rts.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <limits>
#include <set>

#include "examgrid/crypto.hpp"

namespace examgrid::rts {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'R', 'T', 'S', '1'};
constexpr std::uint8_t kFlagEncrypted = 0x01;
constexpr std::size_t kTagSize = 32;

void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

template <typename T>
void put_le(Bytes& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(Bytes& out, ByteView b) { out.insert(out.end(), b.begin(), b.end()); }

class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  ByteView take(std::uint64_t n) {
    need(n);
    auto out = data_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return out;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) throw RtsError("Truncated", "container ends early");
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

Bytes deflate_raw(ByteView in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("deflateInit2 failed");
  Bytes out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate failed");
  out.resize(zs.total_out);
  return out;
}

Bytes inflate_raw(ByteView in, std::uint64_t raw_len, const std::string& name) {
  if (raw_len > std::numeric_limits<uInt>::max()) throw RtsError("Malformed", "entry too large: " + name);
  Bytes out(static_cast<std::size_t>(raw_len));
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw std::runtime_error("inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  // zlib needs a non-null output pointer even for empty output.
  Bytef dummy = 0;
  zs.next_out = out.empty() ? &dummy : out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  const auto leftover = zs.avail_in;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != raw_len || leftover != 0)
    throw RtsError("Malformed", "bad DEFLATE stream in entry " + name);
  return out;
}

void xor_keystream(std::span<std::uint8_t> buf, const Key& key, const Nonce& nonce) {
  std::uint64_t counter = 0;
  for (std::size_t off = 0; off < buf.size(); off += 32, ++counter) {
    std::array<std::uint8_t, 8> ctr{};
    for (int i = 0; i < 8; ++i) ctr[i] = static_cast<std::uint8_t>(counter >> (8 * i));
    auto block = crypto::sha256({key, nonce, ctr});
    const std::size_t n = std::min<std::size_t>(32, buf.size() - off);
    for (std::size_t i = 0; i < n; ++i) buf[off + i] ^= block[i];
  }
}

crypto::Digest mac_key(const Key& key) {
  static constexpr std::uint8_t kLabel[] = {'m', 'a', 'c'};
  return crypto::sha256({key, kLabel});
}

Bytes encode_body(const std::vector<Entry>& entries) {
  if (entries.size() > std::numeric_limits<std::uint16_t>::max())
    throw RtsError("Malformed", "too many entries");
  std::set<std::string> names;
  std::set<EntryType> tags;
  for (const auto& e : entries) {
    if (e.name.empty()) throw RtsError("Malformed", "entry name must not be empty");
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max())
      throw RtsError("Malformed", "entry name too long");
    if (!names.insert(e.name).second) throw RtsError("DuplicateEntryName", e.name);
    if (e.type != EntryType::Other && !tags.insert(e.type).second)
      throw RtsError("DuplicateTypeTag", std::string(to_string(e.type)));
  }

  Bytes body;
  put_le<std::uint16_t>(body, static_cast<std::uint16_t>(entries.size()));
  for (const auto& e : entries) {
    Bytes stored = e.method == Method::Deflate ? deflate_raw(e.data) : e.data;
    put_le<std::uint16_t>(body, static_cast<std::uint16_t>(e.name.size()));
    put_bytes(body, to_bytes(e.name));
    put_u8(body, static_cast<std::uint8_t>(e.type));
    put_u8(body, static_cast<std::uint8_t>(e.method));
    put_le<std::uint64_t>(body, e.data.size());
    put_le<std::uint64_t>(body, stored.size());
    put_le<std::uint32_t>(body, crc32(e.data));
    put_bytes(body, stored);
  }
  return body;
}

std::vector<Entry> decode_body(ByteView body) {
  Reader r(body);
  const auto count = r.le<std::uint16_t>();
  std::vector<Entry> entries;
  entries.reserve(count);
  std::set<std::string> names;
  for (std::uint16_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = r.le<std::uint16_t>();
    e.name = examgrid::to_string(r.take(name_len));
    if (e.name.empty()) throw RtsError("Malformed", "empty entry name");
    if (!names.insert(e.name).second) throw RtsError("DuplicateEntryName", e.name);
    const auto type = r.le<std::uint8_t>();
    const auto method = r.le<std::uint8_t>();
    if (type > 3) throw RtsError("Malformed", "unknown type tag " + std::to_string(type));
    if (method > 1) throw RtsError("Malformed", "unknown method " + std::to_string(method));
    e.type = static_cast<EntryType>(type);
    e.method = static_cast<Method>(method);
    const auto raw_len = r.le<std::uint64_t>();
    const auto stored_len = r.le<std::uint64_t>();
    const auto crc = r.le<std::uint32_t>();
    auto payload = r.take(stored_len);
    if (e.method == Method::Stored) {
      if (raw_len != stored_len) throw RtsError("Malformed", "length mismatch in entry " + e.name);
      e.data.assign(payload.begin(), payload.end());
    } else {
      e.data = inflate_raw(payload, raw_len, e.name);
    }
    if (crc32(e.data) != crc) throw RtsError("CrcMismatch", e.name);
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw RtsError("Malformed", "trailing bytes in body");
  return entries;
}

}  // namespace

std::string_view to_string(EntryType t) {
  switch (t) {
    case EntryType::Other: return "OTHER";
    case EntryType::Vqp: return "VQP";
    case EntryType::Media: return "MEDIA";
    case EntryType::EnvRec: return "ENVREC";
  }
  return "?";
}

Entry make_entry(std::string name, EntryType type, Bytes data) {
  Entry e{std::move(name), type, Method::Stored, std::move(data)};
  if (!e.data.empty() && deflate_raw(e.data).size() < e.data.size()) e.method = Method::Deflate;
  return e;
}

Key derive_key(const Salt& salt, std::string_view passkey) {
  if (passkey.empty()) throw RtsError("EmptyPasskey", "");
  auto k = crypto::sha256({salt, ByteView(reinterpret_cast<const std::uint8_t*>(passkey.data()),
                                          passkey.size())});
  for (int i = 0; i < kKeyIterations; ++i) k = crypto::sha256(k);
  return k;
}

std::uint32_t crc32(ByteView data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large inputs.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < data.size(); off += kChunk) {
    const std::size_t n = std::min(kChunk, data.size() - off);
    crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes pack(const std::vector<Entry>& entries, const std::optional<std::string>& passkey) {
  Salt salt{};
  Nonce nonce{};
  if (passkey) {
    crypto::random_fill(salt);
    crypto::random_fill(nonce);
  }
  return pack(entries, passkey, salt, nonce);
}

Bytes pack(const std::vector<Entry>& entries, const std::optional<std::string>& passkey,
           const Salt& salt, const Nonce& nonce) {
  if (passkey && passkey->empty()) throw RtsError("EmptyPasskey", "");
  Bytes body = encode_body(entries);

  Bytes out(kMagic.begin(), kMagic.end());
  if (!passkey) {
    put_u8(out, 0);
    put_le<std::uint64_t>(out, body.size());
    put_bytes(out, body);
    return out;
  }

  const Key key = derive_key(salt, *passkey);
  xor_keystream(body, key, nonce);
  put_u8(out, kFlagEncrypted);
  put_bytes(out, salt);
  put_bytes(out, nonce);
  put_le<std::uint64_t>(out, body.size());
  put_bytes(out, body);
  const auto tag = crypto::hmac_sha256(mac_key(key), ByteView(out).subspan(kMagic.size()));
  put_bytes(out, tag);
  return out;
}

bool is_encrypted(ByteView blob) {
  if (blob.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), blob.begin()))
    throw RtsError("BadMagic", "");
  if (blob.size() < kMagic.size() + 1) throw RtsError("Truncated", "missing flags");
  return (blob[kMagic.size()] & kFlagEncrypted) != 0;
}

std::vector<Entry> unpack(ByteView blob, const std::optional<std::string>& passkey) {
  const bool encrypted = is_encrypted(blob);
  Reader r(blob);
  r.take(kMagic.size());
  const auto flags = r.le<std::uint8_t>();
  if (flags & ~kFlagEncrypted) throw RtsError("Malformed", "unknown flag bits");

  if (!encrypted) {
    const auto body_len = r.le<std::uint64_t>();
    auto body = r.take(body_len);
    if (r.remaining() != 0) throw RtsError("Malformed", "trailing bytes after body");
    return decode_body(body);
  }

  // Tag first: everything between the magic and the tag is authenticated
  // before the length field is trusted, so any tampering reads as TagMismatch.
  constexpr std::size_t kHeader = 1 + 16 + 16 + 8;
  if (blob.size() < kMagic.size() + kHeader + kTagSize) throw RtsError("Truncated", "container ends early");
  if (!passkey) throw RtsError("NeedPasskey", "");
  Salt salt{};
  Nonce nonce{};
  auto s = r.take(salt.size());
  std::copy(s.begin(), s.end(), salt.begin());
  auto n = r.take(nonce.size());
  std::copy(n.begin(), n.end(), nonce.begin());
  const Key key = derive_key(salt, *passkey);
  auto authenticated = blob.subspan(kMagic.size(), blob.size() - kMagic.size() - kTagSize);
  auto tag = blob.subspan(blob.size() - kTagSize);
  const auto expected = crypto::hmac_sha256(mac_key(key), authenticated);
  if (!crypto::equal(expected, tag)) throw RtsError("TagMismatch", "");

  const auto body_len = r.le<std::uint64_t>();
  if (body_len != r.remaining() - kTagSize) throw RtsError("Malformed", "body length disagrees with size");
  auto cipher = r.take(body_len);

  Bytes body(cipher.begin(), cipher.end());
  xor_keystream(body, key, nonce);
  return decode_body(body);
}

const Entry* find(const std::vector<Entry>& entries, EntryType type) {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.type == type; });
  return it == entries.end() ? nullptr : &*it;
}

}  // namespace examgrid::rts
