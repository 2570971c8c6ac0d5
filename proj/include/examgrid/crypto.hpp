#pragma once

// Thin wrappers over libcrypto used by the RTS container. Desk-scale
// confidentiality only; see rts.hpp.

#include <array>
#include <cstdint>

#include "examgrid/bytes.hpp"

namespace examgrid::crypto {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(ByteView data);
Digest sha256(std::initializer_list<ByteView> parts);
Digest hmac_sha256(ByteView key, ByteView data);

// Constant-time comparison of two equal-length buffers.
bool equal(ByteView a, ByteView b);

// Cryptographically random bytes; thread-safe.
void random_fill(std::span<std::uint8_t> out);

}  // namespace examgrid::crypto
