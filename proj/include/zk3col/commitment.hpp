#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>

#include "zk3col/error.hpp"
#include "zk3col/graph.hpp"
#include "zk3col/hex.hpp"
#include "zk3col/rng.hpp"
#include "zk3col/sha256.hpp"

namespace zk3col {

using Salt = std::array<std::uint8_t, 16>;

inline constexpr std::string_view kCommitmentTag = "ZK3COL1";

struct Commitment {
  Digest digest{};
  friend bool operator==(const Commitment&, const Commitment&) = default;
};

// The color is carried as a raw integer so that a dishonest prover can open
// values outside {1,2,3}; the verifier is responsible for rejecting them.
struct Opening {
  Vertex vertex = 0;
  int color = 0;
  Salt salt{};
  friend bool operator==(const Opening&, const Opening&) = default;
};

// SHA-256( "ZK3COL1" || vertex:u32be || color:u8 || salt[16] )
inline Commitment commit(Vertex vertex, int color, const Salt& salt) {
  std::array<std::uint8_t, kCommitmentTag.size() + 4 + 1 + 16> buf{};
  std::memcpy(buf.data(), kCommitmentTag.data(), kCommitmentTag.size());
  std::size_t at = kCommitmentTag.size();
  buf[at++] = static_cast<std::uint8_t>(vertex >> 24);
  buf[at++] = static_cast<std::uint8_t>(vertex >> 16);
  buf[at++] = static_cast<std::uint8_t>(vertex >> 8);
  buf[at++] = static_cast<std::uint8_t>(vertex);
  buf[at++] = static_cast<std::uint8_t>(color);
  std::memcpy(buf.data() + at, salt.data(), salt.size());
  return {sha256(buf)};
}

inline bool verify_opening(const Commitment& cm, const Opening& op) {
  return commit(op.vertex, op.color, op.salt) == cm;
}

inline Salt random_salt(Rng& rng) {
  Salt s{};
  rng.fill(s);
  return s;
}

inline std::string to_hex(const Commitment& cm) { return to_hex(std::span<const std::uint8_t>(cm.digest)); }

template <std::size_t N>
std::array<std::uint8_t, N> fixed_from_hex(std::string_view text) {
  auto bytes = from_hex(text);
  if (!bytes || bytes->size() != N)
    throw Error(ErrorCode::parse_error, "expected " + std::to_string(N) + " hex bytes, got '" + std::string(text) + "'");
  std::array<std::uint8_t, N> out{};
  std::copy(bytes->begin(), bytes->end(), out.begin());
  return out;
}

inline Commitment commitment_from_hex(std::string_view text) { return {fixed_from_hex<32>(text)}; }
inline Salt salt_from_hex(std::string_view text) { return fixed_from_hex<16>(text); }

}  // namespace zk3col
