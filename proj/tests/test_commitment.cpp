#include <gtest/gtest.h>

#include "oracles.hpp"
#include "zk3col/commitment.hpp"
#include "zk3col/permutation.hpp"
#include "zk3col/stats.hpp"

using namespace zk3col;

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(to_hex(std::span<const std::uint8_t>(sha256(std::string_view("abc")))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(to_hex(std::span<const std::uint8_t>(sha256(std::string_view("")))),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Hex, RoundTripAndRejects) {
  std::vector<std::uint8_t> bytes{0x00, 0x7f, 0x80, 0xff};
  EXPECT_EQ(to_hex(std::span<const std::uint8_t>(bytes)), "007f80ff");
  EXPECT_EQ(*from_hex("007F80ff"), bytes);
  EXPECT_FALSE(from_hex("abc").has_value());
  EXPECT_FALSE(from_hex("zz").has_value());
  EXPECT_THROW(salt_from_hex("00"), Error);
}

// Digests computed independently with Python's hashlib over
// b"ZK3COL1" + vertex(u32 BE) + color(u8) + salt.
TEST(Commit, GoldenVectors) {
  Salt zero{};
  EXPECT_EQ(to_hex(commit(0, 1, zero)), "2daaa8f84196be3376224bcdeb8cf8b99ac9e3e17f3db13a68ed0a434e6f850e");
  Salt counting{};
  for (std::size_t i = 0; i < counting.size(); ++i) counting[i] = static_cast<std::uint8_t>(i);
  EXPECT_EQ(to_hex(commit(7, 3, counting)), "bbfa3aa66dfb90d9ba3410dd7023afd90e7fc1373e0c489388163917fdda93be");
  Salt ones;
  ones.fill(0xff);
  EXPECT_EQ(to_hex(commit(258, 2, ones)), "bf669e344bea2c6b20d59e1e727a35b21bd359481ea9dc6b5332a91dc9c1d945");
}

TEST(Commit, RoundTripOverRandomTriples) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto v = static_cast<Vertex>(rng.uniform_index(1u << 20));
    const int c = static_cast<int>(rng.uniform_index(256)) - 100;
    const auto s = random_salt(rng);
    ASSERT_TRUE(verify_opening(commit(v, c, s), {v, c, s}));
  }
}

TEST(Commit, HexRoundTrip) {
  Rng rng(2);
  auto cm = commit(3, 2, random_salt(rng));
  EXPECT_EQ(commitment_from_hex(to_hex(cm)), cm);
}

TEST(Commit, BindingUnderSingleFieldChanges) {
  Rng rng(3);
  for (int i = 0; i < 100000; ++i) {
    Opening op{static_cast<Vertex>(rng.uniform_index(64)), static_cast<int>(1 + rng.uniform_index(3)), random_salt(rng)};
    const auto cm = commit(op.vertex, op.color, op.salt);
    Opening other = op;
    switch (rng.uniform_index(3)) {
      case 0: other.vertex = static_cast<Vertex>((op.vertex + 1 + rng.uniform_index(63)) % 64); break;
      case 1: other.color = 1 + (op.color - 1 + 1 + static_cast<int>(rng.uniform_index(2))) % 3; break;
      default: other.salt[rng.uniform_index(16)] ^= static_cast<std::uint8_t>(1 + rng.uniform_index(255)); break;
    }
    ASSERT_FALSE(verify_opening(cm, other));
  }
}

TEST(Commit, HidingByteFrequencies) {
  // 2 x 256 homogeneity test on digest bytes for color 1 vs color 2.
  Rng rng(4);
  std::array<std::array<double, 256>, 2> counts{};
  for (int color = 1; color <= 2; ++color)
    for (int i = 0; i < 4000; ++i) {
      const auto cm = commit(5, color, random_salt(rng));
      for (auto b : cm.digest) counts[color - 1][b] += 1.0;
    }
  const double per_row = 4000.0 * 32.0;
  double stat = 0.0;
  for (int b = 0; b < 256; ++b) {
    const double col = counts[0][b] + counts[1][b];
    for (int r = 0; r < 2; ++r) {
      const double e = col * per_row / (2.0 * per_row);
      stat += (counts[r][b] - e) * (counts[r][b] - e) / e;
    }
  }
  EXPECT_GT(stats::chi2_sf(stat, 255), 0.01);
}

TEST(Permutation, RankMatchesLexicographicEnumeration) {
  for (int k = 2; k <= 4; ++k) {
    const auto perms = oracle::permutations_lex(k);
    ASSERT_EQ(perms.size(), factorial(static_cast<std::size_t>(k)));
    for (std::size_t r = 0; r < perms.size(); ++r) {
      auto p = Permutation::from_rank(static_cast<std::size_t>(k), r);
      EXPECT_EQ(p.image(), perms[r]);
      EXPECT_EQ(Permutation(perms[r]).rank(), r);
    }
  }
}

TEST(Permutation, S3RankTable) {
  EXPECT_EQ(Permutation::from_rank(3, 0).image(), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(Permutation::from_rank(3, 3).image(), (std::vector<int>{2, 3, 1}));
  EXPECT_EQ(Permutation::from_rank(3, 5).image(), (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(Permutation::identity(3).rank(), 0u);
}

TEST(Permutation, InverseAndValidation) {
  for (std::size_t r = 0; r < 24; ++r) {
    auto p = Permutation::from_rank(4, r);
    for (int x = 1; x <= 4; ++x) EXPECT_EQ(p.inverse(p(x)), x);
  }
  EXPECT_THROW(Permutation(std::vector<int>{1, 1, 2}), Error);
  EXPECT_THROW(Permutation(std::vector<int>{1, 2, 4}), Error);
  EXPECT_THROW(Permutation::from_rank(3, 6), Error);
}

TEST(Permutation, ApplyRelabelsColors) {
  auto phi = Permutation(std::vector<int>{2, 3, 1});
  auto c = apply_permutation(phi, Coloring({1, 2, 3, 1}));
  EXPECT_EQ(c.values(), (std::vector<Color>{2, 3, 1, 2}));
}

TEST(Rng, DeterministicAndDerivedSeedsDiffer) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
  EXPECT_NE(derive_seed(1, "alice"), derive_seed(1, "bob"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  EXPECT_EQ(derive_seed(9, "x"), derive_seed(9, "x"));
}

TEST(Rng, UniformIndexIsUniform) {
  Rng rng(8);
  std::vector<double> counts(6, 0.0);
  for (int i = 0; i < 60000; ++i) counts[rng.uniform_index(6)] += 1.0;
  std::vector<double> expected(6, 10000.0);
  EXPECT_GT(stats::pearson(counts, expected).p, 0.001);
}
