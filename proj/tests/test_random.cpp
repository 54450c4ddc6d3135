#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "qhl/random.hpp"

using qhl::RandomStream;

TEST(Philox, KnownAnswerZeroCounterZeroKey) {
  const auto out = qhl::philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = qhl::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPiDigits) {
  const auto out = qhl::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RandomStream, SameSeedAndStreamReplay) {
  RandomStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RandomStream, StreamsDiffer) {
  RandomStream a(42, 0), b(42, 1), c(43, 0);
  EXPECT_NE(a(), b());
  RandomStream a2(42, 0);
  EXPECT_NE(a2(), c());
}

TEST(RandomStream, SubstreamsAreDistinctAndReproducible) {
  RandomStream base(5, 3);
  std::set<std::uint64_t> ids;
  for (std::uint64_t k = 0; k < 100; ++k) ids.insert(base.substream(k).stream_id());
  EXPECT_EQ(ids.size(), 100u);
  RandomStream s1 = base.substream(1), s2 = RandomStream(5, 3).substream(1);
  for (int i = 0; i < 10; ++i) ASSERT_EQ(s1(), s2());
}

TEST(RandomStream, UniformIsOpenInterval) {
  RandomStream r(1, 1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RandomStream, MomentsOfDerivedVariates) {
  RandomStream r(9, 0);
  const int n = 200000;
  double sn = 0, sn2 = 0, se = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    se += r.exponential();
    ss += r.sign();
  }
  EXPECT_NEAR(sn / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(se / n, 1.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(ss / n, 0.0, 4.0 / std::sqrt(n));
}
