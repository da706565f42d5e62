#include <gtest/gtest.h>

#include <atomic>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "popfrac/csv.hpp"
#include "popfrac/error.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/parallel.hpp"
#include "popfrac/random.hpp"

namespace popfrac {
namespace {

TEST(Random, SameSeedSameStream) {
    Rng a = make_rng(42), b = make_rng(42), c = make_rng(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a(), y = b(), z = c();
        EXPECT_EQ(x, y);
        differs = differs || x != z;
    }
    EXPECT_TRUE(differs);
}

TEST(Random, UniformIndexStaysInRange) {
    Rng rng = make_rng(1);
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto k = uniform_index(rng, 7);
        ASSERT_LT(k, 7u);
        ++seen[k];
    }
    for (int s : seen) EXPECT_GT(s, 800);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(rng);
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Random, ShuffleIsAPermutation) {
    Rng rng = make_rng(3);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    shuffle(v, rng);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Random, MixSeedSeparatesStreams) {
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(9, 4), mix_seed(9, 4));
}

TEST(Hash, KnownFnvVectors) {
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hash, FieldBoundariesMatter) {
    EXPECT_NE(Fnv1a().field("ab").field("c").digest(), Fnv1a().field("a").field("bc").digest());
}

TEST(Hash, HexRoundTrip) {
    for (std::uint64_t v : {0ULL, 1ULL, 0xdeadbeefULL, ~0ULL}) EXPECT_EQ(from_hex(to_hex(v)), v);
    EXPECT_EQ(to_hex(255), "00000000000000ff");
    EXPECT_THROW(from_hex("xyz"), Error);
}

TEST(Csv, QuotesOnlyWhenNeeded) {
    EXPECT_EQ(csv::escape("plain"), "plain");
    EXPECT_EQ(csv::escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv::escape("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Csv, RoundTripsAwkwardFields) {
    const csv::Row row = {"a,b", "line\nbreak", "quote\"d", "", "plain"};
    std::stringstream ss;
    csv::write_row(ss, row);
    csv::write_row(ss, {"x"});
    const auto rows = csv::read_all(ss);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], row);
    EXPECT_EQ(rows[1], csv::Row{"x"});
}

TEST(Csv, HandlesCrlf) {
    std::stringstream ss("a,b\r\nc,d\r\n");
    const auto rows = csv::read_all(ss);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1], (csv::Row{"c", "d"}));
}

TEST(Parallel, VisitsEveryIndexOnce) {
    for (std::size_t workers : {1u, 2u, 4u}) {
        std::vector<std::atomic<int>> hits(100);
        parallel_for(100, workers, [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    }
}

TEST(Parallel, RethrowsFailure) {
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 4) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

TEST(Error, CarriesKind) {
    try {
        fail(ErrorKind::not_found, "missing");
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::not_found);
        EXPECT_STREQ(e.what(), "missing");
    }
    EXPECT_EQ(to_string(ErrorKind::data), "data");
}

}  // namespace
}  // namespace popfrac
