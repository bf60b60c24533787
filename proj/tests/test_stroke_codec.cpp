#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "strokegan/stroke_codec.hpp"

using namespace strokegan;

namespace {

StrokeTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_stroke_table(in);
}

ErrorKind parse_error(const std::string& text, std::size_t* line = nullptr) {
  try {
    parse(text);
  } catch (const LineError& e) {
    if (line) *line = e.line_no();
    return e.kind();
  }
  ADD_FAILURE() << "no error for: " << text;
  return ErrorKind::IoError;
}

StrokeTable random_table(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 12), id(1, kStrokeTypes);
  StrokeTable t;
  t.version = "random-" + std::to_string(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> ids(static_cast<std::size_t>(len(rng)));
    for (int& v : ids) v = id(rng);
    t.entries.emplace(static_cast<char32_t>(0x4E00 + i * 3), ids);
  }
  return t;
}

// Brute-force membership: bit i is set iff stroke i+1 occurs somewhere in the list.
std::vector<int> membership_oracle(const std::vector<int>& ids) {
  std::vector<int> bits(kStrokeTypes, 0);
  for (int i = 0; i < kStrokeTypes; ++i) {
    for (int id : ids) {
      if (id == i + 1) bits[i] = 1;
    }
  }
  return bits;
}

std::set<std::set<char32_t>> pairwise_oracle(const StrokeTable& t) {
  std::vector<std::pair<char32_t, std::vector<int>>> items;
  for (const auto& [cp, ids] : t.entries) items.emplace_back(cp, membership_oracle(ids));
  std::set<std::set<char32_t>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::set<char32_t> g{items[i].first};
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (i != j && items[i].second == items[j].second) g.insert(items[j].first);
    }
    if (g.size() >= 2) groups.insert(g);
  }
  return groups;
}

}  // namespace

TEST(StrokeTable, SingleEntry) {
  const StrokeTable t = parse("U+4E00\t1\n");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.entries.at(0x4E00), std::vector<int>{1});
}

TEST(StrokeTable, CommentsBlankLinesAndVersion) {
  const StrokeTable t = parse("#version demo-2\n# note\n\nU+4E00\t1\r\nU+4E01\t1,2\n");
  EXPECT_EQ(t.version, "demo-2");
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.entries.at(0x4E01), (std::vector<int>{1, 2}));
}

TEST(StrokeTable, RejectsOutOfRangeIds) {
  std::size_t line = 0;
  EXPECT_EQ(parse_error("U+4E00\t1\nU+4E01\t2,33\n", &line), ErrorKind::StrokeIdOutOfRange);
  EXPECT_EQ(line, 2u);
  EXPECT_EQ(parse_error("U+4E00\t0\n"), ErrorKind::StrokeIdOutOfRange);
}

TEST(StrokeTable, RejectsMalformedRecords) {
  for (const char* bad : {"U+4E00 1\n", "4E00\t1\n", "U+4E00\t\n", "U+4E00\t1,\n", "U+4E00\t1,x\n", "U+4E00\t1;2\n",
                          "U+ZZZZ\t1\n", "U+4E00\t-1\n"}) {
    const ErrorKind k = parse_error(bad);
    EXPECT_TRUE(k == ErrorKind::MalformedRecord || k == ErrorKind::StrokeIdOutOfRange) << bad;
  }
  EXPECT_EQ(parse_error("U+4E00 1\n"), ErrorKind::MalformedRecord);
}

TEST(StrokeTable, RejectsDuplicates) {
  std::size_t line = 0;
  EXPECT_EQ(parse_error("U+4E00\t1\n# x\nU+4E00\t2\n", &line), ErrorKind::DuplicateCodepoint);
  EXPECT_EQ(line, 3u);
}

TEST(StrokeTable, MissingFile) {
  try {
    load_stroke_table("/nonexistent/strokes.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingFile);
  }
}

TEST(StrokeTable, RoundTripRandomTables) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const StrokeTable t = random_table(100, seed);
    ASSERT_NO_THROW(validate(t));
    std::stringstream io;
    write_stroke_table(io, t);
    EXPECT_EQ(parse_stroke_table(io), t);
  }
}

TEST(StrokeTable, BundledSampleIsValid) {
  const StrokeTable t = load_stroke_table(std::string(STROKEGAN_DATA_DIR) + "/sample_strokes.tsv");
  EXPECT_GE(t.size(), 200u);
  EXPECT_NO_THROW(validate(t));
}

TEST(Encode, MultiplicityDiscarded) {
  StrokeTable t;
  t.entries[0x4E00] = {1, 1, 5, 24};
  const StrokeEncoding e = encode_character(t, 0x4E00);
  EXPECT_EQ(e.popcount(), 3u);
  for (int i = 0; i < kStrokeTypes; ++i) EXPECT_EQ(e[i], i == 0 || i == 4 || i == 23) << i;
}

TEST(Encode, UnitVector) {
  StrokeTable t;
  t.entries[0x4E00] = {7};
  const StrokeEncoding e = encode_character(t, 0x4E00);
  EXPECT_EQ(e.popcount(), 1u);
  EXPECT_TRUE(e[6]);
  EXPECT_EQ(e.to_string(), "00000010000000000000000000000000");
}

TEST(Encode, UnknownCharacter) {
  StrokeTable t;
  t.entries[0x4E00] = {7};
  try {
    encode_character(t, 0x4E01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownCharacter);
  }
}

TEST(Encode, MatchesMembershipOracle) {
  const StrokeTable t = random_table(200, 42);
  for (const auto& [cp, ids] : t.entries) {
    const StrokeEncoding e = encode_character(t, cp);
    const std::vector<int> want = membership_oracle(ids);
    std::size_t distinct = std::set<int>(ids.begin(), ids.end()).size();
    EXPECT_EQ(e.popcount(), distinct);
    for (int i = 0; i < kStrokeTypes; ++i) ASSERT_EQ(e[i] ? 1 : 0, want[i]);
  }
}

TEST(Encode, OrderInvariant) {
  StrokeTable t;
  t.entries[1] = {3, 9, 9, 2};
  t.entries[2] = {2, 3, 9};
  EXPECT_EQ(encode_character(t, 1), encode_character(t, 2));
}

TEST(Collisions, SharedSetGrouped) {
  StrokeTable t;
  t.entries[0x4E00] = {1, 2};
  t.entries[0x4E01] = {2, 1, 1};
  t.entries[0x4E02] = {3};
  const auto g = encoding_collisions(t);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0], (std::vector<char32_t>{0x4E00, 0x4E01}));
}

TEST(Collisions, DistinctSetsGiveNone) {
  StrokeTable t;
  for (int i = 1; i <= kStrokeTypes; ++i) t.entries[static_cast<char32_t>(i)] = {i};
  EXPECT_TRUE(encoding_collisions(t).empty());
}

TEST(Collisions, MatchesPairwiseOracle) {
  // Short lists over few ids make collisions common.
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(1, 3), id(1, 5);
  StrokeTable t;
  for (int i = 0; i < 200; ++i) {
    std::vector<int> ids(static_cast<std::size_t>(len(rng)));
    for (int& v : ids) v = id(rng);
    t.entries[static_cast<char32_t>(0x4E00 + i)] = ids;
  }
  std::set<std::set<char32_t>> got;
  std::set<char32_t> seen;
  for (const auto& g : encoding_collisions(t)) {
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    for (char32_t cp : g) EXPECT_TRUE(seen.insert(cp).second) << "groups overlap";
    got.insert(std::set<char32_t>(g.begin(), g.end()));
  }
  EXPECT_FALSE(got.empty());
  EXPECT_EQ(got, pairwise_oracle(t));
}

TEST(Codepoint, FormatAndParse) {
  EXPECT_EQ(format_codepoint(0x4E00), "U+4E00");
  EXPECT_EQ(format_codepoint(0x41), "U+0041");
  char32_t cp = 0;
  EXPECT_TRUE(parse_codepoint("U+20000", cp));
  EXPECT_EQ(cp, 0x20000u);
  EXPECT_FALSE(parse_codepoint("U+110000", cp));
  EXPECT_FALSE(parse_codepoint("u+4E00", cp));
}
