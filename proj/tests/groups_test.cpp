#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gshare/groups.hpp"
#include "gshare/random.hpp"
#include "testing/synthetic.hpp"

namespace gshare {
namespace {

const std::string kData = GSHARE_TEST_DATA;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> names(const GroupTable& t, GroupId g, const Vocabulary& v) {
  std::vector<std::string> out;
  for (auto w : t.members(g)) out.push_back(v.word(w));
  return out;
}

std::set<std::string> keys_of(const GroupTable& t, WordId w) {
  std::set<std::string> out;
  for (auto g : t.groups_of(w)) out.insert(t.key(g));
  return out;
}

void expect_consistent(const GroupTable& t) {
  for (GroupId g = 0; g < t.num_groups(); ++g) {
    ASSERT_FALSE(t.members(g).empty());
    ASSERT_TRUE(std::is_sorted(t.members(g).begin(), t.members(g).end()));
    for (auto w : t.members(g)) {
      const auto& gs = t.groups_of(w);
      EXPECT_TRUE(std::binary_search(gs.begin(), gs.end(), g));
    }
  }
  for (WordId w = 0; w < t.num_words(); ++w) {
    const auto& gs = t.groups_of(w);
    ASSERT_TRUE(std::adjacent_find(gs.begin(), gs.end(), std::greater_equal<>()) == gs.end());
    for (auto g : gs) {
      const auto& m = t.members(g);
      EXPECT_TRUE(std::binary_search(m.begin(), m.end(), w));
    }
  }
}

TEST(GroupsTsv, DirectConstruction) {
  const Vocabulary v({"good", "nice"});
  const auto t = parse_groups_tsv("A\tgood\nA\tnice\nB\tgood\n", v);
  EXPECT_EQ(t.num_groups(), 2u);
  EXPECT_EQ(t.num_words(), v.rows());
  EXPECT_EQ(keys_of(t, 0), (std::set<std::string>{"A", "B"}));
  EXPECT_EQ(keys_of(t, 1), (std::set<std::string>{"A"}));
  EXPECT_TRUE(t.groups_of(v.unk_id()).empty());
  EXPECT_TRUE(t.groups_of(v.pad_id()).empty());
  expect_consistent(t);
}

TEST(GroupsTsv, AllOovGivesEmptyTable) {
  const Vocabulary v({"good"});
  GroupBuildStats stats;
  const auto t = parse_groups_tsv("A\tbad\nB\tworse\n", v, &stats);
  EXPECT_EQ(t.num_groups(), 0u);
  EXPECT_EQ(stats.oov_skipped, 2u);
  EXPECT_EQ(stats.empty_groups_dropped, 2u);
}

TEST(GroupsTsv, EmptyGroupsDroppedAndIdsDense) {
  const Vocabulary v({"x", "y"});
  const auto t = parse_groups_tsv("A\tzzz\nB\tx\nC\tqqq\nD\ty\n", v);
  ASSERT_EQ(t.num_groups(), 2u);
  EXPECT_EQ(t.key(0), "B");
  EXPECT_EQ(t.key(1), "D");
}

TEST(GroupsTsv, MalformedLineReportsLine) {
  const Vocabulary v({"x"});
  try {
    parse_groups_tsv("A\tx\nbroken\n", v);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(GroupsTsv, MatchesInvertedIndexOracle) {
  Rng rng(17);
  std::vector<std::string> words;
  for (int i = 0; i < 120; ++i) words.push_back("w" + std::to_string(i));
  const Vocabulary v(words);
  std::ostringstream text;
  std::map<std::string, std::set<std::string>> inverted;  // word -> keys
  std::map<std::string, std::set<std::string>> forward;   // key -> words
  for (int i = 0; i < 1000; ++i) {
    const std::string key = "k" + std::to_string(rng.below(60));
    const std::string word = "w" + std::to_string(rng.below(150));  // some OOV
    text << key << '\t' << word << '\n';
    if (v.find(word)) {
      inverted[word].insert(key);
      forward[key].insert(word);
    }
  }
  const auto t = parse_groups_tsv(text.str(), v);
  expect_consistent(t);
  EXPECT_EQ(t.num_groups(), forward.size());
  for (WordId w = 0; w < v.size(); ++w) {
    const auto it = inverted.find(v.word(w));
    EXPECT_EQ(keys_of(t, w), it == inverted.end() ? std::set<std::string>{} : it->second);
  }
  for (GroupId g = 0; g < t.num_groups(); ++g) {
    const auto n = names(t, g, v);
    EXPECT_EQ(std::set<std::string>(n.begin(), n.end()), forward[t.key(g)]);
  }
}

TEST(GroupsTsv, Deterministic) {
  const Vocabulary v({"a", "b", "c"});
  const std::string text = "Z\tc\nY\ta\nZ\tb\n";
  EXPECT_EQ(parse_groups_tsv(text, v), parse_groups_tsv(text, v));
  EXPECT_EQ(parse_groups_tsv(text, v).key(0), "Z");
}

TEST(GroupsTsv, CanonicalRoundTrip) {
  const Vocabulary v({"a", "b", "c"});
  const auto t = parse_groups_tsv("Z\tc\nY\ta\nZ\tb\nY\tc\n", v);
  const auto tsv = to_canonical_tsv(t, v);
  EXPECT_EQ(tsv, "Z\tb\nZ\tc\nY\ta\nY\tc\n");
  EXPECT_EQ(parse_groups_tsv(tsv, v), t);
}

TEST(GroupsBrown, DirectConstructionAndDedup) {
  const Vocabulary v({"good", "nice", "bad"});
  const auto t = parse_groups_brown("01\tgood\t5\n01\tnice\t3\n10\tbad\t9\n01\tgood\t5\n", v);
  ASSERT_EQ(t.num_groups(), 2u);
  EXPECT_EQ(names(t, 0, v), (std::vector<std::string>{"good", "nice"}));
  EXPECT_EQ(names(t, 1, v), (std::vector<std::string>{"bad"}));
}

TEST(GroupsBrown, MalformedLines) {
  const Vocabulary v({"good"});
  EXPECT_THROW(parse_groups_brown("01\tgood\n", v), ParseError);
  EXPECT_THROW(parse_groups_brown("0x1\tgood\t4\n", v), ParseError);
  EXPECT_THROW(parse_groups_brown("01\tgood\tmany\n", v), ParseError);
}

TEST(GroupsBrown, ThousandClusterFixture) {
  std::vector<TokenList> docs;
  std::istringstream in(slurp(kData + "/brown_fixture.txt"));
  std::set<std::string> bitstrings;
  std::string bits, word, count;
  while (in >> bits >> word >> count) {
    docs.push_back({word});
    bitstrings.insert(bits);
  }
  ASSERT_EQ(bitstrings.size(), 1000u);
  const auto v = build_vocabulary(docs);
  const auto t = groups_from_brown(kData + "/brown_fixture.txt", v);
  EXPECT_EQ(t.num_groups(), 1000u);
  expect_consistent(t);
}

TEST(GroupsMesh, TreeNumberPrefix) {
  EXPECT_EQ(tree_number_prefix("C06.552.150.125", 3), "C06.552.150");
  EXPECT_EQ(tree_number_prefix("C16.131", 3), "C16.131");
  EXPECT_EQ(tree_number_prefix("C06.552.150.125", 1), "C06");
  EXPECT_THROW(tree_number_prefix("06.552", 3), std::invalid_argument);
  EXPECT_THROW(tree_number_prefix("C06..552", 3), std::invalid_argument);
  EXPECT_THROW(tree_number_prefix("C06.5x2", 3), std::invalid_argument);
  EXPECT_THROW(tree_number_prefix("", 3), std::invalid_argument);
}

TEST(GroupsMesh, FixtureGroupsByThreeComponentPrefix) {
  const Vocabulary v({"Alagille_Syndrome", "Cholestasis", "Biliary_Atresia", "Choledochal_Cyst",
                      "Hepatitis", "Jaundice"});
  GroupBuildStats stats;
  const auto t = groups_from_mesh(kData + "/mesh_fixture.tsv", v, 3, &stats);
  expect_consistent(t);
  EXPECT_EQ(keys_of(t, *v.find("Alagille_Syndrome")), (std::set<std::string>{"C06.552.150"}));
  EXPECT_EQ(keys_of(t, *v.find("Cholestasis")), (std::set<std::string>{"C06.552.150"}));
  EXPECT_EQ(keys_of(t, *v.find("Choledochal_Cyst")),
            (std::set<std::string>{"C06.130.120", "C16.131"}));
  EXPECT_EQ(keys_of(t, *v.find("Biliary_Atresia")),
            (std::set<std::string>{"C06.130.120", "C16.131.314"}));
  EXPECT_GT(stats.oov_skipped, 0u);
}

TEST(GroupsMesh, MultipleTreeNumbers) {
  const Vocabulary v({"term"});
  const auto t = parse_groups_mesh("term\tC06.552.150.125;C16.131\n", v);
  EXPECT_EQ(keys_of(t, 0), (std::set<std::string>{"C06.552.150", "C16.131"}));
}

TEST(GroupsMesh, MalformedTreeNumberIsError) {
  const Vocabulary v({"term"});
  EXPECT_THROW(parse_groups_mesh("term\tC06.55a\n", v), ParseError);
  EXPECT_THROW(parse_groups_mesh("term only\n", v), ParseError);
}

TEST(GroupsMesh, MatchesPrefixBucketOracle) {
  Rng rng(23);
  std::vector<std::string> words;
  std::ostringstream text;
  std::map<std::string, std::set<std::string>> expected;  // word -> keys
  const char letters[] = "ABCDG";
  for (int i = 0; i < 50; ++i) {
    const std::string term = "t" + std::to_string(i);
    words.push_back(term);
    text << term << '\t';
    for (std::size_t n = 0, count = 1 + rng.below(3); n < count; ++n) {
      std::vector<std::string> parts{std::string(1, letters[rng.below(5)]) +
                                     std::to_string(10 + rng.below(3))};
      for (std::size_t c = 1, depth = 1 + rng.below(5); c < depth; ++c) {
        parts.push_back(std::to_string(100 + rng.below(3)));
      }
      std::string full, key;
      for (std::size_t c = 0; c < parts.size(); ++c) {
        full += (c ? "." : "") + parts[c];
        if (c < 3) key += (c ? "." : "") + parts[c];
      }
      text << (n ? ";" : "") << full;
      expected[term].insert(key);
    }
    text << '\n';
  }
  const Vocabulary v(words);
  const auto t = parse_groups_mesh(text.str(), v, 3);
  expect_consistent(t);
  std::set<std::string> all_keys;
  for (const auto& [w, ks] : expected) {
    EXPECT_EQ(keys_of(t, *v.find(w)), ks) << w;
    all_keys.insert(ks.begin(), ks.end());
  }
  EXPECT_EQ(t.num_groups(), all_keys.size());
}

TEST(GroupsSentiment, DirectConstruction) {
  const Vocabulary v({"good", "nice"});
  const auto t = parse_groups_sentiment_lexicon("a\t1\t0.5\t0\tgood#1 nice#2\tgloss\n", v);
  ASSERT_EQ(t.num_groups(), 1u);
  EXPECT_EQ(names(t, 0, v), (std::vector<std::string>{"good", "nice"}));
}

TEST(GroupsSentiment, ObjectiveSynsetDropped) {
  const Vocabulary v({"green"});
  GroupBuildStats stats;
  const auto t = parse_groups_sentiment_lexicon("a\t3\t0\t0\tgreen#1\tcolor\n", v, &stats);
  EXPECT_EQ(t.num_groups(), 0u);
  EXPECT_EQ(stats.objective_skipped, 1u);
}

TEST(GroupsSentiment, NonNumericScoreIsError) {
  const Vocabulary v({"good"});
  EXPECT_THROW(parse_groups_sentiment_lexicon("a\t1\thigh\t0\tgood#1\tg\n", v), ParseError);
  EXPECT_THROW(parse_groups_sentiment_lexicon("a\t1\t0.5\n", v), ParseError);
}

TEST(GroupsSentiment, FixtureMatchesLineFilterOracle) {
  const std::string text = slurp(kData + "/sentilex_fixture.txt");
  // Oracle: keep non-comment lines with a positive score; collect single-word
  // terms with the sense suffix removed.
  std::vector<std::set<std::string>> kept;
  std::set<std::string> vocab_words;
  std::istringstream lines(text);
  std::string line;
  std::size_t objective = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::istringstream fs(line);
    for (std::string x; std::getline(fs, x, '\t');) f.push_back(x);
    if (std::stod(f[2]) == 0.0 && std::stod(f[3]) == 0.0) {
      ++objective;
      continue;
    }
    std::set<std::string> terms;
    std::istringstream ts(f[4]);
    for (std::string term; ts >> term;) {
      term = term.substr(0, term.find('#'));
      if (term.find('_') != std::string::npos) continue;
      terms.insert(term);
      vocab_words.insert(term);
    }
    kept.push_back(terms);
  }
  vocab_words.insert("green");  // objective-only word must stay ungrouped
  const Vocabulary v(std::vector<std::string>(vocab_words.begin(), vocab_words.end()));
  GroupBuildStats stats;
  const auto t = groups_from_sentiment_lexicon(kData + "/sentilex_fixture.txt", v, &stats);
  expect_consistent(t);
  ASSERT_EQ(t.num_groups(), kept.size());
  EXPECT_EQ(stats.objective_skipped, objective);
  EXPECT_EQ(stats.multiword_skipped, 1u);
  for (GroupId g = 0; g < t.num_groups(); ++g) {
    const auto n = names(t, g, v);
    EXPECT_EQ(std::set<std::string>(n.begin(), n.end()), kept[g]);
  }
  EXPECT_TRUE(t.groups_of(*v.find("green")).empty());
  EXPECT_EQ(t.group_count(*v.find("awful")), 2u);
}

TEST(ResourceKind, ParseAndPrint) {
  for (auto k : {ResourceKind::tsv, ResourceKind::brown, ResourceKind::mesh,
                 ResourceKind::sentilex}) {
    EXPECT_EQ(parse_resource_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_resource_kind("wordnet"), std::invalid_argument);
}

TEST(GroupInit, SingletonEqualsPretrainedRow) {
  const Vocabulary v({"good", "bad"});
  const auto t = parse_groups_tsv("A\tgood\n", v);
  Matrix p(v.rows(), 2);
  p(0, 0) = 0.3;
  p(0, 1) = -1.7;
  const auto g = init_group_embeddings(t, p);
  EXPECT_EQ(g.values(0, 0), 0.3);
  EXPECT_EQ(g.values(0, 1), -1.7);
  EXPECT_EQ(g.member_counts, (std::vector<std::size_t>{1}));
}

TEST(GroupInit, ArithmeticMeanOfTwo) {
  const Vocabulary v({"a", "b"});
  const auto t = parse_groups_tsv("G\ta\nG\tb\n", v);
  Matrix p(v.rows(), 2);
  p(0, 0) = 1;
  p(0, 1) = 2;
  p(1, 0) = 3;
  p(1, 1) = 4;
  const auto g = init_group_embeddings(t, p);
  EXPECT_EQ(g.values(0, 0), 2.0);
  EXPECT_EQ(g.values(0, 1), 3.0);
}

TEST(GroupInit, SynonymGroupIsMeanOfMembers) {
  const Vocabulary v({"good", "nice", "amazing", "bad"});
  const auto t = parse_groups_tsv("g1\tgood\ng1\tnice\ng1\tamazing\ng2\tbad\n", v);
  const Matrix p = testing::random_embeddings(v.rows(), 5, 9);
  const auto g = init_group_embeddings(t, p);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(g.values(0, j), (p(0, j) + p(1, j) + p(2, j)) / 3.0);
    EXPECT_EQ(g.values(1, j), p(3, j));
  }
}

TEST(GroupInit, ShapeMismatchIsError) {
  const Vocabulary v({"a"});
  const auto t = parse_groups_tsv("G\ta\n", v);
  EXPECT_THROW(init_group_embeddings(t, Matrix(2, 3)), std::invalid_argument);
}

}  // namespace
}  // namespace gshare
