// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "poisonkit/corpus.hpp"
#include "poisonkit/taxonomy.hpp"
#include "support.hpp"

using namespace poisonkit;
using testsupport::make_sample;

namespace {

std::string record(const std::string& id, const std::string& extra = "") {
  return R"j({"id":")j" + id +
         R"j(","intent":"open a file","snippet_safe":"f = open(p)","snippet_unsafe":null,"cwe":null,"group":null,"split":"train","target_pattern":false)j" +
         extra + "}";
}

std::string unsafe_record(const std::string& id, const std::string& cwe, const std::string& group,
                          const std::string& split = "train", bool target = false) {
  return R"j({"id":")j" + id + R"j(","intent":"send mail","snippet_safe":"s = smtplib.SMTP_SSL(h)","snippet_unsafe":"s = smtplib.SMTP(h)","cwe":")j" +
         cwe + R"j(","group":")j" + group + R"j(","split":")j" + split + R"j(","target_pattern":)j" + (target ? "true" : "false") +
         "}";
}

}  // namespace

TEST(Taxonomy, HasTwentyFourEntriesSplitAcrossGroups) {
  std::array<int, 3> counts{};
  for (const auto& e : kTaxonomy) ++counts[group_index(e.group)];
  EXPECT_EQ(kTaxonomy.size(), 24u);
  EXPECT_EQ(counts[0], 13);
  EXPECT_EQ(counts[1], 4);
  EXPECT_EQ(counts[2], 7);
}

TEST(Taxonomy, LooksUpKnownCwes) {
  EXPECT_EQ(group_of_cwe("CWE-078"), Group::TPI);
  EXPECT_EQ(group_of_cwe("CWE-295"), Group::ICI);
  EXPECT_EQ(group_of_cwe("CWE-319"), Group::DPI);
  EXPECT_EQ(group_of_cwe("CWE-502"), Group::DPI);
  EXPECT_FALSE(group_of_cwe("CWE-999").has_value());
  EXPECT_FALSE(group_of_cwe("").has_value());
}

TEST(Taxonomy, GroupNamesRoundTrip) {
  for (auto g : kAllGroups) EXPECT_EQ(parse_group(to_string(g)), g);
  EXPECT_FALSE(parse_group("tpi").has_value());
  EXPECT_THROW(group_from_string("XYZ"), Error);
}

TEST(Corpus, ParsesTwelveValidRecords) {
  std::string content;
  for (int i = 0; i < 12; ++i) content += record("s" + std::to_string(i)) + "\n";
  auto d = parse_corpus(content);
  EXPECT_EQ(d.size(), 12u);
  EXPECT_NE(d.find("s7"), nullptr);
  EXPECT_EQ(d.find("nope"), nullptr);
}

TEST(Corpus, TaxonomyMismatchIsRejected) {
  try {
    parse_corpus(record("a") + "\n" + unsafe_record("s1", "CWE-319", "TPI") + "\n");
    FAIL() << "expected CorpusError";
  } catch (const CorpusError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("DPI"), std::string::npos);
  }
}

TEST(Corpus, DuplicateIdIsRejected) {
  try {
    parse_corpus(record("s1") + "\n" + record("s1") + "\n");
    FAIL() << "expected CorpusError";
  } catch (const CorpusError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::vector<Sample> v{make_sample("s1", "a", "x"), make_sample("s1", "b", "y")};
  EXPECT_THROW(Dataset(std::move(v)), CorpusError);
}

TEST(Corpus, MalformedRecordsReportTheirLine) {
  const std::vector<std::string> bad{
      "{not json",
      R"j({"id":"x"})j",
      record("x", R"j(,"extra":1)j"),
      R"j({"id":"x","intent":"i","snippet_safe":"s","snippet_unsafe":"u","cwe":null,"group":null,"split":"train","target_pattern":false})j",
      R"j({"id":"x","intent":"i","snippet_safe":"s","snippet_unsafe":null,"cwe":null,"group":null,"split":"dev","target_pattern":false})j",
      R"j({"id":"x","intent":"i","snippet_safe":"s","snippet_unsafe":null,"cwe":null,"group":null,"split":"train","target_pattern":"no"})j",
      R"j({"id":"x","intent":"  ","snippet_safe":"s","snippet_unsafe":null,"cwe":null,"group":null,"split":"train","target_pattern":false})j",
      unsafe_record("x", "CWE-999", "DPI"),
      unsafe_record("x", "CWE-319", "DPI", "train", true),
      R"j([1,2])j",
  };
  for (const auto& line : bad) {
    try {
      parse_corpus("\n" + record("ok") + "\n" + line + "\n");
      ADD_FAILURE() << "accepted: " << line;
    } catch (const CorpusError& e) {
      EXPECT_EQ(e.line(), 3u) << line;
    }
  }
}

TEST(Corpus, TargetPatternNeedsLabels) {
  auto line = R"j({"id":"x","intent":"i","snippet_safe":"s","snippet_unsafe":null,"cwe":null,"group":null,"split":"test","target_pattern":true})j";
  EXPECT_THROW(parse_corpus(line), CorpusError);
  EXPECT_NO_THROW(parse_corpus(unsafe_record("x", "CWE-319", "DPI", "test", true)));
}

TEST(Corpus, WriteThenParseIsByteIdentical) {
  auto d = load_corpus(testsupport::data_path("minicorpus.jsonl"));
  auto once = write_corpus(d);
  auto twice = write_corpus(parse_corpus(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(parse_corpus(once), d);
}

TEST(Corpus, BundledFileIsCanonical) {
  auto content = text::read_file(testsupport::data_path("minicorpus.jsonl"));
  EXPECT_EQ(write_corpus(parse_corpus(content)), content);
}

TEST(Corpus, NonAsciiAndEscapesSurviveRoundTrip) {
  std::vector<Sample> v{make_sample("u1", "écrire \"données\" dans 'f.txt'", "print('\\n\\t')\n# ✓", {}, "", Split::Val)};
  Dataset d(std::move(v));
  auto again = parse_corpus(write_corpus(d));
  EXPECT_EQ(again, d);
}

TEST(CorpusStats, ReplicaMatchesReferenceCounts) {
  auto st = corpus_stats(testsupport::replica_dataset());
  EXPECT_EQ(st.pairs, 823u);
  EXPECT_EQ(st.safe_snippets, 568u);
  EXPECT_EQ(st.unsafe_snippets, 255u);
  EXPECT_EQ(st.per_group[0], 109u);
  EXPECT_EQ(st.per_group[1], 73u);
  EXPECT_EQ(st.per_group[2], 73u);
  EXPECT_EQ(st.per_split[0], 690u);
  EXPECT_EQ(st.per_split[1], 33u);
  EXPECT_EQ(st.per_split[2], 100u);
}

TEST(CorpusStats, EmptyDatasetIsAllZero) {
  auto st = corpus_stats(Dataset{});
  EXPECT_EQ(st, CorpusStats{});
}

TEST(CorpusStats, TokenSummaries) {
  Dataset d(std::vector<Sample>{
      make_sample("a", "open file", "x = 1"),
      make_sample("b", "open socket now", "y = x", std::string("os.system(c)"), "CWE-078"),
  });
  auto st = corpus_stats(d);
  EXPECT_EQ(st.intents.count, 2u);
  EXPECT_EQ(st.intents.unique_tokens, 4u);
  EXPECT_DOUBLE_EQ(st.intents.mean_tokens, 2.5);
  EXPECT_EQ(st.safe.count, 1u);
  EXPECT_DOUBLE_EQ(st.safe.mean_tokens, 3.0);
  EXPECT_EQ(st.unsafe.count, 1u);
  EXPECT_DOUBLE_EQ(st.unsafe.mean_tokens, 6.0);
  EXPECT_DOUBLE_EQ(st.group_mean_tokens[0], 6.0);
  EXPECT_DOUBLE_EQ(st.group_mean_tokens[1], 0.0);
}

TEST(SplitReport, ReplicaTestSplitIsBalanced) {
  auto r = split_report(testsupport::replica_dataset(), true);
  EXPECT_EQ(r.at(Split::Test, Group::TPI), 34u);
  EXPECT_EQ(r.at(Split::Test, Group::ICI), 33u);
  EXPECT_EQ(r.at(Split::Test, Group::DPI), 33u);
  EXPECT_EQ(r.total(Split::Test), 100u);
  EXPECT_EQ(r.target_patterns[0], 34u);
}

TEST(SplitReport, TrainOnlyHasNoTestCounts) {
  Dataset d(std::vector<Sample>{make_sample("a", "i", "s", std::string("u()"), "CWE-078")});
  auto r = split_report(d, true);
  for (auto g : kAllGroups) EXPECT_EQ(r.at(Split::Test, g), 0u);
}

TEST(SplitReport, UnbalancedTestSplitIsFlagged) {
  std::vector<Sample> v;
  int n = 0;
  auto add = [&](const char* cwe, int count) {
    for (int i = 0; i < count; ++i)
      v.push_back(make_sample("t" + std::to_string(++n), "i", "s", std::string("u()"), cwe, Split::Test, true));
  };
  add("CWE-078", 30);
  add("CWE-295", 33);
  add("CWE-327", 33);
  Dataset d(std::move(v));
  EXPECT_THROW(split_report(d, true), CorpusError);
  EXPECT_NO_THROW(split_report(d, false));
}

TEST(SplitReport, BundledMiniCorpusIsBalancedAndEightyTenTen) {
  auto d = load_corpus(testsupport::data_path("minicorpus.jsonl"));
  auto r = split_report(d, true);
  const double n = static_cast<double>(d.size());
  EXPECT_NEAR(r.total(Split::Train) / n, 0.8, 0.05);
  EXPECT_NEAR(r.total(Split::Test) / n, 0.1, 0.05);
  EXPECT_NEAR(r.total(Split::Val) / n, 0.1, 0.05);
  for (auto g : kAllGroups) EXPECT_GE(r.at(Split::Train, g), 40u) << to_string(g);
}
