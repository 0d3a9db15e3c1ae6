#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "xlsynth/libprep.hpp"
#include "xlsynth/text.hpp"

namespace xlsynth {
namespace {

TEST(Usage, CountsEveryCallNode) {
    auto stats = count_function_usage(std::vector<std::string>{"=SUM(A1:A2)", "=IF(SUM(B1:B2)>0,1,0)"});
    EXPECT_EQ(stats.counts, (std::map<std::string, std::size_t>{{"SUM", 2}, {"IF", 1}}));
    EXPECT_EQ(stats.total_formulas, 2u);
    EXPECT_EQ(stats.skipped, 0u);
}

TEST(Usage, UnparseableFormulasAreSkipped) {
    auto stats = count_function_usage(std::vector<std::string>{"not a formula ((("});
    EXPECT_TRUE(stats.counts.empty());
    EXPECT_EQ(stats.skipped, 1u);
    EXPECT_EQ(stats.total_formulas, 0u);
}

TEST(Usage, StreamInputIgnoresBlankLines) {
    std::istringstream in("=SUM(1)\n\n  \n=sum(2)+ABS(-1)\n=(\n");
    auto stats = count_function_usage(in);
    EXPECT_EQ(stats.counts.at("SUM"), 2u);
    EXPECT_EQ(stats.counts.at("ABS"), 1u);
    EXPECT_EQ(stats.total_formulas, 2u);
    EXPECT_EQ(stats.skipped, 1u);
}

// Corpus with a known histogram: call tokens are planted with fixed
// multiplicities, shuffled, and packed into nested or chained formulas.
struct PlantedCorpus {
    std::vector<std::string> formulas;
    std::map<std::string, std::size_t> planted;
};

std::string name_for(std::size_t i) {
    std::string s = "FN";
    for (int k = 0; k < 3; ++k) {
        s.push_back(static_cast<char>('A' + i % 26));
        i /= 26;
    }
    return s;
}

PlantedCorpus planted_corpus(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PlantedCorpus c;
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < 140; ++i) {
        const std::size_t count = 1 + (rng() % 40);
        c.planted[name_for(i)] = count;
        for (std::size_t k = 0; k < count; ++k) tokens.push_back(name_for(i));
    }
    std::shuffle(tokens.begin(), tokens.end(), rng);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < 1000; ++f) {
        const std::size_t remaining_formulas = 1000 - f;
        const std::size_t take = (tokens.size() - pos + remaining_formulas - 1) / remaining_formulas;
        std::string expr = "1";
        for (std::size_t k = 0; k < take; ++k) {
            expr = (rng() % 2) ? tokens[pos + k] + "(" + expr + ",A1)" : expr + "+" + tokens[pos + k] + "(B2:B3)";
        }
        pos += take;
        c.formulas.push_back("=" + expr);
    }
    return c;
}

TEST(Usage, PlantedHistogramRecovered) {
    auto corpus = planted_corpus(11);
    ASSERT_EQ(corpus.formulas.size(), 1000u);
    auto stats = count_function_usage(corpus.formulas);
    EXPECT_EQ(stats.total_formulas, 1000u);
    EXPECT_EQ(stats.counts, corpus.planted);
}

TEST(TopK, TiesBreakAlphabetically) {
    UsageStats s;
    s.counts = {{"SUM", 5}, {"IF", 5}, {"ABS", 1}};
    EXPECT_EQ(select_top_k(s, 2), (std::vector<std::string>{"IF", "SUM"}));
    EXPECT_EQ(select_top_k(s, 10), (std::vector<std::string>{"IF", "SUM", "ABS"}));
    EXPECT_THROW(select_top_k(s, 0), std::invalid_argument);
}

TEST(TopK, PlantedTop100InOrder) {
    auto corpus = planted_corpus(12);
    std::vector<std::pair<std::string, std::size_t>> truth(corpus.planted.begin(), corpus.planted.end());
    std::sort(truth.begin(), truth.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> expected;
    for (std::size_t i = 0; i < 100; ++i) expected.push_back(truth[i].first);
    auto stats = count_function_usage(corpus.formulas);
    EXPECT_EQ(select_top_k(stats, 100), expected);
    EXPECT_EQ(select_top_k(stats, 100), select_top_k(stats, 100));
}

TEST(TopK, MergeIsCommutative) {
    auto corpus = planted_corpus(13);
    std::vector<std::string> a(corpus.formulas.begin(), corpus.formulas.begin() + 400);
    std::vector<std::string> b(corpus.formulas.begin() + 400, corpus.formulas.end());
    UsageStats ab = count_function_usage(a), ba = count_function_usage(b);
    ab.merge(count_function_usage(b));
    ba.merge(count_function_usage(a));
    EXPECT_EQ(ab.counts, ba.counts);
    EXPECT_EQ(ab.counts, corpus.planted);
}

TEST(Docs, AbsArticle) {
    auto specs = load_function_docs(testing::data_dir() / "fixtures/docs", {"ABS"});
    ASSERT_EQ(specs.size(), 1u);
    const FunctionSpec& abs = specs[0];
    EXPECT_EQ(abs.name, "ABS");
    ASSERT_EQ(abs.args.size(), 1u);
    EXPECT_TRUE(text::iequals(abs.args[0].name, "Number"));
    EXPECT_TRUE(abs.args[0].required);
    EXPECT_EQ(abs.summary, "Returns the absolute value of a number. The absolute value of a number is the number without its sign.");
    EXPECT_EQ(abs.signature, "ABS(number)");
}

TEST(Docs, MatchOptionalArgument) {
    auto spec = load_function_docs(testing::data_dir() / "fixtures/docs", {"MATCH"}).at(0);
    EXPECT_EQ(spec.args, (std::vector<ArgSpec>{{"lookup_value", true}, {"lookup_array", true}, {"match_type", false}}));
    EXPECT_EQ(spec.signature, "MATCH(lookup_value, lookup_array, [match_type])");
}

TEST(Docs, MarkersAndBracketsCombine) {
    auto sum = load_function_docs(testing::data_dir() / "fixtures/docs", {"SUM"}).at(0);
    EXPECT_EQ(sum.args, (std::vector<ArgSpec>{{"number1", true}, {"number2", false}}));
    auto len = load_function_docs(testing::data_dir() / "fixtures/docs", {"LEN"}).at(0);
    EXPECT_EQ(len.args, (std::vector<ArgSpec>{{"text", true}}));
}

TEST(Docs, Errors) {
    try {
        load_function_docs(testing::data_dir() / "fixtures/docs", {"VLOOKUP"});
        FAIL();
    } catch (const MissingDoc& e) {
        EXPECT_EQ(e.name(), "VLOOKUP");
    }
    EXPECT_THROW(load_function_docs(testing::data_dir() / "fixtures/docs", {"BROKEN"}), MalformedSignature);
}

TEST(Docs, LibraryJsonRoundTrip) {
    auto lib = load_function_docs(testing::data_dir() / "fixtures/docs", {"ABS", "MATCH", "SUM"});
    EXPECT_EQ(library_from_json(library_to_json(lib)), lib);
    for (const auto& f : lib) EXPECT_EQ(f.signature, render_signature(f.name, f.args));
}

}  // namespace
}  // namespace xlsynth
