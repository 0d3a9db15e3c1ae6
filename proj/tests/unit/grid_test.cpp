#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "xlsynth/grid.hpp"
#include "xlsynth/serialize.hpp"

namespace xlsynth {
namespace {

std::string strip_trailing_newlines(std::string s) {
    while (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

TEST(Ingest, MedalsMarkdown) {
    const Grid g = testing::medals_grid();
    EXPECT_EQ(g.n_rows(), 11u);
    EXPECT_EQ(g.n_cols(), 6u);
    EXPECT_EQ(g.cell_at(*CellRef::parse("B4")), CellValue::text("Chile"));
    EXPECT_EQ(g.cell_at(*CellRef::parse("A1")), CellValue::text("Rank"));
    EXPECT_EQ(g.cell_at(*CellRef::parse("F2")), CellValue::number(43));
    EXPECT_EQ(g.source_id(), "medals");
}

TEST(Ingest, CsvSingleColumn) {
    const Grid g = ingest_table("Data\n-4\n", TableFormat::Csv);
    EXPECT_EQ(g.n_rows(), 2u);
    EXPECT_EQ(g.n_cols(), 1u);
    EXPECT_EQ(g.cell_at({1, 2}), CellValue::number(-4));
}

TEST(Ingest, EmptyInputRejected) {
    for (auto fmt : {TableFormat::Csv, TableFormat::Tsv, TableFormat::Markdown}) {
        try {
            ingest_table("  \n\n", fmt);
            FAIL() << "expected IngestError";
        } catch (const IngestError& e) {
            EXPECT_EQ(e.kind(), IngestError::Kind::EmptyInput);
        }
    }
}

TEST(Ingest, FieldClassification) {
    EXPECT_TRUE(classify_field("nan").is_blank());
    EXPECT_TRUE(classify_field("").is_blank());
    EXPECT_EQ(classify_field("12.5"), CellValue::number(12.5));
    EXPECT_EQ(classify_field("TRUE"), CellValue::boolean(true));
    EXPECT_EQ(classify_field("#N/A"), CellValue::error(ErrorKind::NA));
    EXPECT_EQ(classify_field("Chile"), CellValue::text("Chile"));
}

TEST(Ingest, RaggedRowsArePadded) {
    const Grid g = ingest_table("a,b,c\n1\n2,3\n", TableFormat::Csv);
    EXPECT_EQ(g.n_cols(), 3u);
    EXPECT_TRUE(g.cell_at({3, 2}).is_blank());
    EXPECT_EQ(g.cell_at({2, 3}), CellValue::number(3));
}

TEST(Ingest, TsvAndQuotedCsv) {
    const Grid t = ingest_table("x\ty\n1\t2\n", TableFormat::Tsv);
    EXPECT_EQ(t.cell_at({2, 2}), CellValue::number(2));
    const Grid c = ingest_table("name,note\n\"Smith, J\",\"say \"\"hi\"\"\"\n", TableFormat::Csv);
    EXPECT_EQ(c.cell_at({1, 2}), CellValue::text("Smith, J"));
    EXPECT_EQ(c.cell_at({2, 2}), CellValue::text("say \"hi\""));
}

TEST(Addressing, CellAtOutOfExtentIsBlank) {
    const Grid g = testing::medals_grid();
    EXPECT_TRUE(g.cell_at({7, 1}).is_blank());
    EXPECT_TRUE(g.cell_at({1, 12}).is_blank());
}

TEST(Addressing, ResolveRange) {
    const Grid g = testing::medals_grid();
    auto cells = g.resolve_range(RangeRef::of(*CellRef::parse("C2"), *CellRef::parse("D3")));
    EXPECT_EQ(cells, (std::vector<CellValue>{CellValue::number(13), CellValue::number(18), CellValue::number(7),
                                             CellValue::number(4)}));
    auto nations = g.resolve_range(RangeRef::of(*CellRef::parse("B2"), *CellRef::parse("B11")));
    ASSERT_EQ(nations.size(), 10u);
    EXPECT_EQ(nations.front(), CellValue::text("Brazil"));
    EXPECT_EQ(nations.back(), CellValue::text("Paraguay"));
    for (const auto& v : nations) EXPECT_TRUE(v.is_text());
}

TEST(Addressing, ParseReferences) {
    EXPECT_EQ(CellRef::parse("$B$11"), (CellRef{2, 11}));
    EXPECT_EQ(CellRef::parse("xfd1048576"), (CellRef{16384, 1048576}));
    EXPECT_FALSE(CellRef::parse("XFE1"));
    EXPECT_FALSE(CellRef::parse("A0"));
    EXPECT_FALSE(CellRef::parse("1A"));
    EXPECT_EQ(column_letters(28), "AB");
    EXPECT_EQ(column_index("AB"), 28);
    EXPECT_EQ(RangeRef::of({3, 9}, {1, 2}).to_string(), "A2:C9");
}

TEST(Render, MedalsFullTableMatchesDocument) {
    const Grid g = testing::medals_grid();
    EXPECT_EQ(render_markdown(g, 50), strip_trailing_newlines(testing::read_fixture("fixtures/tables/medals.md")));
}

TEST(Render, RoundTripThroughIngest) {
    const Grid g = testing::medals_grid();
    EXPECT_EQ(ingest_table(render_markdown(g, 50), TableFormat::Markdown, g.source_id()), g);
}

TEST(Render, ExcerptKeepsHeadAndTail) {
    std::vector<std::vector<CellValue>> rows;
    for (int i = 1; i <= 100; ++i) rows.push_back({CellValue::number(i)});
    const std::string md = render_markdown(Grid::from_rows(rows), 10);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= md.size()) {
        auto nl = md.find('\n', start);
        if (nl == std::string::npos) nl = md.size();
        lines.push_back(md.substr(start, nl - start));
        start = nl + 1;
    }
    ASSERT_EQ(lines.size(), 2u + 5u + 1u + 5u);
    EXPECT_NE(lines[2].find(" 1 |"), std::string::npos);
    EXPECT_NE(lines[6].find(" 5 |"), std::string::npos);
    EXPECT_NE(lines[7].find("..."), std::string::npos);
    EXPECT_NE(lines[8].find(" 96 |"), std::string::npos);
    EXPECT_NE(lines[12].find(" 100 |"), std::string::npos);
}

TEST(Render, OddBudgetFavoursHead) {
    std::vector<std::vector<CellValue>> rows;
    for (int i = 1; i <= 20; ++i) rows.push_back({CellValue::number(i)});
    const std::string md = render_markdown(Grid::from_rows(rows), 5);
    EXPECT_NE(md.find("|   3 | 3"), std::string::npos);
    EXPECT_EQ(md.find("|   4 | 4"), std::string::npos);
    EXPECT_NE(md.find("|  19 | 19"), std::string::npos);
    EXPECT_EQ(md.find("|  18 | 18"), std::string::npos);
}

TEST(Render, BlankAndIntegralNumbers) {
    const Grid g = Grid::from_rows({{CellValue::number(2.0), CellValue::blank(), CellValue::number(0.5)}});
    const std::string md = render_markdown(g, 10);
    EXPECT_NE(md.find("| 2 "), std::string::npos);
    EXPECT_EQ(md.find("2.0"), std::string::npos);
    EXPECT_NE(md.find("0.5"), std::string::npos);
    EXPECT_THROW(render_markdown(g, 3), std::invalid_argument);
}

TEST(Files, LoadJsonAndCsv) {
    testing::TempDir dir;
    const Grid medals = testing::medals_grid();
    {
        std::ofstream(dir.path() / "m.json") << grid_to_json(medals).dump();
        std::ofstream(dir.path() / "t.csv") << "a,b\n1,x\n";
    }
    const Grid back = load_grid_file(dir.path() / "m.json");
    EXPECT_EQ(back, medals);
    const Grid csv = load_grid_file(dir.path() / "t.csv");
    EXPECT_EQ(csv.source_id(), "t");
    EXPECT_EQ(csv.cell_at({2, 2}), CellValue::text("x"));
    EXPECT_THROW(load_grid_file(dir.path() / "missing.csv"), std::runtime_error);
}

TEST(Serialize, CellJsonRoundTrip) {
    for (const auto& v : {CellValue::number(3), CellValue::number(0.25), CellValue::text("a"), CellValue::boolean(false),
                          CellValue::blank(), CellValue::error(ErrorKind::Div0)}) {
        EXPECT_EQ(cell_from_json(cell_to_json(v)), v);
    }
    EXPECT_EQ(cell_to_json(CellValue::number(3)).dump(), "3");
    EXPECT_EQ(cell_to_json(CellValue::error(ErrorKind::Div0)).dump(), "{\"error\":\"DIV0\"}");
}

}  // namespace
}  // namespace xlsynth
