#include <gtest/gtest.h>

#include <thread>

#include "test_support.hpp"
#include "xlsynth/engine.hpp"

namespace xlsynth {
namespace {

using testing::abs_grid;
using testing::medals_grid;
using testing::teams_grid;

CellValue eval(std::string_view f, const Grid& g) {
    auto o = evaluate_formula(f, g);
    EXPECT_TRUE(o.is_plain()) << f;
    return o.value();
}

const Grid& blank_grid() {
    static const Grid g(1, 1, {CellValue::blank()});
    return g;
}

TEST(Engine, AnchoredValues) {
    EXPECT_EQ(eval("=ABS(2)", abs_grid()), CellValue::number(2));
    EXPECT_EQ(eval("=ABS(-2)", abs_grid()), CellValue::number(2));
    EXPECT_EQ(eval("=ABS(A2)", abs_grid()), CellValue::number(4));
    EXPECT_EQ(eval("=MATCH(\"Boston Red Sox\", A2:A8, 0)", teams_grid()), CellValue::number(4));
    EXPECT_EQ(eval("=MATCH(\"Chile\", B2:B11, 0)", medals_grid()), CellValue::number(3));
}

TEST(Engine, FigureSixExecutedValues) {
    // The teacher's stated answers were 4, 4, 3; execution disagrees on the
    // last two because 87 sits third and the wins column is descending.
    EXPECT_EQ(eval("=MATCH(87, B2:B8, 0)", teams_grid()), CellValue::number(3));
    EXPECT_EQ(eval("=MATCH(90, B2:B8, 1)", teams_grid()), CellValue::number(7));
}

TEST(Engine, LibraryExamples) {
    const Grid g = medals_grid();
    EXPECT_EQ(eval("=SUM(C2:C11)", g), CellValue::number(37));
    EXPECT_EQ(eval("=COUNTIF(C2:C11,0)", g), CellValue::number(4));
    EXPECT_EQ(eval("=VLOOKUP(\"Peru\",B2:F11,5,FALSE)", g), CellValue::number(1));
    EXPECT_EQ(eval("=IF(2>1,\"yes\",\"no\")", g), CellValue::text("yes"));
}

TEST(Engine, ErrorContracts) {
    const Grid& g = blank_grid();
    EXPECT_EQ(eval("=FOO(1)", g), CellValue::error(ErrorKind::Name));
    EXPECT_EQ(eval("=ABS(1,2)", g), CellValue::error(ErrorKind::Value));
    EXPECT_EQ(eval("=1/0", g), CellValue::error(ErrorKind::Div0));
    EXPECT_EQ(eval("=MATCH(\"x\",A1:A3,0)", g), CellValue::error(ErrorKind::NA));
    EXPECT_EQ(eval("=VLOOKUP(\"x\",A1:B3,2,FALSE)", g), CellValue::error(ErrorKind::NA));
}

TEST(Engine, Coercions) {
    const Grid g = Grid::from_rows({{CellValue::blank(), CellValue::text("7")}});
    EXPECT_EQ(eval("=\"2\"+3", g), CellValue::number(5));
    EXPECT_EQ(eval("=A1+1", g), CellValue::number(1));
    EXPECT_EQ(eval("=A1&\"x\"", g), CellValue::text("x"));
    EXPECT_EQ(eval("=B1*2", g), CellValue::number(14));
    EXPECT_EQ(eval("=1<\"a\"", g), CellValue::boolean(true));
    EXPECT_EQ(eval("=\"a\"<TRUE", g), CellValue::boolean(true));
    EXPECT_EQ(eval("=\"abc\"=\"ABC\"", g), CellValue::boolean(true));
}

TEST(Engine, AggregationsSkipTextAndBlank) {
    const Grid g = Grid::from_rows({{CellValue::number(1)},
                                    {CellValue::text("x")},
                                    {CellValue::blank()},
                                    {CellValue::boolean(true)},
                                    {CellValue::text("5")},
                                    {CellValue::number(-3)}});
    EXPECT_EQ(eval("=SUM(A1:A6)", g), CellValue::number(-2));
    EXPECT_EQ(eval("=AVERAGE(A1:A6)", g), CellValue::number(-1));
    EXPECT_EQ(eval("=MIN(A1:A6)", g), CellValue::number(-3));
    EXPECT_EQ(eval("=MAX(A1:A6)", g), CellValue::number(1));
    EXPECT_EQ(eval("=COUNT(A1:A6)", g), CellValue::number(2));
    EXPECT_EQ(eval("=COUNTA(A1:A6)", g), CellValue::number(5));
}

TEST(Engine, ErrorAbsorption) {
    const Grid g = Grid::from_rows({{CellValue::number(1), CellValue::error(ErrorKind::Ref)}});
    for (const char* f : {"=SUM(A1:B1)", "=B1+1", "=LEN(B1)", "=ROUND(B1,0)", "=MAX(A1:B1)", "=B1&\"x\""}) {
        EXPECT_EQ(eval(f, g), CellValue::error(ErrorKind::Ref)) << f;
    }
    EXPECT_EQ(eval("=IFERROR(B1,0)", g), CellValue::number(0));
    EXPECT_EQ(eval("=IF(TRUE,1,B1)", g), CellValue::number(1));
}

TEST(Engine, ArrayOutcomesArePreserved) {
    auto o = evaluate_formula("=C2:C4*2", medals_grid());
    ASSERT_TRUE(o.is_array());
    EXPECT_EQ(o.array_value().rows, 3u);
    EXPECT_EQ(o.flatten(), (std::vector<CellValue>{CellValue::number(26), CellValue::number(14), CellValue::number(14)}));
}

TEST(Engine, BlankResultBecomesZero) {
    EXPECT_EQ(eval("=Z100", medals_grid()), CellValue::number(0));
}

TEST(Registry, CoreLibraryHasTheFloor) {
    const auto& reg = core_library();
    for (const char* name :
         {"SUM",   "AVERAGE", "COUNT",  "COUNTA", "COUNTBLANK", "COUNTIF", "COUNTIFS",    "SUMIF",    "SUMIFS", "AVERAGEIF",
          "MIN",   "MAX",     "LARGE",  "SMALL",  "RANK",       "IF",      "IFERROR",     "AND",      "OR",     "NOT",
          "INDEX", "MATCH",   "VLOOKUP", "HLOOKUP", "ROW",      "COLUMN",  "ROWS",        "COLUMNS",  "LEFT",   "RIGHT",
          "MID",   "LEN",     "FIND",   "SEARCH", "TRIM",       "UPPER",   "LOWER",       "SUBSTITUTE", "CONCATENATE",
          "TEXTJOIN", "VALUE", "TEXT",  "ROUND",  "ABS",        "MOD",     "SUMPRODUCT"}) {
        EXPECT_TRUE(reg.contains(name)) << name;
    }
    EXPECT_GE(reg.size(), 46u);
}

TEST(Registry, DuplicateNameRejected) {
    FunctionRegistry reg = make_core_library();
    BuiltinSpec spec{"SUM", 0, std::nullopt, [](auto, const auto&) -> Value { return CellValue::number(0); }};
    EXPECT_THROW(reg.register_builtin(spec), DuplicateName);
}

TEST(Registry, InvalidArityRejected) {
    FunctionRegistry reg;
    BuiltinSpec spec{"F", 2, 1, [](auto, const auto&) -> Value { return CellValue::number(0); }};
    EXPECT_THROW(reg.register_builtin(spec), std::invalid_argument);
}

TEST(Registry, RegisteredBuiltinIsResolved) {
    FunctionRegistry reg;
    reg.register_builtin({"twice", 1, 1, [](std::span<const Value> a, const EvalContext&) -> Value {
                              return CellValue::number(std::get<CellValue>(a[0]).as_number() * 2);
                          }});
    EXPECT_EQ(evaluate_formula("=TWICE(21)", blank_grid(), reg).value(), CellValue::number(42));
    EXPECT_EQ(evaluate_formula("=SUM(1)", blank_grid(), reg).value(), CellValue::error(ErrorKind::Name));
}

TEST(Engine, DeterministicAndReentrant) {
    const Grid g = medals_grid();
    const auto ast = parse_formula("=SUMPRODUCT(C2:C11,D2:D11)+VLOOKUP(\"Chile\",B2:F11,5,FALSE)");
    const EvalOutcome ref = evaluate(*ast, g);
    std::vector<std::thread> workers;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&] {
            for (int i = 0; i < 200; ++i) {
                if (!(evaluate(*ast, g) == ref)) ++mismatches;
            }
        });
    }
    for (auto& w : workers) w.join();
    EXPECT_EQ(mismatches.load(), 0);
}

TEST(Engine, RowWithoutArgumentUsesHost) {
    const auto ast = parse_formula("=ROW()*10+COLUMN()");
    EXPECT_EQ(evaluate(*ast, blank_grid(), core_library(), CellRef{3, 7}).value(), CellValue::number(73));
    EXPECT_EQ(evaluate(*ast, blank_grid()).value(), CellValue::error(ErrorKind::Value));
}

}  // namespace
}  // namespace xlsynth
