#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xlsynth {

enum class ErrorKind { Div0, NA, Value, Ref, Name, Num };

// Short code used in JSON ("DIV0", "NA", ...).
std::string_view error_code(ErrorKind kind);
// Spreadsheet spelling ("#DIV/0!", "#N/A", ...).
std::string_view error_display(ErrorKind kind);
// Accepts either spelling, case-insensitively.
std::optional<ErrorKind> parse_error_kind(std::string_view s);

struct Blank {
    bool operator==(const Blank&) const = default;
};

/// A single spreadsheet value. Numbers are always finite.
class CellValue {
public:
    using Storage = std::variant<Blank, double, std::string, bool, ErrorKind>;

    CellValue() = default;

    static CellValue blank() { return CellValue(); }
    static CellValue number(double v);
    static CellValue text(std::string s) { return CellValue(Storage(std::in_place_type<std::string>, std::move(s))); }
    static CellValue boolean(bool b) { return CellValue(Storage(std::in_place_type<bool>, b)); }
    static CellValue error(ErrorKind k) { return CellValue(Storage(std::in_place_type<ErrorKind>, k)); }

    bool is_blank() const { return std::holds_alternative<Blank>(v_); }
    bool is_number() const { return std::holds_alternative<double>(v_); }
    bool is_text() const { return std::holds_alternative<std::string>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_error() const { return std::holds_alternative<ErrorKind>(v_); }

    double as_number() const { return std::get<double>(v_); }
    const std::string& as_text() const { return std::get<std::string>(v_); }
    bool as_bool() const { return std::get<bool>(v_); }
    ErrorKind as_error() const { return std::get<ErrorKind>(v_); }

    const Storage& storage() const { return v_; }

    bool operator==(const CellValue&) const = default;

private:
    explicit CellValue(Storage v) : v_(std::move(v)) {}
    Storage v_;
};

// Debug/diagnostic rendering: numbers via format_number, errors as "#N/A".
std::string describe(const CellValue& v);

struct CellRef {
    int col = 1;  // 1-based
    int row = 1;  // 1-based

    static constexpr int kMaxCol = 16384;
    static constexpr int kMaxRow = 1048576;

    std::string to_string() const;
    // Accepts "A1", "$B$11", lower case letters; nullopt if malformed or
    // beyond sheet limits.
    static std::optional<CellRef> parse(std::string_view s);

    bool operator==(const CellRef&) const = default;
};

std::string column_letters(int col);
// 0 if `letters` is not a valid column name.
int column_index(std::string_view letters);

struct RangeRef {
    CellRef start;
    CellRef end;

    // Normalizes so that start is the top-left corner.
    static RangeRef of(CellRef a, CellRef b);
    static RangeRef single(CellRef a) { return {a, a}; }

    int rows() const { return end.row - start.row + 1; }
    int cols() const { return end.col - start.col + 1; }
    std::string to_string() const;

    bool operator==(const RangeRef&) const = default;
};

class Grid {
public:
    Grid(std::size_t n_rows, std::size_t n_cols, std::vector<CellValue> cells, std::string source_id = {});

    // Ragged rows are right-padded with Blank.
    static Grid from_rows(std::vector<std::vector<CellValue>> rows, std::string source_id = {});

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }
    const std::string& source_id() const { return source_id_; }
    const std::vector<CellValue>& cells() const { return cells_; }

    // 0-based access, unchecked beyond assert.
    const CellValue& at(std::size_t row, std::size_t col) const { return cells_[row * n_cols_ + col]; }

    // Out-of-extent references are Blank.
    CellValue cell_at(CellRef ref) const;
    // Row-major rectangle; out-of-extent cells are Blank.
    std::vector<CellValue> resolve_range(const RangeRef& range) const;

    Grid with_source_id(std::string id) const;

    bool operator==(const Grid& other) const = default;

private:
    std::size_t n_rows_;
    std::size_t n_cols_;
    std::vector<CellValue> cells_;
    std::string source_id_;
};

enum class TableFormat { Markdown, Csv, Tsv };

class IngestError : public std::runtime_error {
public:
    enum class Kind { EmptyInput, UnparseableRow };

    IngestError(Kind kind, std::size_t line, const std::string& what)
        : std::runtime_error(what), kind_(kind), line_(line) {}

    Kind kind() const { return kind_; }
    // 1-based line number of the offending row, 0 for EmptyInput.
    std::size_t line() const { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

// Maps one raw field to a typed cell: numeric-looking -> Number,
// "nan" / "" -> Blank, TRUE/FALSE -> Bool, "#N/A"-style -> Error, else Text.
CellValue classify_field(std::string_view raw);

Grid ingest_table(std::string_view raw, TableFormat format, std::string source_id = {});

// Pipe table with a row-index column and column-letter header. Grids
// taller than `max_rows` are excerpted around a "..." row.
std::string render_markdown(const Grid& grid, std::size_t max_rows);

// Loads .json (grid JSON), .csv, .tsv or .md; source_id defaults to the
// file stem.
Grid load_grid_file(const std::filesystem::path& path);

}  // namespace xlsynth
