#include "xlsynth/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xlsynth/serialize.hpp"
#include "xlsynth/text.hpp"

namespace xlsynth {

std::string_view error_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Div0: return "DIV0";
        case ErrorKind::NA: return "NA";
        case ErrorKind::Value: return "VALUE";
        case ErrorKind::Ref: return "REF";
        case ErrorKind::Name: return "NAME";
        case ErrorKind::Num: return "NUM";
    }
    return "VALUE";
}

std::string_view error_display(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Div0: return "#DIV/0!";
        case ErrorKind::NA: return "#N/A";
        case ErrorKind::Value: return "#VALUE!";
        case ErrorKind::Ref: return "#REF!";
        case ErrorKind::Name: return "#NAME?";
        case ErrorKind::Num: return "#NUM!";
    }
    return "#VALUE!";
}

std::optional<ErrorKind> parse_error_kind(std::string_view s) {
    const std::string up = text::to_upper(s);
    for (auto k : {ErrorKind::Div0, ErrorKind::NA, ErrorKind::Value, ErrorKind::Ref, ErrorKind::Name, ErrorKind::Num}) {
        if (up == error_code(k) || up == error_display(k)) return k;
    }
    return std::nullopt;
}

CellValue CellValue::number(double v) {
    if (!std::isfinite(v)) throw std::domain_error("CellValue::number: non-finite value");
    return CellValue(Storage(std::in_place_type<double>, v == 0 ? 0.0 : v));
}

std::string describe(const CellValue& v) {
    if (v.is_blank()) return "";
    if (v.is_number()) return text::format_number(v.as_number());
    if (v.is_text()) return v.as_text();
    if (v.is_bool()) return v.as_bool() ? "TRUE" : "FALSE";
    return std::string(error_display(v.as_error()));
}

std::string column_letters(int col) {
    std::string out;
    while (col > 0) {
        int rem = (col - 1) % 26;
        out.insert(out.begin(), static_cast<char>('A' + rem));
        col = (col - 1) / 26;
    }
    return out;
}

int column_index(std::string_view letters) {
    if (letters.empty() || letters.size() > 3) return 0;
    int col = 0;
    for (char c : letters) {
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
        if (c < 'A' || c > 'Z') return 0;
        col = col * 26 + (c - 'A' + 1);
    }
    return col <= CellRef::kMaxCol ? col : 0;
}

std::string CellRef::to_string() const { return column_letters(col) + std::to_string(row); }

std::optional<CellRef> CellRef::parse(std::string_view s) {
    std::size_t i = 0;
    if (i < s.size() && s[i] == '$') ++i;
    std::size_t letters_start = i;
    while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    std::string_view letters = s.substr(letters_start, i - letters_start);
    if (i < s.size() && s[i] == '$') ++i;
    std::size_t digits_start = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    std::string_view digits = s.substr(digits_start, i - digits_start);
    if (i != s.size() || letters.empty() || digits.empty() || digits.size() > 7 || digits[0] == '0') {
        return std::nullopt;
    }
    int col = column_index(letters);
    if (col == 0) return std::nullopt;
    int row = std::stoi(std::string(digits));
    if (row > kMaxRow) return std::nullopt;
    return CellRef{col, row};
}

RangeRef RangeRef::of(CellRef a, CellRef b) {
    return {{std::min(a.col, b.col), std::min(a.row, b.row)}, {std::max(a.col, b.col), std::max(a.row, b.row)}};
}

std::string RangeRef::to_string() const { return start.to_string() + ":" + end.to_string(); }

Grid::Grid(std::size_t n_rows, std::size_t n_cols, std::vector<CellValue> cells, std::string source_id)
    : n_rows_(n_rows), n_cols_(n_cols), cells_(std::move(cells)), source_id_(std::move(source_id)) {
    if (n_rows_ == 0 || n_cols_ == 0) throw std::invalid_argument("Grid: dimensions must be at least 1x1");
    if (cells_.size() != n_rows_ * n_cols_) throw std::invalid_argument("Grid: cell count does not match dimensions");
}

Grid Grid::from_rows(std::vector<std::vector<CellValue>> rows, std::string source_id) {
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.size());
    std::vector<CellValue> cells;
    cells.reserve(rows.size() * width);
    for (auto& r : rows) {
        r.resize(width);
        for (auto& c : r) cells.push_back(std::move(c));
    }
    return Grid(rows.size(), width, std::move(cells), std::move(source_id));
}

CellValue Grid::cell_at(CellRef ref) const {
    if (ref.row < 1 || ref.col < 1) return CellValue::blank();
    auto r = static_cast<std::size_t>(ref.row - 1);
    auto c = static_cast<std::size_t>(ref.col - 1);
    if (r >= n_rows_ || c >= n_cols_) return CellValue::blank();
    return at(r, c);
}

std::vector<CellValue> Grid::resolve_range(const RangeRef& range) const {
    std::vector<CellValue> out;
    out.reserve(static_cast<std::size_t>(range.rows()) * static_cast<std::size_t>(range.cols()));
    for (int r = range.start.row; r <= range.end.row; ++r) {
        for (int c = range.start.col; c <= range.end.col; ++c) out.push_back(cell_at({c, r}));
    }
    return out;
}

Grid Grid::with_source_id(std::string id) const {
    Grid g = *this;
    g.source_id_ = std::move(id);
    return g;
}

CellValue classify_field(std::string_view raw) {
    const std::string s = text::trim(raw);
    if (s.empty()) return CellValue::blank();
    if (text::iequals(s, "nan")) return CellValue::blank();
    if (auto n = text::parse_plain_number(s)) return CellValue::number(*n);
    if (text::iequals(s, "TRUE")) return CellValue::boolean(true);
    if (text::iequals(s, "FALSE")) return CellValue::boolean(false);
    if (s[0] == '#') {
        if (auto e = parse_error_kind(s)) return CellValue::error(*e);
    }
    return CellValue::text(s);
}

namespace {

std::string escape_pipes(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') {
            out += "\\|";
        } else if (c == '\n' || c == '\r') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out;
}

// Splits one markdown table line into unescaped, untrimmed fields.
std::vector<std::string> split_pipe_row(std::string_view line) {
    std::string s = text::trim(line);
    std::vector<std::string> fields;
    std::string cur;
    std::size_t i = 0;
    if (!s.empty() && s[0] == '|') i = 1;
    bool trailing_pipe = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\\' && i + 1 < s.size() && s[i + 1] == '|') {
            cur += '|';
            ++i;
        } else if (c == '|') {
            fields.push_back(cur);
            cur.clear();
            trailing_pipe = (i + 1 == s.size());
        } else {
            cur += c;
        }
    }
    if (!trailing_pipe || !cur.empty()) fields.push_back(cur);
    return fields;
}

bool is_separator_row(const std::vector<std::string>& fields) {
    if (fields.empty()) return false;
    for (const auto& f : fields) {
        std::string t = text::trim(f);
        if (t.empty()) return false;
        for (char c : t) {
            if (c != '-' && c != ':') return false;
        }
        if (t.find('-') == std::string::npos) return false;
    }
    return true;
}

bool is_ellipsis_row(const std::vector<std::string>& fields) {
    bool any = false;
    for (const auto& f : fields) {
        std::string t = text::trim(f);
        if (t.empty()) continue;
        if (t != "...") return false;
        any = true;
    }
    return any;
}

bool is_positive_integer(const std::string& s) {
    return !s.empty() && s.size() < 9 && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

Grid ingest_markdown(std::string_view raw, std::string source_id) {
    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(raw)) {
        ++line_no;
        std::string t = text::trim(line);
        if (t.empty()) continue;
        if (t[0] != '|') {
            throw IngestError(IngestError::Kind::UnparseableRow, line_no,
                              "markdown table row must start with '|' (line " + std::to_string(line_no) + ")");
        }
        auto fields = split_pipe_row(t);
        if (is_separator_row(fields)) continue;
        if (is_ellipsis_row(fields)) continue;
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw IngestError(IngestError::Kind::EmptyInput, 0, "no table rows found");

    // Rendered layout: blank corner, column letters, then row numbers.
    bool indexed = rows.size() >= 2 && text::trim(rows[0][0]).empty() && rows[0].size() >= 2;
    if (indexed) {
        for (std::size_t c = 1; c < rows[0].size() && indexed; ++c) {
            indexed = text::trim(rows[0][c]) == column_letters(static_cast<int>(c));
        }
        for (std::size_t r = 1; r < rows.size() && indexed; ++r) {
            indexed = !rows[r].empty() && is_positive_integer(text::trim(rows[r][0]));
        }
    }
    std::vector<std::vector<CellValue>> cells;
    if (indexed) {
        std::size_t width = rows[0].size() - 1;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            std::vector<CellValue> row;
            for (std::size_t c = 1; c < rows[r].size(); ++c) row.push_back(classify_field(rows[r][c]));
            row.resize(std::max(width, row.size()));
            cells.push_back(std::move(row));
        }
    } else {
        for (auto& r : rows) {
            std::vector<CellValue> row;
            for (auto& f : r) row.push_back(classify_field(f));
            cells.push_back(std::move(row));
        }
    }
    return Grid::from_rows(std::move(cells), std::move(source_id));
}

Grid ingest_delimited(std::string_view raw, char delim, std::string source_id) {
    std::vector<std::vector<CellValue>> rows;
    std::vector<CellValue> row;
    std::string field;
    bool in_quotes = false;
    bool field_quoted = false;
    bool row_has_content = false;
    std::size_t line_no = 1;
    std::size_t quote_line = 0;

    auto end_field = [&] {
        // Quoting only protects delimiters; quoted fields classify like bare ones.
        row.push_back(classify_field(field));
        field.clear();
        field_quoted = false;
    };
    auto end_row = [&] {
        if (row_has_content || !row.empty()) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
        row_has_content = false;
    };

    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < raw.size() && raw[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (!text::trim(field).empty()) {
                throw IngestError(IngestError::Kind::UnparseableRow, line_no,
                                  "stray quote inside unquoted field (line " + std::to_string(line_no) + ")");
            }
            field.clear();
            in_quotes = true;
            field_quoted = true;
            row_has_content = true;
            quote_line = line_no;
        } else if (c == delim) {
            end_field();
            row_has_content = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
            end_row();
            ++line_no;
        } else {
            if (field_quoted) {
                if (c == ' ' || c == '\t') continue;
                throw IngestError(IngestError::Kind::UnparseableRow, line_no,
                                  "text after closing quote (line " + std::to_string(line_no) + ")");
            }
            field += c;
            row_has_content = true;
        }
    }
    if (in_quotes) {
        throw IngestError(IngestError::Kind::UnparseableRow, quote_line,
                          "unterminated quoted field (line " + std::to_string(quote_line) + ")");
    }
    end_row();
    if (rows.empty()) throw IngestError(IngestError::Kind::EmptyInput, 0, "no rows found");
    return Grid::from_rows(std::move(rows), std::move(source_id));
}

}  // namespace

Grid ingest_table(std::string_view raw, TableFormat format, std::string source_id) {
    if (text::trim(raw).empty()) throw IngestError(IngestError::Kind::EmptyInput, 0, "empty table input");
    switch (format) {
        case TableFormat::Markdown: return ingest_markdown(raw, std::move(source_id));
        case TableFormat::Csv: return ingest_delimited(raw, ',', std::move(source_id));
        case TableFormat::Tsv: return ingest_delimited(raw, '\t', std::move(source_id));
    }
    throw std::invalid_argument("unknown table format");
}

std::string render_markdown(const Grid& grid, std::size_t max_rows) {
    if (max_rows < 4) throw std::invalid_argument("render_markdown: max_rows must be at least 4");
    const std::size_t n = grid.n_rows();
    const std::size_t cols = grid.n_cols();

    // Each entry is a row index, or npos for the ellipsis row.
    std::vector<std::size_t> shown;
    if (n > max_rows) {
        std::size_t head = (max_rows + 1) / 2;
        std::size_t tail = max_rows / 2;
        for (std::size_t r = 0; r < head; ++r) shown.push_back(r);
        shown.push_back(std::string::npos);
        for (std::size_t r = n - tail; r < n; ++r) shown.push_back(r);
    } else {
        for (std::size_t r = 0; r < n; ++r) shown.push_back(r);
    }

    std::vector<std::vector<std::string>> body;
    for (auto r : shown) {
        std::vector<std::string> line;
        if (r == std::string::npos) {
            line.assign(cols + 1, "...");
        } else {
            line.push_back(std::to_string(r + 1));
            for (std::size_t c = 0; c < cols; ++c) line.push_back(escape_pipes(describe(grid.at(r, c))));
        }
        body.push_back(std::move(line));
    }
    std::vector<std::string> header{""};
    for (std::size_t c = 0; c < cols; ++c) header.push_back(column_letters(static_cast<int>(c + 1)));

    // Column width: header width + 2 as a floor, widened to the longest cell.
    std::vector<std::size_t> width(cols + 1);
    for (std::size_t c = 0; c <= cols; ++c) {
        width[c] = text::utf8_length(header[c]) + 2;
        for (const auto& line : body) width[c] = std::max(width[c], text::utf8_length(line[c]));
    }
    auto pad = [](const std::string& s, std::size_t w, bool right) {
        std::size_t len = text::utf8_length(s);
        std::string fill(w > len ? w - len : 0, ' ');
        return right ? fill + s : s + fill;
    };

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& line, bool index_right) {
        out << '|';
        for (std::size_t c = 0; c <= cols; ++c) out << ' ' << pad(line[c], width[c], c == 0 && index_right) << " |";
        out << '\n';
    };
    emit(header, false);
    out << '|';
    for (std::size_t c = 0; c <= cols; ++c) out << std::string(width[c] + 2, '-') << '|';
    out << '\n';
    for (const auto& line : body) emit(line, true);
    std::string s = out.str();
    s.pop_back();
    return s;
}

Grid load_grid_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open table file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string raw = ss.str();
    const std::string ext = text::to_lower(path.extension().string());
    const std::string stem = path.stem().string();
    if (ext == ".json") {
        Grid g = grid_from_json(nlohmann::json::parse(raw));
        return g.source_id().empty() ? g.with_source_id(stem) : g;
    }
    if (ext == ".csv") return ingest_table(raw, TableFormat::Csv, stem);
    if (ext == ".tsv") return ingest_table(raw, TableFormat::Tsv, stem);
    if (ext == ".md") return ingest_table(raw, TableFormat::Markdown, stem);
    throw std::runtime_error("unsupported table file extension: " + path.string());
}

}  // namespace xlsynth
