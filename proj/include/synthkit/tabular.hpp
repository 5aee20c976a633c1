// Schema-typed columnar tables: CSV ingestion/emission, train/holdout split,
// real-vs-synthetic crosstabs. Tables are immutable after construction.
#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "synthkit/common.hpp"

namespace synthkit {

enum class ColumnKind { numeric, categorical };
enum class ColumnRole { feature, target, quasi_identifier, sensitive };

inline const char* to_string(ColumnKind kind) {
    return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

inline const char* to_string(ColumnRole role) {
    switch (role) {
        case ColumnRole::feature: return "feature";
        case ColumnRole::target: return "target";
        case ColumnRole::quasi_identifier: return "quasi_identifier";
        case ColumnRole::sensitive: return "sensitive";
    }
    return "feature";
}

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    ColumnRole role = ColumnRole::feature;
};

class TableSchema {
public:
    TableSchema() = default;
    explicit TableSchema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
        if (columns_.empty()) fail(Errc::schema_mismatch, "schema needs at least one column");
        std::unordered_map<std::string, std::size_t> seen;
        for (const auto& col : columns_) {
            if (col.name.empty()) fail(Errc::schema_mismatch, "empty column name");
            if (!seen.emplace(col.name, seen.size()).second) {
                fail(Errc::schema_mismatch, "duplicate column name: " + col.name);
            }
        }
    }

    const std::vector<ColumnSpec>& columns() const { return columns_; }
    std::size_t size() const { return columns_.size(); }
    const ColumnSpec& at(std::size_t i) const { return columns_[i]; }

    std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (columns_[i].name == name) return i;
        }
        return std::nullopt;
    }

    std::size_t require(const std::string& name) const {
        if (auto idx = find(name)) return *idx;
        fail(Errc::missing_column, "column not in schema: " + name);
    }

    std::vector<std::string> names_with_role(ColumnRole role) const {
        std::vector<std::string> out;
        for (const auto& col : columns_) {
            if (col.role == role) out.push_back(col.name);
        }
        return out;
    }

private:
    std::vector<ColumnSpec> columns_;
};

struct CategoricalColumn {
    std::vector<std::int32_t> codes;     // per-row level id
    std::vector<std::string> levels;     // level id -> label

    const std::string& label(std::size_t row) const { return levels[static_cast<std::size_t>(codes[row])]; }
};

class Table {
public:
    Table() = default;

    // Column payloads must be given in schema order.
    Table(TableSchema schema, std::vector<std::vector<double>> numeric,
          std::vector<CategoricalColumn> categorical)
        : schema_(std::move(schema)), numeric_(std::move(numeric)), categorical_(std::move(categorical)) {
        std::size_t num_slot = 0;
        std::size_t cat_slot = 0;
        slot_.resize(schema_.size());
        for (std::size_t i = 0; i < schema_.size(); ++i) {
            slot_[i] = schema_.at(i).kind == ColumnKind::numeric ? num_slot++ : cat_slot++;
        }
        if (numeric_.size() != num_slot || categorical_.size() != cat_slot) {
            fail(Errc::schema_mismatch, "column payload count does not match schema");
        }
        rows_ = 0;
        bool first = true;
        auto check_len = [&](std::size_t len, const std::string& name) {
            if (first) {
                rows_ = len;
                first = false;
            } else if (len != rows_) {
                fail(Errc::schema_mismatch, "ragged column: " + name);
            }
        };
        for (std::size_t i = 0; i < schema_.size(); ++i) {
            const auto& spec = schema_.at(i);
            if (spec.kind == ColumnKind::numeric) {
                const auto& col = numeric_[slot_[i]];
                check_len(col.size(), spec.name);
                for (double v : col) {
                    if (!std::isfinite(v)) fail(Errc::unparsable_numeric, "non-finite value in " + spec.name);
                }
            } else {
                const auto& col = categorical_[slot_[i]];
                check_len(col.codes.size(), spec.name);
                for (std::int32_t code : col.codes) {
                    if (code < 0 || static_cast<std::size_t>(code) >= col.levels.size()) {
                        fail(Errc::schema_mismatch, "level id out of range in " + spec.name);
                    }
                }
            }
        }
    }

    const TableSchema& schema() const { return schema_; }
    std::size_t rows() const { return rows_; }

    ColumnKind kind(const std::string& name) const { return schema_.at(schema_.require(name)).kind; }

    const std::vector<double>& numeric(const std::string& name) const {
        const std::size_t idx = schema_.require(name);
        if (schema_.at(idx).kind != ColumnKind::numeric) {
            fail(Errc::column_kind_mismatch, "not a numeric column: " + name);
        }
        return numeric_[slot_[idx]];
    }

    const CategoricalColumn& categorical(const std::string& name) const {
        const std::size_t idx = schema_.require(name);
        if (schema_.at(idx).kind != ColumnKind::categorical) {
            fail(Errc::column_kind_mismatch, "not a categorical column: " + name);
        }
        return categorical_[slot_[idx]];
    }

    const std::vector<double>& numeric_slot(std::size_t slot) const { return numeric_[slot]; }
    const CategoricalColumn& categorical_slot(std::size_t slot) const { return categorical_[slot]; }
    std::size_t slot_of(std::size_t column_index) const { return slot_[column_index]; }

    std::vector<std::string> numeric_names() const {
        std::vector<std::string> out;
        for (const auto& col : schema_.columns()) {
            if (col.kind == ColumnKind::numeric) out.push_back(col.name);
        }
        return out;
    }

    std::vector<std::string> categorical_names() const {
        std::vector<std::string> out;
        for (const auto& col : schema_.columns()) {
            if (col.kind == ColumnKind::categorical) out.push_back(col.name);
        }
        return out;
    }

    Table take_rows(const std::vector<std::size_t>& row_indexes) const {
        std::vector<std::vector<double>> numeric(numeric_.size());
        std::vector<CategoricalColumn> categorical(categorical_.size());
        for (std::size_t s = 0; s < numeric_.size(); ++s) {
            numeric[s].reserve(row_indexes.size());
            for (std::size_t r : row_indexes) numeric[s].push_back(numeric_[s][r]);
        }
        for (std::size_t s = 0; s < categorical_.size(); ++s) {
            categorical[s].levels = categorical_[s].levels;
            categorical[s].codes.reserve(row_indexes.size());
            for (std::size_t r : row_indexes) categorical[s].codes.push_back(categorical_[s].codes[r]);
        }
        return Table(schema_, std::move(numeric), std::move(categorical));
    }

    Table select_columns(const std::vector<std::string>& names) const {
        std::vector<ColumnSpec> specs;
        std::vector<std::vector<double>> numeric;
        std::vector<CategoricalColumn> categorical;
        for (const auto& name : names) {
            const std::size_t idx = schema_.require(name);
            const auto& spec = schema_.at(idx);
            specs.push_back(spec);
            if (spec.kind == ColumnKind::numeric) {
                numeric.push_back(numeric_[slot_[idx]]);
            } else {
                categorical.push_back(categorical_[slot_[idx]]);
            }
        }
        return Table(TableSchema(std::move(specs)), std::move(numeric), std::move(categorical));
    }

    Table drop_column(const std::string& name) const {
        std::vector<std::string> keep;
        for (const auto& col : schema_.columns()) {
            if (col.name != name) keep.push_back(col.name);
        }
        if (keep.size() == schema_.size()) fail(Errc::missing_column, "column not in schema: " + name);
        return select_columns(keep);
    }

    // Row-wise concatenation; categorical levels are aligned by label string,
    // unseen labels from `b` become new levels.
    static Table concat(const Table& a, const Table& b) {
        if (a.schema_.size() != b.schema_.size()) fail(Errc::schema_mismatch, "concat: schema size differs");
        std::vector<std::vector<double>> numeric = a.numeric_;
        std::vector<CategoricalColumn> categorical = a.categorical_;
        for (std::size_t i = 0; i < a.schema_.size(); ++i) {
            const auto& sa = a.schema_.at(i);
            const auto& sb = b.schema_.at(i);
            if (sa.name != sb.name || sa.kind != sb.kind) {
                fail(Errc::schema_mismatch, "concat: column mismatch at " + sa.name);
            }
            if (sa.kind == ColumnKind::numeric) {
                auto& dst = numeric[a.slot_[i]];
                const auto& src = b.numeric_[b.slot_[i]];
                dst.insert(dst.end(), src.begin(), src.end());
            } else {
                auto& dst = categorical[a.slot_[i]];
                const auto& src = b.categorical_[b.slot_[i]];
                std::unordered_map<std::string, std::int32_t> index;
                for (std::size_t l = 0; l < dst.levels.size(); ++l) {
                    index.emplace(dst.levels[l], static_cast<std::int32_t>(l));
                }
                std::vector<std::int32_t> remap(src.levels.size());
                for (std::size_t l = 0; l < src.levels.size(); ++l) {
                    auto it = index.find(src.levels[l]);
                    if (it == index.end()) {
                        remap[l] = static_cast<std::int32_t>(dst.levels.size());
                        index.emplace(src.levels[l], remap[l]);
                        dst.levels.push_back(src.levels[l]);
                    } else {
                        remap[l] = it->second;
                    }
                }
                for (std::int32_t code : src.codes) dst.codes.push_back(remap[static_cast<std::size_t>(code)]);
            }
        }
        return Table(a.schema_, std::move(numeric), std::move(categorical));
    }

private:
    TableSchema schema_;
    std::vector<std::vector<double>> numeric_;
    std::vector<CategoricalColumn> categorical_;
    std::vector<std::size_t> slot_;
    std::size_t rows_ = 0;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

namespace detail {

// One RFC-4180 record; handles quoted fields, embedded commas/newlines and "" escapes.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool saw_any = false;
    int c;
    while ((c = in.get()) != EOF) {
        saw_any = true;
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(ch);
        }
    }
    if (!saw_any) return false;
    fields.push_back(std::move(field));
    return true;
}

inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

inline std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) fail(Errc::io_error, "failed to format double");
    return std::string(buf, ptr);
}

inline std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

}  // namespace detail

inline Table load_csv(std::istream& in, const TableSchema& schema, const std::string& origin = "<stream>") {
    std::vector<std::string> header;
    if (!detail::read_csv_record(in, header)) fail(Errc::io_error, origin + ": empty file");

    // Header matched to schema columns by name; extra file columns are ignored.
    std::vector<std::ptrdiff_t> file_pos(schema.size(), -1);
    for (std::size_t h = 0; h < header.size(); ++h) {
        if (auto idx = schema.find(header[h])) {
            if (file_pos[*idx] != -1) {
                fail(Errc::io_error, origin + ": duplicate header column " + header[h]);
            }
            file_pos[*idx] = static_cast<std::ptrdiff_t>(h);
        }
    }
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (file_pos[i] == -1) fail(Errc::missing_column, origin + ": missing column " + schema.at(i).name);
    }

    std::size_t num_slots = 0;
    std::size_t cat_slots = 0;
    for (const auto& col : schema.columns()) {
        (col.kind == ColumnKind::numeric ? num_slots : cat_slots)++;
    }
    std::vector<std::vector<double>> numeric(num_slots);
    std::vector<CategoricalColumn> categorical(cat_slots);
    std::vector<std::unordered_map<std::string, std::int32_t>> level_index(cat_slots);

    std::vector<std::string> fields;
    std::size_t row = 0;
    while (detail::read_csv_record(in, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        ++row;
        std::size_t num_slot = 0;
        std::size_t cat_slot = 0;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const auto& spec = schema.at(i);
            const auto pos = static_cast<std::size_t>(file_pos[i]);
            if (pos >= fields.size()) {
                fail(Errc::missing_value, origin + ": row " + std::to_string(row) + " lacks column " + spec.name);
            }
            const std::string& raw = fields[pos];
            if (spec.kind == ColumnKind::numeric) {
                const std::string cell = detail::trim(raw);
                if (cell.empty()) {
                    fail(Errc::missing_value,
                         origin + ": missing value at row " + std::to_string(row) + ", column " + spec.name);
                }
                double value = 0.0;
                const char* first = cell.data();
                const char* last = cell.data() + cell.size();
                auto [ptr, ec] = std::from_chars(first, last, value);
                if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
                    fail(Errc::unparsable_numeric, origin + ": cannot parse \"" + cell + "\" at row " +
                                                       std::to_string(row) + ", column " + spec.name);
                }
                numeric[num_slot].push_back(value);
                ++num_slot;
            } else {
                if (raw.empty()) {
                    fail(Errc::missing_value,
                         origin + ": missing value at row " + std::to_string(row) + ", column " + spec.name);
                }
                auto& index = level_index[cat_slot];
                auto& col = categorical[cat_slot];
                auto it = index.find(raw);
                std::int32_t code;
                if (it == index.end()) {
                    code = static_cast<std::int32_t>(col.levels.size());
                    index.emplace(raw, code);
                    col.levels.push_back(raw);
                } else {
                    code = it->second;
                }
                col.codes.push_back(code);
                ++cat_slot;
            }
        }
    }
    return Table(schema, std::move(numeric), std::move(categorical));
}

inline Table load_csv(const std::string& path, const TableSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    return load_csv(in, schema, path);
}

inline void emit_csv(const Table& table, std::ostream& out) {
    const auto& schema = table.schema();
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (i) out << ',';
        out << detail::csv_quote(schema.at(i).name);
    }
    out << '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t i = 0; i < schema.size(); ++i) {
            if (i) out << ',';
            const auto& spec = schema.at(i);
            if (spec.kind == ColumnKind::numeric) {
                out << detail::format_double(table.numeric_slot(table.slot_of(i))[r]);
            } else {
                out << detail::csv_quote(table.categorical_slot(table.slot_of(i)).label(r));
            }
        }
        out << '\n';
    }
}

inline void emit_csv(const Table& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot open " + path + " for writing");
    emit_csv(table, out);
}

// Deterministic disjoint partition; |train| = round(fraction*n) clamped to [1, n-1].
inline std::pair<Table, Table> split(const Table& table, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        fail(Errc::invalid_config, "train fraction must be in (0,1)");
    }
    const std::size_t n = table.rows();
    if (n < 2) fail(Errc::too_few_rows, "split needs at least 2 rows");
    auto size = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    size = std::clamp<std::size_t>(size, 1, n - 1);
    Rng rng(derive_seed(spec.seed, 0x73706c6974ULL));
    auto order = rng.permutation(n);
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
    std::vector<std::size_t> holdout(order.begin() + static_cast<std::ptrdiff_t>(size), order.end());
    std::sort(train.begin(), train.end());
    std::sort(holdout.begin(), holdout.end());
    return {table.take_rows(train), table.take_rows(holdout)};
}

struct CrosstabCounts {
    std::size_t real = 0;
    std::size_t synth = 0;
};

// Contingency over the union of labels; absent labels count zero.
inline std::map<std::string, CrosstabCounts> crosstab(const CategoricalColumn& real,
                                                      const CategoricalColumn& synth) {
    std::map<std::string, CrosstabCounts> tab;
    for (std::int32_t code : real.codes) tab[real.levels[static_cast<std::size_t>(code)]].real++;
    for (std::int32_t code : synth.codes) tab[synth.levels[static_cast<std::size_t>(code)]].synth++;
    return tab;
}

inline std::map<std::string, CrosstabCounts> crosstab(const Table& real, const Table& synth,
                                                      const std::string& column) {
    return crosstab(real.categorical(column), synth.categorical(column));
}

// Schema file: '#' comments, optional "key = value" lines, and one
// "column = <name> <kind> [role]" line per column.
inline TableSchema load_schema(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<ColumnSpec> columns;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(Errc::invalid_config, origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key != "column") continue;  // other keys are informational
        std::istringstream tokens(value);
        std::string name, kind_word, role_word;
        tokens >> name >> kind_word >> role_word;
        if (name.empty() || kind_word.empty()) {
            fail(Errc::invalid_config, origin + ":" + std::to_string(line_no) + ": column needs <name> <kind>");
        }
        ColumnSpec spec;
        spec.name = name;
        if (kind_word == "numeric") spec.kind = ColumnKind::numeric;
        else if (kind_word == "categorical") spec.kind = ColumnKind::categorical;
        else fail(Errc::invalid_config, origin + ": unknown column kind " + kind_word);
        if (role_word.empty() || role_word == "feature") spec.role = ColumnRole::feature;
        else if (role_word == "target") spec.role = ColumnRole::target;
        else if (role_word == "quasi_identifier") spec.role = ColumnRole::quasi_identifier;
        else if (role_word == "sensitive") spec.role = ColumnRole::sensitive;
        else fail(Errc::invalid_config, origin + ": unknown column role " + role_word);
        columns.push_back(std::move(spec));
    }
    if (columns.empty()) fail(Errc::invalid_config, origin + ": schema declares no columns");
    return TableSchema(std::move(columns));
}

inline TableSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    return load_schema(in, path);
}

}  // namespace synthkit
