#include "vizgrad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "vizgrad/error.hpp"
#include "vizgrad/rng.hpp"

namespace vizgrad::data {

namespace {

struct Cell {
    std::string text;
    bool quoted = false;
};

using Row = std::vector<Cell>;

// RFC 4180 record splitter. Accepts LF or CRLF record terminators.
std::vector<Row> split_records(std::string_view text, char delim) {
    std::vector<Row> rows;
    Row row;
    Cell cell;
    bool in_quotes = false;
    bool cell_started = false;
    std::size_t line = 1;

    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell = Cell{};
        cell_started = false;
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.text.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                cell.text.push_back(c);
            }
            continue;
        }
        if (c == '"' && !cell_started) {
            in_quotes = true;
            cell.quoted = true;
            cell_started = true;
        } else if (c == delim) {
            end_cell();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            // handled by the '\n' branch
        } else if (c == '\n') {
            end_row();
            ++line;
        } else {
            if (cell.quoted) {
                throw ValidationError("csv: unexpected character after closing quote on line " +
                                      std::to_string(line));
            }
            cell.text.push_back(c);
            cell_started = true;
        }
    }
    if (in_quotes) {
        throw ValidationError("csv: unterminated quoted field");
    }
    if (cell_started || !row.empty() || cell.quoted) {
        end_row();
    }
    // Blank lines carry no record.
    std::erase_if(rows, [](const Row& r) { return r.size() == 1 && r[0].text.empty() && !r[0].quoted; });
    return rows;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

enum class NumericParse { number, non_finite, text };

NumericParse parse_number(std::string_view raw, double& out) {
    const auto s = trim(raw);
    if (s.empty()) return NumericParse::text;
    std::string_view body = s;
    if (body.front() == '+') body.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec == std::errc::result_out_of_range) return NumericParse::non_finite;
    if (ec != std::errc{} || ptr != body.data() + body.size()) return NumericParse::text;
    if (!std::isfinite(v)) return NumericParse::non_finite;
    out = v;
    return NumericParse::number;
}

bool is_missing(const Cell& c) { return !c.quoted && trim(c.text).empty(); }

void append_field(std::string& out, std::string_view text, char delim, bool force_quote) {
    const bool needs = force_quote || text.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
    if (!needs) {
        out.append(text);
        return;
    }
    out.push_back('"');
    for (char c : text) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------- Dataset

std::size_t Dataset::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
        if (attributes_[i].name == name) return i;
    }
    throw ValidationError("dataset has no attribute '" + std::string(name) + "'");
}

bool Dataset::has_attribute(std::string_view name) const noexcept {
    return std::any_of(attributes_.begin(), attributes_.end(), [&](const Attribute& a) { return a.name == name; });
}

const std::vector<double>& Dataset::values(std::size_t attr) const {
    if (attributes_.at(attr).kind != AttributeKind::quantitative) {
        throw ValidationError("attribute '" + attributes_[attr].name + "' is not quantitative");
    }
    return columns_[attr].values;
}

const std::vector<std::uint32_t>& Dataset::codes(std::size_t attr) const {
    if (attributes_.at(attr).kind != AttributeKind::categorical) {
        throw ValidationError("attribute '" + attributes_[attr].name + "' is not categorical");
    }
    return columns_[attr].codes;
}

const std::string& Dataset::label(std::size_t attr, std::size_t row) const {
    return attributes_.at(attr).levels.at(codes(attr).at(row));
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
    std::vector<ColumnInput> cols;
    cols.reserve(attributes_.size());
    for (std::size_t a = 0; a < attributes_.size(); ++a) {
        ColumnInput in{attributes_[a].name, attributes_[a].kind, {}, {}};
        for (std::size_t r : rows) {
            if (r >= rows_) throw ValidationError("select_rows: row index out of range");
            if (in.kind == AttributeKind::quantitative) {
                in.values.push_back(columns_[a].values[r]);
            } else {
                in.labels.push_back(attributes_[a].levels[columns_[a].codes[r]]);
            }
        }
        cols.push_back(std::move(in));
    }
    return from_columns(std::move(cols));
}

Dataset Dataset::from_columns(std::vector<ColumnInput> columns) {
    Dataset d;
    if (columns.empty()) throw ValidationError("dataset needs at least one attribute");
    const auto length = [](const ColumnInput& c) {
        return c.kind == AttributeKind::quantitative ? c.values.size() : c.labels.size();
    };
    d.rows_ = length(columns.front());
    for (auto& in : columns) {
        if (length(in) != d.rows_) throw ValidationError("column '" + in.name + "' has a different length");
        Attribute attr;
        attr.name = std::move(in.name);
        attr.kind = in.kind;
        Column col;
        if (in.kind == AttributeKind::quantitative) {
            col.values = std::move(in.values);
            if (!col.values.empty()) {
                const auto [lo, hi] = std::minmax_element(col.values.begin(), col.values.end());
                attr.observed_min = *lo;
                attr.observed_max = *hi;
            }
        } else {
            std::unordered_map<std::string, std::uint32_t> index;
            col.codes.reserve(in.labels.size());
            for (auto& label : in.labels) {
                auto [it, fresh] = index.try_emplace(label, static_cast<std::uint32_t>(attr.levels.size()));
                if (fresh) attr.levels.push_back(label);
                col.codes.push_back(it->second);
            }
        }
        d.attributes_.push_back(std::move(attr));
        d.columns_.push_back(std::move(col));
    }
    d.check_invariants();
    return d;
}

void Dataset::check_invariants() const {
    if (rows_ < 1) throw ValidationError("dataset has no rows");
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
        const auto& a = attributes_[i];
        for (std::size_t j = 0; j < i; ++j) {
            if (attributes_[j].name == a.name) throw ValidationError("duplicate attribute name '" + a.name + "'");
        }
        if (a.kind == AttributeKind::quantitative) {
            for (double v : columns_[i].values) {
                if (!std::isfinite(v)) throw ValidationError("attribute '" + a.name + "' has a non-finite value");
            }
        } else if (a.levels.empty()) {
            throw ValidationError("categorical attribute '" + a.name + "' has no levels");
        }
    }
}

// ---------------------------------------------------------------- CSV

Dataset ingest_csv(std::string_view text, const CsvOptions& options) {
    if (trim(text).empty()) throw ValidationError("csv: empty input");
    auto records = split_records(text, options.delimiter);
    if (records.empty()) throw ValidationError("csv: empty input");

    std::vector<std::string> names;
    std::size_t first = 0;
    const std::size_t width = records.front().size();
    if (options.header) {
        for (auto& c : records.front()) names.push_back(std::string(trim(c.text)));
        first = 1;
    } else {
        for (std::size_t i = 0; i < width; ++i) names.push_back("col" + std::to_string(i));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].empty()) throw ValidationError("csv: column " + std::to_string(i + 1) + " has an empty name");
        for (std::size_t j = 0; j < i; ++j) {
            if (names[i] == names[j]) throw ValidationError("csv: duplicate column name '" + names[i] + "'");
        }
    }
    if (records.size() <= first) throw ValidationError("csv: no data rows");

    std::vector<const Row*> kept;
    std::vector<std::size_t> kept_rows;  // 1-based data row numbers, for errors
    for (std::size_t r = first; r < records.size(); ++r) {
        const auto& row = records[r];
        const std::size_t data_row = r - first + 1;
        if (row.size() != width) {
            throw ValidationError("csv: row " + std::to_string(data_row) + " has " + std::to_string(row.size()) +
                                  " fields, expected " + std::to_string(width));
        }
        bool missing = false;
        for (std::size_t c = 0; c < width; ++c) {
            if (!is_missing(row[c])) continue;
            if (options.missing == MissingPolicy::error) {
                throw ValidationError("csv: missing value at row " + std::to_string(data_row) + ", column '" +
                                      names[c] + "'");
            }
            missing = true;
        }
        if (!missing) {
            kept.push_back(&row);
            kept_rows.push_back(data_row);
        }
    }
    if (kept.empty()) throw ValidationError("csv: all rows dropped as missing");

    std::vector<Dataset::ColumnInput> columns;
    for (std::size_t c = 0; c < width; ++c) {
        Dataset::ColumnInput in{names[c], AttributeKind::quantitative, {}, {}};
        bool numeric = true;
        in.values.reserve(kept.size());
        for (std::size_t k = 0; k < kept.size(); ++k) {
            const Cell& cell = (*kept[k])[c];
            double v = 0.0;
            const auto kind = cell.quoted ? NumericParse::text : parse_number(cell.text, v);
            if (kind == NumericParse::non_finite) {
                throw ValidationError("csv: non-finite number '" + cell.text + "' at row " + std::to_string(kept_rows[k]) +
                                      ", column '" + names[c] + "'");
            }
            if (kind == NumericParse::text) numeric = false;
            if (numeric) in.values.push_back(v);
        }
        if (!numeric) {
            in.kind = AttributeKind::categorical;
            in.values.clear();
            for (const Row* row : kept) in.labels.push_back((*row)[c].text);
        }
        columns.push_back(std::move(in));
    }
    return Dataset::from_columns(std::move(columns));
}

Dataset ingest_csv(std::istream& in, const CsvOptions& options) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_csv(buf.str(), options);
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset file '" + path + "'");
    try {
        return ingest_csv(in, options);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string to_csv(const Dataset& d, char delimiter) {
    std::string out;
    const auto& attrs = d.attributes();
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        if (a) out.push_back(delimiter);
        append_field(out, attrs[a].name, delimiter, false);
    }
    out.push_back('\n');
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (std::size_t a = 0; a < attrs.size(); ++a) {
            if (a) out.push_back(delimiter);
            if (attrs[a].kind == AttributeKind::quantitative) {
                out += format_real(d.values(a)[r]);
            } else {
                append_field(out, d.label(a, r), delimiter, true);
            }
        }
        out.push_back('\n');
    }
    return out;
}

void save_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << to_csv(d);
}

// ---------------------------------------------------------------- resampling

Dataset bootstrap_resample(const Dataset& d, std::uint64_t seed) {
    if (d.size() < 1) throw ValidationError("bootstrap_resample: empty dataset");
    CounterRng rng(seed, "bootstrap");
    std::vector<std::size_t> rows(d.size());
    for (auto& r : rows) r = static_cast<std::size_t>(rng.below(d.size()));
    return d.select_rows(rows);
}

// ---------------------------------------------------------------- synthetic

Dataset generate(const SyntheticOptions& o) {
    if (o.rows < 1) throw ValidationError("gen-data: rows must be >= 1");
    CounterRng rng(o.seed, "gen-data");
    std::vector<double> x(o.rows), y(o.rows), z(o.rows);
    std::vector<std::string> cluster;

    switch (o.kind) {
    case SyntheticKind::gaussian_blobs: {
        if (o.clusters < 1) throw ValidationError("gen-data: clusters must be >= 1");
        std::vector<std::array<double, 2>> centers(o.clusters);
        for (auto& c : centers) c = {0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform()};
        cluster.resize(o.rows);
        for (std::size_t i = 0; i < o.rows; ++i) {
            const auto k = static_cast<std::size_t>(rng.below(o.clusters));
            x[i] = centers[k][0] + o.spread * rng.normal();
            y[i] = centers[k][1] + o.spread * rng.normal();
            z[i] = rng.uniform();
            cluster[i] = "c" + std::to_string(k);
        }
        break;
    }
    case SyntheticKind::correlated: {
        const double rho = std::clamp(o.correlation, -1.0, 1.0);
        for (std::size_t i = 0; i < o.rows; ++i) {
            const double a = rng.normal();
            const double b = rng.normal();
            x[i] = a;
            y[i] = rho * a + std::sqrt(1.0 - rho * rho) * b;
            z[i] = rng.uniform();
        }
        break;
    }
    case SyntheticKind::uniform:
        for (std::size_t i = 0; i < o.rows; ++i) {
            x[i] = rng.uniform();
            y[i] = rng.uniform();
            z[i] = rng.uniform();
        }
        break;
    }

    std::vector<Dataset::ColumnInput> cols;
    cols.push_back({"x", AttributeKind::quantitative, std::move(x), {}});
    cols.push_back({"y", AttributeKind::quantitative, std::move(y), {}});
    cols.push_back({"z", AttributeKind::quantitative, std::move(z), {}});
    if (!cluster.empty()) cols.push_back({"cluster", AttributeKind::categorical, {}, std::move(cluster)});
    return Dataset::from_columns(std::move(cols));
}

}  // namespace vizgrad::data
