#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vizgrad::data {

enum class AttributeKind { quantitative, categorical };

struct Attribute {
    std::string name;
    AttributeKind kind = AttributeKind::quantitative;
    double observed_min = 0.0;  // quantitative only
    double observed_max = 0.0;  // quantitative only
    std::vector<std::string> levels;  // categorical only, first-appearance order

    bool operator==(const Attribute&) const = default;
};

// Column storage. Quantitative columns hold values, categorical columns hold
// indices into Attribute::levels.
struct Column {
    std::vector<double> values;
    std::vector<std::uint32_t> codes;

    bool operator==(const Column&) const = default;
};

// Immutable tabular data set: N items over M named attributes, no missing
// cells. Build through ingest_csv() or from_columns().
class Dataset {
public:
    Dataset() = default;

    [[nodiscard]] std::size_t size() const noexcept { return rows_; }
    [[nodiscard]] std::size_t num_attributes() const noexcept { return attributes_.size(); }
    [[nodiscard]] const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
    [[nodiscard]] const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }

    // Index of the named attribute; throws ValidationError if absent.
    [[nodiscard]] std::size_t index_of(std::string_view name) const;
    [[nodiscard]] bool has_attribute(std::string_view name) const noexcept;

    [[nodiscard]] const std::vector<double>& values(std::size_t attr) const;
    [[nodiscard]] const std::vector<std::uint32_t>& codes(std::size_t attr) const;
    [[nodiscard]] const std::vector<double>& values(std::string_view name) const { return values(index_of(name)); }

    // Label of a categorical cell.
    [[nodiscard]] const std::string& label(std::size_t attr, std::size_t row) const;

    // New dataset holding the given rows (repeats allowed), with observed
    // ranges and level lists recomputed from the selection.
    [[nodiscard]] Dataset select_rows(const std::vector<std::size_t>& rows) const;

    bool operator==(const Dataset&) const = default;

    // Quantitative column from values; categorical column from labels.
    struct ColumnInput {
        std::string name;
        AttributeKind kind = AttributeKind::quantitative;
        std::vector<double> values;
        std::vector<std::string> labels;
    };
    static Dataset from_columns(std::vector<ColumnInput> columns);

private:
    void check_invariants() const;

    std::vector<Attribute> attributes_;
    std::vector<Column> columns_;
    std::size_t rows_ = 0;
};

enum class MissingPolicy { drop_row, error };

struct CsvOptions {
    bool header = true;
    char delimiter = ',';
    MissingPolicy missing = MissingPolicy::drop_row;
};

// Parse CSV text (RFC 4180 quoting). A column is quantitative iff every
// non-missing, unquoted cell parses as a finite real. An unquoted empty cell
// is missing. Throws ValidationError on malformed input.
Dataset ingest_csv(std::string_view text, const CsvOptions& options = {});
Dataset ingest_csv(std::istream& in, const CsvOptions& options = {});
Dataset load_csv(const std::string& path, const CsvOptions& options = {});

// Canonical writer: LF line endings, 17 significant digits, categorical
// cells always quoted so they read back as categorical.
std::string to_csv(const Dataset& d, char delimiter = ',');
void save_csv(const Dataset& d, const std::string& path);

// Draw N items uniformly with replacement (counter-based stream "bootstrap").
Dataset bootstrap_resample(const Dataset& d, std::uint64_t seed);

// Synthetic data sets for demos and tests.
enum class SyntheticKind { gaussian_blobs, correlated, uniform };

struct SyntheticOptions {
    SyntheticKind kind = SyntheticKind::gaussian_blobs;
    std::size_t rows = 2000;
    std::size_t clusters = 4;     // blobs
    double spread = 0.08;         // blob standard deviation, unit square
    double correlation = 0.8;     // correlated
    std::uint64_t seed = 0;
};

// Columns: x, y, z (quantitative) and, for blobs, cluster (categorical).
Dataset generate(const SyntheticOptions& options);

}  // namespace vizgrad::data
