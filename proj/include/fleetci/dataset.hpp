#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fleetci/common.hpp"

namespace fleetci {

enum class ColumnKind { BinaryAttribute, ContinuousCovariate, Treatment, Outcome, Id };

std::string to_string(ColumnKind kind);
ColumnKind parse_column_kind(const std::string& text);

struct ColumnSpec {
    std::string name;
    ColumnKind kind;
};

/// Column layout of a delimited fleet file. Missing cells are written as an
/// empty field or the literal token NA; both parse identically.
class ColumnSchema {
public:
    ColumnSchema() = default;
    explicit ColumnSchema(std::vector<ColumnSpec> columns);

    /// Naming convention: `t` treatment, `z` outcome, `x_*` binary attribute,
    /// `y_*` continuous covariate, `id` / `unit_id` identifier.
    static ColumnSchema from_header(const std::vector<std::string>& header);

    /// Sidecar file with one `column=kind` entry per line; `#` starts a comment.
    static ColumnSchema from_file(const std::filesystem::path& path);

    const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
    std::optional<std::size_t> find(const std::string& name) const;

private:
    void validate() const;
    std::vector<ColumnSpec> columns_;
};

/// Rows of (x, y, T, z). Immutable after construction by convention; all
/// operations return new datasets.
struct FleetDataset {
    std::vector<std::string> unit_ids;
    BinaryMatrix binary;          // N x n, entries in {0,1}
    RealMatrix continuous;        // N x m_cont, NaN marks a missing cell
    std::vector<std::uint8_t> treatment;
    std::vector<std::uint8_t> outcome;
    std::vector<std::string> binary_names;
    std::vector<std::string> continuous_names;
    std::string id_name = "id";
    std::string treatment_name = "t";
    std::string outcome_name = "z";

    std::size_t size() const noexcept { return outcome.size(); }
    std::size_t n_binary() const noexcept { return binary.cols(); }
    std::size_t n_continuous() const noexcept { return continuous.cols(); }
    std::size_t n_features() const noexcept { return n_binary() + n_continuous(); }

    /// Feature names in design-matrix order: binary first, then continuous.
    std::vector<std::string> feature_names() const;

    /// Throws InputError if any invariant is violated.
    void validate() const;

    FleetDataset select_rows(std::span<const std::size_t> rows) const;
    FleetDataset select_binary(std::span<const std::size_t> features) const;

    /// [x | y] as reals, the layout every learner is trained on.
    RealMatrix design_matrix() const;
};

struct LoadResult {
    FleetDataset dataset;
    std::size_t dropped_rows = 0;              // rows missing T or z
    std::vector<std::string> imputed_columns;  // continuous columns that had gaps
};

LoadResult load_dataset(const std::filesystem::path& path, const std::optional<ColumnSchema>& schema = std::nullopt);
LoadResult read_dataset(std::istream& in, const std::optional<ColumnSchema>& schema = std::nullopt,
                        const std::string& source = "<stream>");

/// Writes the file format read by load_dataset. NaN continuous cells become NA.
void write_dataset(std::ostream& out, const FleetDataset& data);
void save_dataset(const std::filesystem::path& path, const FleetDataset& data);

/// Replaces NaN entries by the median of the finite ones (midpoint for an
/// even count). Throws InputError naming `column_name` if all are missing.
std::vector<double> impute_median(std::span<const double> column, const std::string& column_name = "<column>");

/// Applies impute_median to every continuous column; returns the names of columns that changed.
std::vector<std::string> impute_continuous(FleetDataset& data);

} // namespace fleetci
