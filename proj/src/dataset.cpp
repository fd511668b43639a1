#include "fleetci/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace fleetci {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        out.push_back(trim(std::string_view(line).substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::optional<double> parse_real(const std::string& cell) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && cell.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace

std::string to_string(ColumnKind kind) {
    switch (kind) {
    case ColumnKind::BinaryAttribute: return "binary_attribute";
    case ColumnKind::ContinuousCovariate: return "continuous_covariate";
    case ColumnKind::Treatment: return "treatment";
    case ColumnKind::Outcome: return "outcome";
    case ColumnKind::Id: return "id";
    }
    return "?";
}

ColumnKind parse_column_kind(const std::string& text) {
    for (auto k : {ColumnKind::BinaryAttribute, ColumnKind::ContinuousCovariate, ColumnKind::Treatment,
                   ColumnKind::Outcome, ColumnKind::Id})
        if (to_string(k) == text) return k;
    if (text == "binary") return ColumnKind::BinaryAttribute;
    if (text == "continuous") return ColumnKind::ContinuousCovariate;
    throw InputError("unknown column kind '" + text + "'");
}

ColumnSchema::ColumnSchema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) { validate(); }

ColumnSchema ColumnSchema::from_header(const std::vector<std::string>& header) {
    std::vector<ColumnSpec> cols;
    for (const auto& name : header) {
        ColumnKind kind;
        if (name == "t") kind = ColumnKind::Treatment;
        else if (name == "z") kind = ColumnKind::Outcome;
        else if (name == "id" || name == "unit_id") kind = ColumnKind::Id;
        else if (name.starts_with("x_")) kind = ColumnKind::BinaryAttribute;
        else if (name.starts_with("y_")) kind = ColumnKind::ContinuousCovariate;
        else throw InputError("column '" + name + "' does not follow the naming convention (t, z, id, x_*, y_*)");
        cols.push_back({name, kind});
    }
    return ColumnSchema(std::move(cols));
}

ColumnSchema ColumnSchema::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read schema file '" + path.string() + "'");
    std::vector<ColumnSpec> cols;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError("schema line without '=': " + line);
        cols.push_back({trim(std::string_view(line).substr(0, eq)),
                        parse_column_kind(trim(std::string_view(line).substr(eq + 1)))});
    }
    return ColumnSchema(std::move(cols));
}

std::optional<std::size_t> ColumnSchema::find(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    return std::nullopt;
}

void ColumnSchema::validate() const {
    std::unordered_set<std::string> seen;
    std::size_t n_treat = 0, n_out = 0, n_bin = 0, n_id = 0;
    for (const auto& c : columns_) {
        if (c.name.empty()) throw InputError("schema contains an empty column name");
        if (!seen.insert(c.name).second) throw InputError("duplicate column name '" + c.name + "'");
        n_treat += c.kind == ColumnKind::Treatment;
        n_out += c.kind == ColumnKind::Outcome;
        n_bin += c.kind == ColumnKind::BinaryAttribute;
        n_id += c.kind == ColumnKind::Id;
    }
    if (n_treat != 1) throw InputError("schema must contain exactly one treatment column");
    if (n_out != 1) throw InputError("schema must contain exactly one outcome column");
    if (n_bin < 1) throw InputError("schema must contain at least one binary_attribute column");
    if (n_id > 1) throw InputError("schema may contain at most one id column");
}

std::vector<std::string> FleetDataset::feature_names() const {
    auto names = binary_names;
    names.insert(names.end(), continuous_names.begin(), continuous_names.end());
    return names;
}

void FleetDataset::validate() const {
    const std::size_t n = size();
    if (n < 2) throw InputError("dataset needs at least 2 rows");
    if (n_binary() < 1) throw InputError("dataset needs at least one binary attribute");
    if (treatment.size() != n || unit_ids.size() != n || binary.rows() != n ||
        (n_continuous() > 0 && continuous.rows() != n))
        throw InputError("dataset column lengths disagree");
    if (binary_names.size() != n_binary() || continuous_names.size() != n_continuous())
        throw InputError("dataset feature names do not match column counts");
    for (auto v : binary.data())
        if (v > 1) throw InputError("binary attribute value outside {0,1}");
    for (std::size_t i = 0; i < n; ++i)
        if (treatment[i] > 1 || outcome[i] > 1) throw InputError("treatment/outcome value outside {0,1}");
    std::unordered_set<std::string> seen;
    for (const auto& name : feature_names())
        if (!seen.insert(name).second) throw InputError("duplicate feature name '" + name + "'");
}

FleetDataset FleetDataset::select_rows(std::span<const std::size_t> rows) const {
    FleetDataset out;
    out.binary = binary.select_rows(rows);
    out.continuous = n_continuous() > 0 ? continuous.select_rows(rows) : RealMatrix(rows.size(), 0);
    out.unit_ids.reserve(rows.size());
    out.treatment.reserve(rows.size());
    out.outcome.reserve(rows.size());
    for (auto r : rows) {
        out.unit_ids.push_back(unit_ids[r]);
        out.treatment.push_back(treatment[r]);
        out.outcome.push_back(outcome[r]);
    }
    out.binary_names = binary_names;
    out.continuous_names = continuous_names;
    out.id_name = id_name;
    out.treatment_name = treatment_name;
    out.outcome_name = outcome_name;
    return out;
}

FleetDataset FleetDataset::select_binary(std::span<const std::size_t> features) const {
    FleetDataset out = *this;
    out.binary = binary.select_cols(features);
    out.binary_names.clear();
    for (auto f : features) out.binary_names.push_back(binary_names.at(f));
    return out;
}

RealMatrix FleetDataset::design_matrix() const {
    const std::size_t n = size(), nb = n_binary(), nc = n_continuous();
    RealMatrix out(n, nb + nc);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < nb; ++j) out(r, j) = binary(r, j);
        for (std::size_t j = 0; j < nc; ++j) out(r, nb + j) = continuous(r, j);
    }
    return out;
}

std::vector<double> impute_median(std::span<const double> column, const std::string& column_name) {
    std::vector<double> present;
    present.reserve(column.size());
    for (double v : column)
        if (!std::isnan(v)) present.push_back(v);
    if (present.empty()) throw InputError("column '" + column_name + "' has no non-missing values to impute from");
    std::sort(present.begin(), present.end());
    const std::size_t k = present.size();
    const double median = (k % 2 == 1) ? present[k / 2] : 0.5 * (present[k / 2 - 1] + present[k / 2]);
    std::vector<double> out(column.begin(), column.end());
    for (double& v : out)
        if (std::isnan(v)) v = median;
    return out;
}

std::vector<std::string> impute_continuous(FleetDataset& data) {
    std::vector<std::string> changed;
    for (std::size_t j = 0; j < data.n_continuous(); ++j) {
        auto col = data.continuous.column(j);
        if (std::none_of(col.begin(), col.end(), [](double v) { return std::isnan(v); })) continue;
        auto filled = impute_median(col, data.continuous_names[j]);
        for (std::size_t r = 0; r < filled.size(); ++r) data.continuous(r, j) = filled[r];
        changed.push_back(data.continuous_names[j]);
    }
    return changed;
}

LoadResult read_dataset(std::istream& in, const std::optional<ColumnSchema>& schema_opt, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("'" + source + "' is empty (no header row)");
    const auto header = split_csv_line(line);
    const ColumnSchema schema = schema_opt ? *schema_opt : ColumnSchema::from_header(header);

    if (header.size() != schema.columns().size())
        throw InputError("'" + source + "': header has " + std::to_string(header.size()) + " columns, schema has " +
                         std::to_string(schema.columns().size()));
    std::vector<ColumnKind> kinds;
    for (const auto& name : header) {
        auto idx = schema.find(name);
        if (!idx) throw InputError("'" + source + "': header column '" + name + "' is not in the schema");
        kinds.push_back(schema.columns()[*idx].kind);
    }

    LoadResult result;
    FleetDataset& d = result.dataset;
    std::vector<std::size_t> bin_cols, cont_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        switch (kinds[c]) {
        case ColumnKind::BinaryAttribute: bin_cols.push_back(c); d.binary_names.push_back(header[c]); break;
        case ColumnKind::ContinuousCovariate: cont_cols.push_back(c); d.continuous_names.push_back(header[c]); break;
        case ColumnKind::Treatment: d.treatment_name = header[c]; break;
        case ColumnKind::Outcome: d.outcome_name = header[c]; break;
        case ColumnKind::Id: d.id_name = header[c]; break;
        }
    }

    std::vector<std::uint8_t> bin_values;
    std::vector<double> cont_values;
    std::size_t line_no = 1, row_index = 0;
    auto parse_flag = [&](const std::string& cell, const std::string& col) -> std::optional<std::uint8_t> {
        if (is_missing(cell)) return std::nullopt;
        auto v = parse_real(cell);
        if (!v || (*v != 0.0 && *v != 1.0))
            throw InputError("'" + source + "' line " + std::to_string(line_no) + ": column '" + col +
                             "' has value '" + cell + "' outside {0,1}");
        return static_cast<std::uint8_t>(*v);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw InputError("'" + source + "' line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        std::optional<std::uint8_t> t, z;
        std::string id = std::to_string(row_index);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (kinds[c] == ColumnKind::Treatment) t = parse_flag(cells[c], header[c]);
            else if (kinds[c] == ColumnKind::Outcome) z = parse_flag(cells[c], header[c]);
            else if (kinds[c] == ColumnKind::Id) id = cells[c];
        }
        ++row_index;
        if (!t || !z) {
            ++result.dropped_rows;
            continue;
        }
        for (auto c : bin_cols) {
            auto v = parse_flag(cells[c], header[c]);
            if (!v)
                throw InputError("'" + source + "' line " + std::to_string(line_no) + ": binary column '" +
                                 header[c] + "' is missing (binary attributes are never imputed)");
            bin_values.push_back(*v);
        }
        for (auto c : cont_cols) {
            if (is_missing(cells[c])) {
                cont_values.push_back(kMissing);
                continue;
            }
            auto v = parse_real(cells[c]);
            if (!v)
                throw InputError("'" + source + "' line " + std::to_string(line_no) + ": column '" + header[c] +
                                 "' has non-numeric value '" + cells[c] + "'");
            cont_values.push_back(*v);
        }
        d.unit_ids.push_back(id);
        d.treatment.push_back(*t);
        d.outcome.push_back(*z);
    }

    const std::size_t n = d.outcome.size();
    if (n == 0) throw InputError("'" + source + "': no usable rows after dropping rows with missing treatment/outcome");
    d.binary = BinaryMatrix(n, bin_cols.size());
    d.binary.data() = std::move(bin_values);
    d.continuous = RealMatrix(n, cont_cols.size());
    d.continuous.data() = std::move(cont_values);
    result.imputed_columns = impute_continuous(d);
    d.validate();
    return result;
}

LoadResult load_dataset(const std::filesystem::path& path, const std::optional<ColumnSchema>& schema) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read dataset file '" + path.string() + "'");
    return read_dataset(in, schema, path.string());
}

void write_dataset(std::ostream& out, const FleetDataset& d) {
    out << d.id_name;
    for (const auto& n : d.binary_names) out << ',' << n;
    for (const auto& n : d.continuous_names) out << ',' << n;
    out << ',' << d.treatment_name << ',' << d.outcome_name << '\n';
    for (std::size_t r = 0; r < d.size(); ++r) {
        out << d.unit_ids[r];
        for (std::size_t j = 0; j < d.n_binary(); ++j) out << ',' << int(d.binary(r, j));
        for (std::size_t j = 0; j < d.n_continuous(); ++j) out << ',' << format_real(d.continuous(r, j));
        out << ',' << int(d.treatment[r]) << ',' << int(d.outcome[r]) << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, const FleetDataset& data) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write dataset file '" + path.string() + "'");
    write_dataset(out, data);
}

} // namespace fleetci
