#include "fleetci/feature_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace fleetci {

namespace {

void check_lengths(std::size_t a, std::size_t b, std::size_t min_len, const char* what) {
    if (a != b) throw InputError(std::string(what) + ": length mismatch");
    if (a < min_len) throw InputError(std::string(what) + ": vectors too short");
}

} // namespace

double mutual_information(std::span<const std::uint8_t> feature, std::span<const std::uint8_t> outcome) {
    check_lengths(feature.size(), outcome.size(), 1, "mutual_information");
    double counts[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t k = 0; k < feature.size(); ++k) {
        if (feature[k] > 1 || outcome[k] > 1) throw InputError("mutual_information: non-binary value");
        counts[feature[k]][outcome[k]] += 1.0;
    }
    const double n = static_cast<double>(feature.size());
    const double pa[2] = {(counts[0][0] + counts[0][1]) / n, (counts[1][0] + counts[1][1]) / n};
    const double pb[2] = {(counts[0][0] + counts[1][0]) / n, (counts[0][1] + counts[1][1]) / n};
    double mi = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double pab = counts[a][b] / n;
            if (pab > 0.0) mi += pab * std::log(pab / (pa[a] * pb[b]));
        }
    return std::max(mi, 0.0);
}

double binary_correlation(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    check_lengths(a.size(), b.size(), 2, "binary_correlation");
    double n11 = 0, n1a = 0, n1b = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        n11 += (a[k] & b[k]);
        n1a += a[k];
        n1b += b[k];
    }
    const double n = static_cast<double>(a.size());
    const double var_a = n1a * (n - n1a);
    const double var_b = n1b * (n - n1b);
    if (var_a == 0.0 || var_b == 0.0) return 0.0;
    const double r = (n * n11 - n1a * n1b) / std::sqrt(var_a * var_b);
    return std::clamp(r, -1.0, 1.0);
}

std::vector<std::size_t> RepresentativeMap::group(std::size_t representative) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < assignment.size(); ++f)
        if (assignment[f] == representative) out.push_back(f);
    return out;
}

std::vector<double> RepresentativeMap::expand(std::span<const double> representative_values) const {
    if (representative_values.size() != representatives.size())
        throw InputError("expand: expected one value per representative");
    std::vector<double> by_feature(assignment.size(), 0.0);
    std::vector<double> rep_value(assignment.size(), 0.0);
    for (std::size_t i = 0; i < representatives.size(); ++i) rep_value[representatives[i]] = representative_values[i];
    for (std::size_t f = 0; f < assignment.size(); ++f) by_feature[f] = rep_value[assignment[f]];
    return by_feature;
}

RepresentativeMap eliminate_correlated(const FleetDataset& data, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw InputError("filter threshold must be in (0,1]");
    data.validate();
    const std::size_t n = data.n_binary();

    std::vector<std::vector<std::uint8_t>> columns(n);
    RepresentativeMap map;
    map.threshold = threshold;
    map.mi_scores.assign(n, 0.0);
    map.constant.assign(n, false);
    map.assignment.assign(n, 0);
    parallel_for(n, [&](std::size_t j) {
        columns[j] = data.binary.column(j);
        map.mi_scores[j] = mutual_information(columns[j], data.outcome);
        const auto ones = std::count(columns[j].begin(), columns[j].end(), std::uint8_t{1});
        map.constant[j] = ones == 0 || static_cast<std::size_t>(ones) == columns[j].size();
    });

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return map.mi_scores[a] > map.mi_scores[b]; });

    map.representatives.push_back(order[0]);
    map.assignment[order[0]] = order[0];
    std::vector<double> abs_corr;
    for (std::size_t pos = 1; pos < n; ++pos) {
        const std::size_t f = order[pos];
        abs_corr.assign(map.representatives.size(), 0.0);
        parallel_for(map.representatives.size(), [&](std::size_t r) {
            abs_corr[r] = std::abs(binary_correlation(columns[f], columns[map.representatives[r]]));
        });
        const auto best = std::max_element(abs_corr.begin(), abs_corr.end());
        if (*best <= threshold) {
            map.representatives.push_back(f);
            map.assignment[f] = f;
        } else {
            map.assignment[f] = map.representatives[static_cast<std::size_t>(best - abs_corr.begin())];
        }
    }
    return map;
}

void write_representative_table(std::ostream& out, const RepresentativeMap& map,
                                const std::vector<std::string>& names) {
    out << "feature,representative,mutual_information,constant\n";
    for (std::size_t f = 0; f < map.assignment.size(); ++f)
        out << names.at(f) << ',' << names.at(map.assignment[f]) << ',' << format_real(map.mi_scores[f]) << ','
            << (map.constant[f] ? 1 : 0) << '\n';
}

} // namespace fleetci
