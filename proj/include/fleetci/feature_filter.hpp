#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fleetci/dataset.hpp"

namespace fleetci {

/// Plug-in mutual information (nats) between two binary vectors.
double mutual_information(std::span<const std::uint8_t> feature, std::span<const std::uint8_t> outcome);

/// Phi coefficient. Defined as 0 when either vector is constant.
double binary_correlation(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Greedy representative selection over binary attributes. Indices refer to
/// columns of the dataset the map was built from.
struct RepresentativeMap {
    std::vector<std::size_t> representatives;  // in admission order (non-increasing MI)
    std::vector<std::size_t> assignment;       // feature -> representative
    std::vector<double> mi_scores;             // feature -> MI with outcome
    std::vector<bool> constant;                // zero-information (constant) features
    double threshold = 0.9;

    bool is_representative(std::size_t feature) const { return assignment.at(feature) == feature; }

    /// Members of the group headed by `representative`, ascending.
    std::vector<std::size_t> group(std::size_t representative) const;

    /// Spreads per-representative values (ordered like `representatives`)
    /// back to every original feature.
    std::vector<double> expand(std::span<const double> representative_values) const;
};

constexpr double kDefaultFilterThreshold = 0.9;

/// Orders features by MI with the outcome (ties: lower column index first),
/// admits a feature as a representative iff its |corr| with every existing
/// representative is <= threshold, and otherwise assigns it to the existing
/// representative with the largest |corr| (ties: earliest admitted).
RepresentativeMap eliminate_correlated(const FleetDataset& data, double threshold = kDefaultFilterThreshold);

/// Two-column table (feature, representative) plus MI.
void write_representative_table(std::ostream& out, const RepresentativeMap& map,
                                const std::vector<std::string>& names);

} // namespace fleetci
