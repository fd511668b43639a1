#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "fleetci/dataset.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("fleetci-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Dataset from explicit binary columns (one vector per attribute).
inline fleetci::FleetDataset make_binary_dataset(const std::vector<std::vector<std::uint8_t>>& columns,
                                                 std::vector<std::uint8_t> treatment,
                                                 std::vector<std::uint8_t> outcome) {
    fleetci::FleetDataset d;
    const std::size_t n = outcome.size();
    d.binary = fleetci::BinaryMatrix(n, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        d.binary_names.push_back("x_" + std::to_string(j));
        for (std::size_t k = 0; k < n; ++k) d.binary(k, j) = columns[j][k];
    }
    d.continuous = fleetci::RealMatrix(n, 0);
    for (std::size_t k = 0; k < n; ++k) d.unit_ids.push_back(std::to_string(k));
    d.treatment = std::move(treatment);
    d.outcome = std::move(outcome);
    return d;
}

} // namespace testutil
