#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fleetci {

// Error taxonomy. The CLI maps each class to a distinct exit status.

/// Bad files, schemas, flags or shapes supplied by the caller.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The data is well-formed but statistically degenerate (zero variance,
/// empty treatment arm, single-class outcome where two are required).
class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T> column(std::size_t c) const {
        std::vector<T> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    void set_column(std::size_t c, T value) {
        for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = value;
    }

    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto src = row(idx[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    Matrix select_cols(std::span<const std::size_t> idx) const {
        Matrix out(rows_, idx.size());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j) out(r, j) = (*this)(r, idx[j]);
        return out;
    }

    const std::vector<T>& data() const noexcept { return data_; }
    std::vector<T>& data() noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using BinaryMatrix = Matrix<std::uint8_t>;

/// Pairwise (cascade) summation; result depends only on element order.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

/// Empirical quantile with linear interpolation between order statistics:
/// for sorted v of size n, h = (n - 1) p, result = v[floor h] + (h - floor h)(v[floor h + 1] - v[floor h]).
double quantile_sorted(std::span<const double> sorted, double p);

/// Shortest decimal form that parses back to the same double; NaN prints as NA.
std::string format_real(double value);

double sigmoid(double margin);
double logit(double p);

// -- parallelism -----------------------------------------------------------

/// Caps the number of worker threads used by parallel_for (0 = hardware).
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(i) for i in [0, n). Each index is executed exactly once; callers
/// write results into per-index slots so output never depends on scheduling.
/// Nested calls from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// -- seeding ---------------------------------------------------------------

/// SplitMix64 finalizer; used to derive independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace fleetci
