#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpd/detectors.hpp"

namespace cpd {

// Row-major set of d-dimensional points.
class PointSet {
public:
    explicit PointSet(std::size_t dim = 1) : dim_(dim) {
        if (dim == 0) {
            throw ParameterError("PointSet: dimension must be >= 1");
        }
    }
    PointSet(std::size_t dim, std::vector<double> data);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return data_.size() / dim_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> operator[](std::size_t i) const noexcept {
        return {data_.data() + i * dim_, dim_};
    }
    void set(std::size_t i, std::span<const double> p);
    void push_back(std::span<const double> p);
    void push_back(double x) { push_back(std::span<const double>(&x, 1)); }
    void resize(std::size_t n) { data_.resize(n * dim_); }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t dim_;
    std::vector<double> data_;
};

class Kernel {
public:
    enum class Kind { Gaussian, Linear, Custom };
    using Function = std::function<double(std::span<const double>, std::span<const double>)>;

    // exp(-|x - y|^2 / (2 bandwidth^2)).
    static Kernel gaussian(double bandwidth);
    static Kernel linear();
    // Caller guarantees symmetry and positive definiteness.
    static Kernel custom(std::string name, Function f);

    double operator()(std::span<const double> a, std::span<const double> b) const;

    Kind kind() const noexcept { return kind_; }
    double bandwidth() const noexcept { return bandwidth_; }
    std::string name() const;
    // Elementary steps charged per evaluation at dimension d.
    std::uint64_t cost(std::size_t d) const noexcept { return 3 * d + 2; }

private:
    Kind kind_ = Kind::Linear;
    double bandwidth_ = 0.0;
    double neg_inv_two_bw2_ = 0.0;
    std::string name_;
    Function custom_;
};

// Median pairwise Euclidean distance over the first `max_points` points.
double median_heuristic_bandwidth(const PointSet& points, std::size_t max_points = 500);

// Unbiased MMD^2: (1/(n(n-1))) sum_{i!=j} [k(xi,xj) + k(yi,yj) - k(xi,yj) - k(yi,xj)].
double mmd_u(const PointSet& x, const PointSet& y, const Kernel& kernel);

// k(x,x') + k(y,y') - k(x,y') + k(y,x'), with the sign of the last term as
// printed in the source formula. The scan itself uses h_pair.
double h_term(std::span<const double> x, std::span<const double> x2, std::span<const double> y,
              std::span<const double> y2, const Kernel& kernel);

// k(x,x') + k(y,y') - k(x,y') - k(y,x'): the summand of mmd_u for one ordered pair.
double h_pair(std::span<const double> x, std::span<const double> x2, std::span<const double> y,
              std::span<const double> y2, const Kernel& kernel);

struct ScanConfig {
    std::size_t block = 50;       // B
    std::size_t blocks = 5;       // N
    std::size_t variance_reps = 500;
    std::uint64_t seed = 0;
    bool recycle_pool = true;     // wrap the pool cursor instead of failing
};

// sd of Z = mean_i MMD_u(X, Y_i) with X and every Y_i drawn without
// replacement from the pool. Throws NumericError for a degenerate pool.
double estimate_null_sd(const PointSet& pool, const ScanConfig& config, const Kernel& kernel);

// Recent-block versus N reference-block scan with O(NB) recursive updates.
class ScanState {
public:
    ScanState(std::shared_ptr<const PointSet> pool, ScanConfig config, Kernel kernel,
              std::optional<double> null_sd = std::nullopt);

    // Returns T_t = Z_t / sd0, or kInactive until B test samples are held.
    double update(std::span<const double> x);
    void reset();

    double z() const noexcept { return z_; }
    double null_sd() const noexcept { return null_sd_; }
    std::uint64_t ops() const noexcept { return ops_; }
    std::uint64_t steps() const noexcept { return steps_; }
    std::size_t dim() const noexcept { return pool_->dim(); }
    const ScanConfig& config() const noexcept { return config_; }
    const Kernel& kernel() const noexcept { return kernel_; }
    bool active() const noexcept { return filled_ == config_.block; }

    // Z recomputed from the current buffers by the direct mmd_u definition.
    double recompute_z() const;
    std::size_t state_bytes() const;

private:
    std::span<const double> draw_reference();
    void fill_reference_blocks();
    void full_accumulate();

    std::shared_ptr<const PointSet> pool_;
    ScanConfig config_;
    Kernel kernel_;
    double null_sd_ = 0.0;
    std::vector<std::uint32_t> order_;
    std::size_t cursor_ = 0;

    PointSet x_;
    std::vector<PointSet> y_;
    std::vector<double> acc_;  // per block sum over ordered pairs p != q of h_pair
    std::size_t head_ = 0;     // ring position of the oldest sample
    std::size_t filled_ = 0;
    double z_ = 0.0;
    std::uint64_t ops_ = 0;
    std::uint64_t steps_ = 0;
};

// First t with T_t > b over a recorded trajectory.
AlarmResult mmd_stop(std::span<const double> trajectory, double b);

// Univariate adapter so the scan can run through the common harness.
class MmdDetector final : public Detector {
public:
    explicit MmdDetector(ScanState state);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "mmd"; }
    Robustness robustness() const override { return Robustness::Nonparametric; }
    std::size_t state_bytes() const override { return state_.state_bytes(); }
    const ScanState& state() const noexcept { return state_; }

private:
    ScanState state_;
    std::uint64_t reported_ops_ = 0;
};

}  // namespace cpd
