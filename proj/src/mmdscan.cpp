#include "cpd/mmdscan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpd/rng.hpp"

namespace cpd {

PointSet::PointSet(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    if (dim == 0) {
        throw ParameterError("PointSet: dimension must be >= 1");
    }
    if (data_.size() % dim != 0) {
        throw InputError("PointSet: data length is not a multiple of the dimension");
    }
}

void PointSet::set(std::size_t i, std::span<const double> p) {
    if (p.size() != dim_) {
        throw InputError("PointSet: dimension mismatch");
    }
    std::copy(p.begin(), p.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
}

void PointSet::push_back(std::span<const double> p) {
    if (p.size() != dim_) {
        throw InputError("PointSet: dimension mismatch");
    }
    data_.insert(data_.end(), p.begin(), p.end());
}

Kernel Kernel::gaussian(double bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw ParameterError("gaussian kernel: bandwidth must be positive and finite");
    }
    Kernel k;
    k.kind_ = Kind::Gaussian;
    k.bandwidth_ = bandwidth;
    k.neg_inv_two_bw2_ = -0.5 / (bandwidth * bandwidth);
    return k;
}

Kernel Kernel::linear() {
    return Kernel{};
}

Kernel Kernel::custom(std::string name, Function f) {
    if (!f) {
        throw ParameterError("custom kernel: empty function");
    }
    Kernel k;
    k.kind_ = Kind::Custom;
    k.name_ = std::move(name);
    k.custom_ = std::move(f);
    return k;
}

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
    switch (kind_) {
        case Kind::Gaussian: {
            double d2 = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a[i] - b[i];
                d2 += d * d;
            }
            return std::exp(d2 * neg_inv_two_bw2_);
        }
        case Kind::Linear: {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                s += a[i] * b[i];
            }
            return s;
        }
        case Kind::Custom:
            return custom_(a, b);
    }
    return 0.0;
}

std::string Kernel::name() const {
    switch (kind_) {
        case Kind::Gaussian:
            return "gaussian";
        case Kind::Linear:
            return "linear";
        case Kind::Custom:
            return name_;
    }
    return "unknown";
}

double median_heuristic_bandwidth(const PointSet& points, std::size_t max_points) {
    const std::size_t n = std::min(points.size(), max_points);
    if (n < 2) {
        throw InputError("median heuristic: need at least two points");
    }
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < points.dim(); ++c) {
                const double d = points[i][c] - points[j][c];
                d2 += d * d;
            }
            dist.push_back(std::sqrt(d2));
        }
    }
    const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    double med = *mid;
    if (dist.size() % 2 == 0) {
        med = 0.5 * (med + *std::max_element(dist.begin(), mid));
    }
    if (!(med > 0.0)) {
        throw NumericError("median heuristic: pool has zero median distance");
    }
    return med;
}

double h_term(std::span<const double> x, std::span<const double> x2, std::span<const double> y,
              std::span<const double> y2, const Kernel& kernel) {
    return kernel(x, x2) + kernel(y, y2) - kernel(x, y2) + kernel(y, x2);
}

double h_pair(std::span<const double> x, std::span<const double> x2, std::span<const double> y,
              std::span<const double> y2, const Kernel& kernel) {
    return kernel(x, x2) + kernel(y, y2) - kernel(x, y2) - kernel(y, x2);
}

double mmd_u(const PointSet& x, const PointSet& y, const Kernel& kernel) {
    if (x.dim() != y.dim()) {
        throw InputError("mmd_u: dimension mismatch");
    }
    if (x.size() != y.size()) {
        throw InputError("mmd_u: samples must have equal size");
    }
    const std::size_t n = x.size();
    if (n < 2) {
        throw InputError("mmd_u: need at least two samples");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                s += kernel(x[i], x[j]) + kernel(y[i], y[j]) - kernel(x[i], y[j]) - kernel(y[i], x[j]);
            }
        }
    }
    return s / (static_cast<double>(n) * static_cast<double>(n - 1));
}

namespace {

void check_scan_config(const PointSet& pool, const ScanConfig& c) {
    if (c.block < 2) {
        throw ParameterError("scan: block size B must be >= 2");
    }
    if (c.blocks < 1) {
        throw ParameterError("scan: need at least one reference block");
    }
    if (pool.size() < c.blocks * c.block + c.block) {
        throw InputError("scan: pool must hold at least N*B + B samples");
    }
}

}  // namespace

double estimate_null_sd(const PointSet& pool, const ScanConfig& config, const Kernel& kernel) {
    check_scan_config(pool, config);
    if (config.variance_reps < 2) {
        throw ParameterError("scan: variance_reps must be >= 2");
    }
    const std::size_t b = config.block;
    const std::size_t need = b * (config.blocks + 1);
    Rng rng(substream_seed(config.seed, 1));
    std::vector<std::uint32_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0u);

    PointSet x(pool.dim());
    PointSet y(pool.dim());
    x.resize(b);
    y.resize(b);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t r = 0; r < config.variance_reps; ++r) {
        // Partial Fisher-Yates: the first `need` entries become a draw without replacement.
        for (std::size_t i = 0; i < need; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng.engine())]);
        }
        for (std::size_t p = 0; p < b; ++p) {
            x.set(p, pool[idx[p]]);
        }
        double z = 0.0;
        for (std::size_t blk = 0; blk < config.blocks; ++blk) {
            for (std::size_t p = 0; p < b; ++p) {
                y.set(p, pool[idx[b * (blk + 1) + p]]);
            }
            z += mmd_u(x, y, kernel);
        }
        z /= static_cast<double>(config.blocks);
        const double delta = z - mean;
        mean += delta / static_cast<double>(r + 1);
        m2 += delta * (z - mean);
    }
    const double var = m2 / static_cast<double>(config.variance_reps - 1);
    if (!(var > 0.0) || !std::isfinite(var)) {
        throw NumericError("scan: null variance of Z is zero; pool is degenerate");
    }
    return std::sqrt(var);
}

ScanState::ScanState(std::shared_ptr<const PointSet> pool, ScanConfig config, Kernel kernel,
                     std::optional<double> null_sd)
    : pool_(std::move(pool)), config_(config), kernel_(std::move(kernel)) {
    if (!pool_) {
        throw ParameterError("scan: missing reference pool");
    }
    check_scan_config(*pool_, config_);
    if (null_sd) {
        if (!(*null_sd > 0.0) || !std::isfinite(*null_sd)) {
            throw NumericError("scan: null standard deviation must be positive");
        }
        null_sd_ = *null_sd;
    } else {
        null_sd_ = estimate_null_sd(*pool_, config_, kernel_);
    }
    order_.resize(pool_->size());
    std::iota(order_.begin(), order_.end(), 0u);
    Rng rng(substream_seed(config_.seed, 0));
    std::shuffle(order_.begin(), order_.end(), rng.engine());
    reset();
}

std::span<const double> ScanState::draw_reference() {
    if (cursor_ == order_.size()) {
        if (!config_.recycle_pool) {
            throw StateError("scan: reference pool exhausted");
        }
        cursor_ = 0;
    }
    return (*pool_)[order_[cursor_++]];
}

void ScanState::fill_reference_blocks() {
    y_.assign(config_.blocks, PointSet(pool_->dim()));
    for (auto& blk : y_) {
        for (std::size_t p = 0; p < config_.block; ++p) {
            blk.push_back(draw_reference());
        }
    }
}

void ScanState::reset() {
    cursor_ = 0;
    head_ = 0;
    filled_ = 0;
    z_ = 0.0;
    x_ = PointSet(pool_->dim());
    x_.resize(config_.block);
    fill_reference_blocks();
    acc_.assign(config_.blocks, 0.0);
}

void ScanState::full_accumulate() {
    const std::size_t b = config_.block;
    for (std::size_t i = 0; i < config_.blocks; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < b; ++p) {
            for (std::size_t q = p + 1; q < b; ++q) {
                s += h_pair(x_[p], x_[q], y_[i][p], y_[i][q], kernel_);
            }
        }
        acc_[i] = 2.0 * s;
    }
    ops_ += config_.blocks * (b * (b - 1) / 2) * (4 * kernel_.cost(dim()) + 4);
}

double ScanState::update(std::span<const double> x) {
    if (x.size() != dim()) {
        throw InputError("scan: observation dimension mismatch");
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw InputError("scan: non-finite observation");
        }
    }
    ++steps_;
    const std::size_t b = config_.block;
    const double norm = static_cast<double>(b) * static_cast<double>(b - 1);
    if (filled_ < b) {
        x_.set(filled_++, x);
        ops_ += 1;
        if (filled_ < b) {
            return kInactive;
        }
        full_accumulate();
    } else {
        const std::size_t o = head_;
        const std::uint64_t per_pair = 2 * (4 * kernel_.cost(dim()) + 3);
        for (std::size_t i = 0; i < config_.blocks; ++i) {
            PointSet& yi = y_[i];
            double out = 0.0;
            for (std::size_t q = 0; q < b; ++q) {
                if (q != o) {
                    out += h_pair(x_[o], x_[q], yi[o], yi[q], kernel_);
                }
            }
            yi.set(o, draw_reference());
            double in = 0.0;
            for (std::size_t q = 0; q < b; ++q) {
                if (q != o) {
                    in += h_pair(x, x_[q], yi[o], yi[q], kernel_);
                }
            }
            acc_[i] += 2.0 * (in - out);
            ops_ += (b - 1) * per_pair + 3;
        }
        x_.set(o, x);
        head_ = (head_ + 1) % b;
    }
    double total = 0.0;
    for (double a : acc_) {
        total += a;
    }
    z_ = total / (norm * static_cast<double>(config_.blocks));
    ops_ += config_.blocks + 2;
    return z_ / null_sd_;
}

double ScanState::recompute_z() const {
    if (!active()) {
        throw StateError("scan: statistic not available during burn-in");
    }
    double z = 0.0;
    for (const auto& yi : y_) {
        z += mmd_u(x_, yi, kernel_);
    }
    return z / static_cast<double>(config_.blocks);
}

std::size_t ScanState::state_bytes() const {
    return (x_.data().size() + config_.blocks * config_.block * dim() + acc_.size()) *
           sizeof(double);
}

AlarmResult mmd_stop(std::span<const double> trajectory, double b) {
    if (std::isnan(b)) {
        throw ParameterError("mmd_stop: threshold is NaN");
    }
    AlarmResult r;
    r.threshold = b;
    r.rule = CrossingRule::Strict;
    for (std::size_t t = 0; t < trajectory.size(); ++t) {
        r.statistic = trajectory[t];
        if (crosses(r.statistic, b, r.rule)) {
            r.stopped = true;
            r.stop_time = t + 1;
            return r;
        }
    }
    r.stop_time = trajectory.size();
    return r;
}

MmdDetector::MmdDetector(ScanState state) : state_(std::move(state)) {
    if (state_.dim() != 1) {
        throw ParameterError("mmd detector: univariate streams only");
    }
}

double MmdDetector::update(double x) {
    const double t = state_.update(std::span<const double>(&x, 1));
    count(state_.ops() - reported_ops_);
    reported_ops_ = state_.ops();
    return emit(t);
}

void MmdDetector::reset() {
    state_.reset();
    statistic_ = kInactive;
}

std::unique_ptr<Detector> MmdDetector::clone() const {
    return std::make_unique<MmdDetector>(*this);
}

}  // namespace cpd
