#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "omt/dataset.hpp"

namespace omt {

// ---------------------------------------------------------------- CBR

/// One-nearest-neighbour analogy estimator. Numeric features are min-max
/// scaled with training bounds; categorical features contribute a 0/1
/// mismatch to the squared distance.
class CbrModel {
public:
    CbrModel() = default;
    static CbrModel fit(const Dataset& train);

    /// Training row closest to the instance (lowest index on ties).
    std::size_t nearest(std::span<const double> instance) const;
    double predict(std::span<const double> instance) const;
    double predict(const Dataset& data, std::size_t row) const;

private:
    std::vector<double> normalize(std::span<const double> instance) const;

    std::vector<FeatureKind> kinds_;
    Imputer imputer_;
    MinMaxScaler scaler_;
    std::vector<double> cells_;  // normalized, row-major
    std::vector<double> effort_;
};

// ---------------------------------------------------------------- SWR

struct SwrConfig {
    double entry_p = 0.05;
    double exit_p = 0.10;
};

/// Stepwise regression on ln(x + 1)-transformed numeric features and effort.
/// Categorical features are not candidates.
class SwrModel {
public:
    SwrModel() = default;
    static SwrModel fit(const Dataset& train, const SwrConfig& cfg = {});

    double predict(std::span<const double> instance) const;
    double predict(const Dataset& data, std::size_t row) const;
    /// Log-scale prediction before back-transformation.
    double predict_log(std::span<const double> instance) const;

    /// Selected feature indices, ascending.
    const std::vector<std::size_t>& selected() const { return selected_; }
    std::vector<std::string> selected_names() const;
    double intercept() const { return intercept_; }
    /// Log-scale coefficient of a feature, 0 when not selected.
    double coefficient(std::size_t feature) const;
    const SwrConfig& config() const { return cfg_; }

private:
    std::vector<std::string> names_;
    Imputer imputer_;
    SwrConfig cfg_;
    std::vector<std::size_t> selected_;
    std::vector<double> coefficients_;  // parallel to selected_
    double intercept_ = 0.0;
};

// ---------------------------------------------------------------- MLP

struct MlpConfig {
    std::size_t hidden = 0;  // 0 = max(2, ceil(inputs / 2))
    double learning_rate = 0.1;
    double momentum = 0.8;
    std::size_t epochs = 2000;
};

class MlpDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// inputs -> sigmoid hidden layer -> sigmoid output. Weights are stored flat:
/// hidden unit h uses weights[h*(inputs+1) .. +inputs] with its bias last,
/// followed by the hidden-to-output weights and the output bias.
struct MlpNetwork {
    std::size_t inputs = 0;
    std::size_t hidden = 0;
    std::vector<double> weights;

    static MlpNetwork random(std::size_t inputs, std::size_t hidden, std::uint64_t seed);
    std::size_t weight_count() const { return hidden * (inputs + 1) + hidden + 1; }

    double forward(std::span<const double> x) const;
    /// (1 / 2N) * sum (output - target)^2 over row-major `x` (N x inputs).
    double loss(std::span<const double> x, std::span<const double> targets) const;
    /// Analytic gradient of loss() with respect to `weights`.
    std::vector<double> gradient(std::span<const double> x, std::span<const double> targets) const;
    /// Batch gradient descent with momentum. Throws MlpDivergence on a
    /// non-finite loss or weight. Returns the final loss.
    double train(std::span<const double> x, std::span<const double> targets, const MlpConfig& cfg);
};

/// Encodes records as network inputs: numeric features min-max scaled with
/// training bounds, categorical features one-hot over the schema's levels.
class MlpEncoder {
public:
    MlpEncoder() = default;
    static MlpEncoder fit(const Dataset& train);

    std::size_t width() const { return width_; }
    std::vector<double> encode(std::span<const double> instance) const;
    std::vector<double> encode(const Dataset& data) const;  // row-major

private:
    std::vector<FeatureSchema> features_;
    Imputer imputer_;
    MinMaxScaler scaler_;
    std::size_t width_ = 0;
};

class MlpModel {
public:
    MlpModel() = default;
    static MlpModel fit(const Dataset& train, const MlpConfig& cfg, std::uint64_t seed);

    double predict(std::span<const double> instance) const;
    double predict(const Dataset& data, std::size_t row) const;

    const MlpNetwork& network() const { return net_; }
    double training_loss() const { return loss_; }

private:
    MlpEncoder encoder_;
    MlpNetwork net_;
    double target_min_ = 0.0;
    double target_max_ = 0.0;
    double loss_ = 0.0;
};

}  // namespace omt
