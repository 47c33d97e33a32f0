#include "omt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <fmt/format.h>

#include "omt/rng.hpp"

namespace omt {

// ---------------------------------------------------------------- CBR

CbrModel CbrModel::fit(const Dataset& train) {
    if (train.rows() == 0) throw std::invalid_argument("CBR: empty training set");
    CbrModel m;
    for (const auto& f : train.features()) m.kinds_.push_back(f.kind);
    m.imputer_ = Imputer::fit(train);
    const Dataset filled = m.imputer_.apply(train);
    m.scaler_ = MinMaxScaler::fit(filled);
    const Dataset scaled = m.scaler_.transform(filled);
    for (std::size_t r = 0; r < scaled.rows(); ++r) {
        const auto row = scaled.row(r);
        m.cells_.insert(m.cells_.end(), row.begin(), row.end());
    }
    m.effort_.assign(train.efforts().begin(), train.efforts().end());
    return m;
}

std::vector<double> CbrModel::normalize(std::span<const double> instance) const {
    std::vector<double> x(instance.begin(), instance.end());
    imputer_.apply(x);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = scaler_.transform(j, x[j]);
    return x;
}

std::size_t CbrModel::nearest(std::span<const double> instance) const {
    const std::vector<double> x = normalize(instance);
    const std::size_t p = kinds_.size();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < effort_.size(); ++r) {
        const double* row = cells_.data() + r * p;
        double d = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (kinds_[j] == FeatureKind::categorical) {
                d += row[j] != x[j] ? 1.0 : 0.0;
            } else {
                const double diff = row[j] - x[j];
                d += diff * diff;
            }
        }
        if (d < best_d) {
            best_d = d;
            best = r;
        }
    }
    return best;
}

double CbrModel::predict(std::span<const double> instance) const { return effort_[nearest(instance)]; }

double CbrModel::predict(const Dataset& data, std::size_t row) const { return predict(data.row(row)); }

// ---------------------------------------------------------------- SWR

namespace {

double log_feature(double x) { return std::log1p(std::max(x, 0.0)); }

struct LogDesign {
    Eigen::MatrixXd z;  // n x p, log-transformed numeric candidates
    Eigen::VectorXd y;
};

struct SubsetFit {
    Eigen::VectorXd beta;  // intercept first
    double rss = 0.0;
};

SubsetFit fit_subset(const LogDesign& d, const std::vector<std::size_t>& cols) {
    const auto n = d.y.size();
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size()) + 1);
    x.col(0).setOnes();
    for (std::size_t c = 0; c < cols.size(); ++c) {
        x.col(static_cast<Eigen::Index>(c) + 1) = d.z.col(static_cast<Eigen::Index>(cols[c]));
    }
    SubsetFit fit;
    fit.beta = x.colPivHouseholderQr().solve(d.y);
    fit.rss = (d.y - x * fit.beta).squaredNorm();
    return fit;
}

// Upper-tail p-value of the partial F statistic for one extra parameter.
double partial_f_p(double rss_reduced, double rss_full, double df_full, double tol) {
    const double gain = rss_reduced - rss_full;
    if (gain <= tol) return 1.0;
    if (rss_full <= tol) return 0.0;
    const double f = gain / (rss_full / df_full);
    const boost::math::fisher_f_distribution<double> dist(1.0, df_full);
    return boost::math::cdf(boost::math::complement(dist, f));
}

}  // namespace

SwrModel SwrModel::fit(const Dataset& train, const SwrConfig& cfg) {
    const std::size_t n = train.rows();
    if (n == 0) throw std::invalid_argument("SWR: empty training set");
    SwrModel m;
    m.cfg_ = cfg;
    for (const auto& f : train.features()) m.names_.push_back(f.name);
    m.imputer_ = Imputer::fit(train);
    const Dataset filled = m.imputer_.apply(train);

    // Candidates: numeric, non-negative, not constant after the transform.
    std::vector<std::size_t> candidates;
    for (std::size_t j : filled.numeric_features()) {
        const auto col = filled.column(j);
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        if (*lo < 0.0 || !(log_feature(*hi) > log_feature(*lo))) continue;
        candidates.push_back(j);
    }

    LogDesign d;
    const auto rows = static_cast<Eigen::Index>(n);
    d.z.resize(rows, static_cast<Eigen::Index>(candidates.size()));
    d.y.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto i = static_cast<std::size_t>(r);
        d.y[r] = std::log1p(filled.effort(i));
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            d.z(r, static_cast<Eigen::Index>(c)) = log_feature(filled.value(i, candidates[c]));
        }
    }
    const double tss = (d.y.array() - d.y.mean()).square().sum();
    const double tol = 1e-12 * std::max(tss, 1.0);

    std::vector<std::size_t> active;  // positions in `candidates`
    std::set<std::vector<std::size_t>> visited{active};
    for (;;) {
        const SubsetFit current = fit_subset(d, active);
        const double df_next = static_cast<double>(n) - static_cast<double>(active.size() + 2);
        if (df_next < 1.0) break;
        double best_p = 1.0;
        std::size_t best_c = candidates.size();
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (std::find(active.begin(), active.end(), c) != active.end()) continue;
            auto trial = active;
            trial.push_back(c);
            const double p = partial_f_p(current.rss, fit_subset(d, trial).rss, df_next, tol);
            if (p < best_p) {
                best_p = p;
                best_c = c;
            }
        }
        if (best_c == candidates.size() || !(best_p < cfg.entry_p)) break;
        active.push_back(best_c);
        std::sort(active.begin(), active.end());

        for (;;) {
            const SubsetFit full = fit_subset(d, active);
            const double df_full = static_cast<double>(n) - static_cast<double>(active.size() + 1);
            double worst_p = 0.0;
            std::size_t worst = active.size();
            for (std::size_t a = 0; a < active.size(); ++a) {
                auto reduced = active;
                reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(a));
                const double p = partial_f_p(fit_subset(d, reduced).rss, full.rss, df_full, tol);
                if (p > worst_p) {
                    worst_p = p;
                    worst = a;
                }
            }
            if (worst == active.size() || !(worst_p > cfg.exit_p)) break;
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst));
        }
        if (!visited.insert(active).second) break;
    }

    const SubsetFit final_fit = fit_subset(d, active);
    m.intercept_ = final_fit.beta[0];
    for (std::size_t a = 0; a < active.size(); ++a) {
        m.selected_.push_back(candidates[active[a]]);
        m.coefficients_.push_back(final_fit.beta[static_cast<Eigen::Index>(a) + 1]);
    }
    return m;
}

double SwrModel::predict_log(std::span<const double> instance) const {
    std::vector<double> x(instance.begin(), instance.end());
    imputer_.apply(x);
    double y = intercept_;
    for (std::size_t a = 0; a < selected_.size(); ++a) y += coefficients_[a] * log_feature(x[selected_[a]]);
    return y;
}

double SwrModel::predict(std::span<const double> instance) const {
    return std::expm1(predict_log(instance));
}

double SwrModel::predict(const Dataset& data, std::size_t row) const { return predict(data.row(row)); }

std::vector<std::string> SwrModel::selected_names() const {
    std::vector<std::string> out;
    for (std::size_t j : selected_) out.push_back(names_[j]);
    return out;
}

double SwrModel::coefficient(std::size_t feature) const {
    for (std::size_t a = 0; a < selected_.size(); ++a) {
        if (selected_[a] == feature) return coefficients_[a];
    }
    return 0.0;
}

// ---------------------------------------------------------------- MLP

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

MlpNetwork MlpNetwork::random(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
    MlpNetwork net;
    net.inputs = inputs;
    net.hidden = hidden;
    net.weights.resize(net.weight_count());
    Rng rng(seed);
    for (double& w : net.weights) w = rng.uniform(-0.5, 0.5);
    return net;
}

double MlpNetwork::forward(std::span<const double> x) const {
    const std::size_t stride = inputs + 1;
    const double* v = weights.data() + hidden * stride;
    double z = v[hidden];
    for (std::size_t h = 0; h < hidden; ++h) {
        const double* w = weights.data() + h * stride;
        double a = w[inputs];
        for (std::size_t i = 0; i < inputs; ++i) a += w[i] * x[i];
        z += v[h] * sigmoid(a);
    }
    return sigmoid(z);
}

double MlpNetwork::loss(std::span<const double> x, std::span<const double> targets) const {
    double total = 0.0;
    for (std::size_t r = 0; r < targets.size(); ++r) {
        const double e = forward(x.subspan(r * inputs, inputs)) - targets[r];
        total += e * e;
    }
    return total / (2.0 * static_cast<double>(targets.size()));
}

std::vector<double> MlpNetwork::gradient(std::span<const double> x,
                                         std::span<const double> targets) const {
    const std::size_t stride = inputs + 1;
    const double* v = weights.data() + hidden * stride;
    std::vector<double> grad(weights.size(), 0.0);
    double* gv = grad.data() + hidden * stride;
    std::vector<double> act(hidden);
    const double scale = 1.0 / static_cast<double>(targets.size());
    for (std::size_t r = 0; r < targets.size(); ++r) {
        const double* xr = x.data() + r * inputs;
        double z = v[hidden];
        for (std::size_t h = 0; h < hidden; ++h) {
            const double* w = weights.data() + h * stride;
            double a = w[inputs];
            for (std::size_t i = 0; i < inputs; ++i) a += w[i] * xr[i];
            act[h] = sigmoid(a);
            z += v[h] * act[h];
        }
        const double o = sigmoid(z);
        const double delta_o = (o - targets[r]) * scale * o * (1.0 - o);
        for (std::size_t h = 0; h < hidden; ++h) {
            gv[h] += delta_o * act[h];
            const double delta_h = delta_o * v[h] * act[h] * (1.0 - act[h]);
            double* gw = grad.data() + h * stride;
            for (std::size_t i = 0; i < inputs; ++i) gw[i] += delta_h * xr[i];
            gw[inputs] += delta_h;
        }
        gv[hidden] += delta_o;
    }
    return grad;
}

namespace {

// The sigmoid output keeps the loss bounded even when weights blow up, so
// both are checked.
bool finite_state(const MlpNetwork& net, std::span<const double> x, std::span<const double> targets) {
    for (double w : net.weights) {
        if (!std::isfinite(w)) return false;
    }
    return std::isfinite(net.loss(x, targets));
}

}  // namespace

double MlpNetwork::train(std::span<const double> x, std::span<const double> targets,
                         const MlpConfig& cfg) {
    std::vector<double> velocity(weights.size(), 0.0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto grad = gradient(x, targets);
        for (std::size_t w = 0; w < weights.size(); ++w) {
            velocity[w] = cfg.momentum * velocity[w] - cfg.learning_rate * grad[w];
            weights[w] += velocity[w];
        }
        if (epoch % 100 == 99 && !finite_state(*this, x, targets)) {
            throw MlpDivergence(fmt::format("MLP diverged at epoch {}", epoch + 1));
        }
    }
    if (!finite_state(*this, x, targets)) throw MlpDivergence("MLP diverged: non-finite weights or loss");
    const double final_loss = loss(x, targets);
    return final_loss;
}

MlpEncoder MlpEncoder::fit(const Dataset& train) {
    MlpEncoder e;
    e.features_ = train.features();
    e.imputer_ = Imputer::fit(train);
    e.scaler_ = MinMaxScaler::fit(e.imputer_.apply(train));
    for (const auto& f : e.features_) {
        e.width_ += f.kind == FeatureKind::categorical ? f.levels.size() : 1;
    }
    return e;
}

std::vector<double> MlpEncoder::encode(std::span<const double> instance) const {
    std::vector<double> x(instance.begin(), instance.end());
    imputer_.apply(x);
    std::vector<double> out;
    out.reserve(width_);
    for (std::size_t j = 0; j < features_.size(); ++j) {
        if (features_[j].kind == FeatureKind::categorical) {
            for (std::size_t l = 0; l < features_[j].levels.size(); ++l) {
                out.push_back(static_cast<double>(l) == x[j] ? 1.0 : 0.0);
            }
        } else {
            out.push_back(scaler_.transform(j, x[j]));
        }
    }
    return out;
}

std::vector<double> MlpEncoder::encode(const Dataset& data) const {
    std::vector<double> out;
    out.reserve(data.rows() * width_);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto row = encode(data.row(r));
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

MlpModel MlpModel::fit(const Dataset& train, const MlpConfig& cfg, std::uint64_t seed) {
    if (train.rows() == 0) throw std::invalid_argument("MLP: empty training set");
    MlpModel m;
    m.encoder_ = MlpEncoder::fit(train);
    const auto x = m.encoder_.encode(train);
    const auto efforts = train.efforts();
    const auto [lo, hi] = std::minmax_element(efforts.begin(), efforts.end());
    m.target_min_ = *lo;
    m.target_max_ = *hi;
    const double range = m.target_max_ - m.target_min_;
    std::vector<double> t(efforts.size(), 0.0);
    if (range > 0.0) {
        for (std::size_t r = 0; r < t.size(); ++r) t[r] = (efforts[r] - m.target_min_) / range;
    }
    const std::size_t width = m.encoder_.width();
    const std::size_t hidden = cfg.hidden > 0 ? cfg.hidden : std::max<std::size_t>(2, (width + 1) / 2);
    m.net_ = MlpNetwork::random(width, hidden, seed);
    m.loss_ = m.net_.train(x, t, cfg);
    return m;
}

double MlpModel::predict(std::span<const double> instance) const {
    const auto x = encoder_.encode(instance);
    return target_min_ + net_.forward(x) * (target_max_ - target_min_);
}

double MlpModel::predict(const Dataset& data, std::size_t row) const { return predict(data.row(row)); }

}  // namespace omt
