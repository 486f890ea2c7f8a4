#include <algorithm>
#include <cmath>

#include "omega_grid/hybrid_engine.hpp"

namespace omega_grid::hybrid {

LoadGenerator LoadGenerator::constant(Vector value, grid::LoadBox box) {
    LoadGenerator gen;
    gen.kind_ = LoadKind::Constant;
    gen.constant_ = std::move(value);
    gen.box_ = std::move(box);
    gen.validate();
    return gen;
}

LoadGenerator LoadGenerator::sinusoid(std::vector<SinusoidChannel> channels, grid::LoadBox box) {
    LoadGenerator gen;
    gen.kind_ = LoadKind::Sinusoid;
    gen.channels_ = std::move(channels);
    gen.box_ = std::move(box);
    gen.validate();
    return gen;
}

LoadGenerator LoadGenerator::scripted(std::vector<double> times, std::vector<Vector> values,
                                      grid::LoadBox box) {
    LoadGenerator gen;
    gen.kind_ = LoadKind::Scripted;
    gen.times_ = std::move(times);
    gen.values_ = std::move(values);
    gen.box_ = std::move(box);
    gen.validate();
    return gen;
}

LoadGenerator LoadGenerator::time_scaled(double scale) const {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
        throw Error(ErrorKind::Domain, "load time scale must be finite and non-negative");
    }
    LoadGenerator copy = *this;
    copy.scale_ = scale_ * scale;
    return copy;
}

void LoadGenerator::validate() const {
    const auto m = box_.lower.size();
    if (box_.upper.size() != m || (box_.lower.array() > box_.upper.array()).any()) {
        throw Error(ErrorKind::Domain, "load box is malformed");
    }
    switch (kind_) {
        case LoadKind::Constant:
            if (constant_.size() != m) throw Error(ErrorKind::Dimension, "constant load dimension mismatch");
            if (!box_.contains(constant_)) throw Error(ErrorKind::Domain, "constant load lies outside the load box");
            break;
        case LoadKind::Sinusoid:
            if (static_cast<Eigen::Index>(channels_.size()) != m) {
                throw Error(ErrorKind::Dimension, "sinusoid load needs one channel per input");
            }
            for (Eigen::Index i = 0; i < m; ++i) {
                const auto& ch = channels_[static_cast<std::size_t>(i)];
                const double amp = std::abs(ch.amplitude);
                if (ch.offset - amp < box_.lower(i) - 1e-12 || ch.offset + amp > box_.upper(i) + 1e-12) {
                    throw Error(ErrorKind::Domain, "sinusoid channel " + std::to_string(i) +
                                                       " leaves the load box");
                }
            }
            break;
        case LoadKind::Scripted:
            if (times_.empty() || times_.size() != values_.size()) {
                throw Error(ErrorKind::Domain, "scripted load needs matching non-empty times and values");
            }
            for (std::size_t k = 0; k < times_.size(); ++k) {
                if (k > 0 && !(times_[k] > times_[k - 1])) {
                    throw Error(ErrorKind::Domain, "scripted load times must be strictly increasing");
                }
                if (values_[k].size() != m) throw Error(ErrorKind::Dimension, "scripted load dimension mismatch");
                if (!box_.contains(values_[k])) {
                    throw Error(ErrorKind::Domain, "scripted load sample lies outside the load box");
                }
            }
            break;
    }
}

Vector LoadGenerator::value(double t) const {
    const double s = scale_ * t;
    switch (kind_) {
        case LoadKind::Constant: return constant_;
        case LoadKind::Sinusoid: {
            Vector u(static_cast<Eigen::Index>(channels_.size()));
            for (std::size_t i = 0; i < channels_.size(); ++i) {
                const auto& ch = channels_[i];
                u(static_cast<Eigen::Index>(i)) = ch.offset + ch.amplitude * std::sin(ch.frequency * s + ch.phase);
            }
            return u;
        }
        case LoadKind::Scripted: {
            if (s <= times_.front()) return values_.front();
            if (s >= times_.back()) return values_.back();
            const auto it = std::upper_bound(times_.begin(), times_.end(), s);
            const auto k = static_cast<std::size_t>(it - times_.begin());
            const double w = (s - times_[k - 1]) / (times_[k] - times_[k - 1]);
            return (1.0 - w) * values_[k - 1] + w * values_[k];
        }
    }
    return constant_;
}

Vector LoadGenerator::rate(double t) const {
    const auto m = box_.lower.size();
    if (scale_ == 0.0) return Vector::Zero(m);
    const double s = scale_ * t;
    switch (kind_) {
        case LoadKind::Constant: return Vector::Zero(m);
        case LoadKind::Sinusoid: {
            Vector du(m);
            for (std::size_t i = 0; i < channels_.size(); ++i) {
                const auto& ch = channels_[i];
                du(static_cast<Eigen::Index>(i)) =
                    scale_ * ch.amplitude * ch.frequency * std::cos(ch.frequency * s + ch.phase);
            }
            return du;
        }
        case LoadKind::Scripted: {
            if (s < times_.front() || s >= times_.back()) return Vector::Zero(m);
            const auto it = std::upper_bound(times_.begin(), times_.end(), s);
            const auto k = static_cast<std::size_t>(it - times_.begin());
            return scale_ * (values_[k] - values_[k - 1]) / (times_[k] - times_[k - 1]);
        }
    }
    return Vector::Zero(m);
}

double LoadGenerator::sup_norm() const {
    switch (kind_) {
        case LoadKind::Constant: return constant_.norm();
        case LoadKind::Sinusoid: {
            double sum = 0.0;
            for (const auto& ch : channels_) {
                const double peak = std::abs(ch.offset) + std::abs(ch.amplitude);
                sum += peak * peak;
            }
            return std::sqrt(sum);
        }
        case LoadKind::Scripted: {
            double best = 0.0;
            for (const auto& v : values_) best = std::max(best, v.norm());
            return best;
        }
    }
    return 0.0;
}

}  // namespace omega_grid::hybrid
