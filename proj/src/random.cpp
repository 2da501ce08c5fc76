#include "kaczmarz/random.hpp"

#include <cmath>
#include <utility>

namespace kz {

double NormalSampler::operator()(Xoshiro256& rng, double mean, double stddev) {
    if (spare_) {
        const double z = *spare_;
        spare_.reset();
        return mean + stddev * z;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
        u = 2.0 * rng.uniform() - 1.0;
        v = 2.0 * rng.uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    return mean + stddev * (u * factor);
}

void fisher_yates_shuffle(std::span<std::size_t> values, Xoshiro256& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = rng.index(i);
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace kz
