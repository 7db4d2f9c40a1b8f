#pragma once

#include <boost/random/normal_distribution.hpp>
#include <cstdint>
#include <random>

namespace msm {

std::uint64_t splitmix64(std::uint64_t x);

// Seed of substream `stream` under `base`; a pure function of the pair, so replications
// can be generated in any order.
std::uint64_t substream_seed(std::uint64_t base, std::uint64_t stream);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}
    double normal() { return normal_(eng_); }
    double uniform() { return std::generate_canonical<double, 53>(eng_); }

private:
    std::mt19937_64 eng_;
    boost::random::normal_distribution<double> normal_;
};

}  // namespace msm
