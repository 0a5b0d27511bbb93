#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ehmi/acquisition.hpp"
#include "ehmi/design_space.hpp"
#include "ehmi/objectives.hpp"

namespace ehmi {

/// Deterministic stand-in for a study participant. Each objective's latent
/// utility is a weighted quadratic bowl around `ideal_point`; crossing time
/// falls linearly with the design's salience.
struct SyntheticRater {
    std::array<double, kNumParams> ideal_point{};
    std::array<std::array<double, kNumParams>, kNumObjectives> weights{};
    double noise_sd = 0.0;
    double base_latency_s = 15.0;
    double salience_gain_s = 8.0;
    std::uint64_t seed = 0;
    ItemScales scales{};
};

inline SyntheticRater make_rater(const std::array<double, kNumParams>& ideal, double weight, std::uint64_t seed = 0) {
    SyntheticRater r;
    r.ideal_point = ideal;
    for (auto& row : r.weights) row.fill(weight);
    r.seed = seed;
    return r;
}

inline double salience(const EhmiRendering& rendering) {
    return (rendering.color.a + rendering.rect.w * rendering.rect.h + rendering.loudness) / 3.0;
}

inline double crossing_time(const SyntheticRater& rater, const EhmiRendering& rendering, double noise = 0.0) {
    return std::max(0.0, rater.base_latency_s - rater.salience_gain_s * salience(rendering) + noise);
}

inline double latent_utility(const SyntheticRater& rater, const DesignParams& params, std::size_t objective) {
    double penalty = 0.0;
    for (std::size_t d = 0; d < kNumParams; ++d) {
        const double diff = params[d] - rater.ideal_point[d];
        penalty += rater.weights[objective][d] * diff * diff;
    }
    return 1.0 - penalty;
}

namespace detail {

// Utility 1 maps to `best`, 0 to `worst`; rounded to the nearest item and clamped.
inline int utility_to_item(double u, int worst, int best) {
    const double x = double(worst) + u * double(best - worst);
    const long v = std::lround(x);
    return int(std::clamp<long>(v, std::min(worst, best), std::max(worst, best)));
}

} // namespace detail

inline QuestionnaireResponse rate(const SyntheticRater& rater, const DesignParams& params, int iteration) {
    std::mt19937_64 rng(mix_seed(rater.seed, std::uint64_t(iteration)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, kNumObjectives> u{};
    for (std::size_t o = 0; o < kNumObjectives; ++o) {
        const double eps = normal(rng);
        u[o] = latent_utility(rater, params, o) + rater.noise_sd * eps;
    }
    const double time_eps = normal(rng);

    const ItemScales& s = rater.scales;
    QuestionnaireResponse r;
    const int trust = detail::utility_to_item(u[0], s.likert_lo, s.likert_hi);
    r.trust_items = {trust, trust};
    const int pred = detail::utility_to_item(u[1], s.likert_lo, s.likert_hi);
    const int pred_inverse = s.likert_lo + s.likert_hi - pred;
    r.predictability_items = {pred, pred, pred_inverse, pred_inverse};
    r.mental_demand = detail::utility_to_item(u[2], s.demand_hi, s.demand_lo);
    const int safety = detail::utility_to_item(u[3], s.safety_lo, s.safety_hi);
    r.safety_items = {safety, safety, safety, safety};
    const int accept = detail::utility_to_item(u[4], s.single_item_lo, s.single_item_hi);
    r.usefulness = accept;
    r.satisfaction = accept;
    r.visual_appeal = detail::utility_to_item(u[5], s.single_item_lo, s.single_item_hi);
    r.time_to_cross_s = crossing_time(rater, resolve_geometry(params), rater.noise_sd * time_eps);
    return r;
}

/// Plain-config description of a batch of raters.
struct RaterPopulation {
    int count = 20;
    std::uint64_t seed = 1;
    double weight_lo = 0.2;
    double weight_hi = 0.6;
    double noise_sd = 0.0;
};

inline std::vector<SyntheticRater> make_population(const RaterPopulation& pop) {
    std::mt19937_64 rng(pop.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> weight(pop.weight_lo, pop.weight_hi);
    std::vector<SyntheticRater> out;
    for (int i = 0; i < pop.count; ++i) {
        SyntheticRater r;
        for (auto& x : r.ideal_point) x = unit(rng);
        for (auto& row : r.weights)
            for (auto& w : row) w = weight(rng);
        r.noise_sd = pop.noise_sd;
        r.seed = mix_seed(pop.seed, 1000 + std::uint64_t(i));
        out.push_back(r);
    }
    return out;
}

} // namespace ehmi
