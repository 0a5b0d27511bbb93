#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "ehmi/error.hpp"

namespace ehmi {

inline constexpr std::size_t kNumObjectives = 7;

enum class Objective : std::size_t {
    Trust = 0,
    Predictability,
    MentalDemand,
    PerceivedSafety,
    Acceptance,
    Aesthetics,
    TimeToCross,
};

inline constexpr std::array<std::string_view, kNumObjectives> kObjectiveNames = {
    "trust", "predictability", "mental_demand", "perceived_safety",
    "acceptance", "aesthetics", "time_to_cross"};

/// Item-level answers of one questionnaire round plus the measured crossing time.
struct QuestionnaireResponse {
    std::array<int, 2> trust_items{};
    std::array<int, 4> predictability_items{}; // items 3 and 4 are inverse-coded
    int mental_demand = 1;
    std::array<int, 4> safety_items{};
    int usefulness = 1;
    int satisfaction = 1;
    int visual_appeal = 1;
    double time_to_cross_s = 0.0;

    friend bool operator==(const QuestionnaireResponse&, const QuestionnaireResponse&) = default;
};

/// Bounds of the discrete rating scales. The usefulness / satisfaction /
/// visual-appeal items default to 7 points; set `single_item_hi = 5` to
/// reproduce a 5-point variant.
struct ItemScales {
    int likert_lo = 1, likert_hi = 5;
    int demand_lo = 1, demand_hi = 20;
    int safety_lo = -3, safety_hi = 3;
    int single_item_lo = 1, single_item_hi = 7;
    double t_max_s = 60.0;
};

enum class Direction { Maximize, Minimize };

struct ScaleSpec {
    double lo = 0;
    double hi = 1;
    Direction direction = Direction::Maximize;
};

using RawObjectives = std::array<double, kNumObjectives>;

/// Seven normalized objectives in [-1,1], all oriented so larger is better.
using ObjectiveVector = std::array<double, kNumObjectives>;

using ScaleSpecs = std::array<ScaleSpec, kNumObjectives>;

inline ScaleSpecs default_scale_specs(const ItemScales& s = {}) {
    const double lik_lo = s.likert_lo, lik_hi = s.likert_hi;
    return {{
        {lik_lo, lik_hi, Direction::Maximize},
        {lik_lo, lik_hi, Direction::Maximize},
        {double(s.demand_lo), double(s.demand_hi), Direction::Minimize},
        {double(s.safety_lo), double(s.safety_hi), Direction::Maximize},
        {double(s.single_item_lo), double(s.single_item_hi), Direction::Maximize},
        {double(s.single_item_lo), double(s.single_item_hi), Direction::Maximize},
        {0.0, s.t_max_s, Direction::Minimize},
    }};
}

namespace detail {

inline void check_item(int v, int lo, int hi, std::string_view name) {
    if (v < lo || v > hi) {
        throw Error(ErrorCode::ScaleViolation, std::string(name) + " = " + std::to_string(v) +
                                                   " outside [" + std::to_string(lo) + "," +
                                                   std::to_string(hi) + "]");
    }
}

template <std::size_t N>
double mean(const std::array<double, N>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s / double(N);
}

} // namespace detail

inline void validate_response(const QuestionnaireResponse& r, const ItemScales& s = {}) {
    for (int v : r.trust_items) detail::check_item(v, s.likert_lo, s.likert_hi, "trust item");
    for (int v : r.predictability_items)
        detail::check_item(v, s.likert_lo, s.likert_hi, "predictability item");
    detail::check_item(r.mental_demand, s.demand_lo, s.demand_hi, "mental_demand");
    for (int v : r.safety_items) detail::check_item(v, s.safety_lo, s.safety_hi, "safety item");
    detail::check_item(r.usefulness, s.single_item_lo, s.single_item_hi, "usefulness");
    detail::check_item(r.satisfaction, s.single_item_lo, s.single_item_hi, "satisfaction");
    detail::check_item(r.visual_appeal, s.single_item_lo, s.single_item_hi, "visual_appeal");
    if (!std::isfinite(r.time_to_cross_s) || r.time_to_cross_s < 0.0) {
        throw Error(ErrorCode::ScaleViolation, "time_to_cross_s must be finite and >= 0");
    }
}

inline RawObjectives score_questionnaire(const QuestionnaireResponse& r, const ItemScales& s = {}) {
    validate_response(r, s);
    const int reverse_base = s.likert_lo + s.likert_hi;
    const auto& p = r.predictability_items;
    RawObjectives raw{};
    raw[0] = detail::mean(std::array<double, 2>{double(r.trust_items[0]), double(r.trust_items[1])});
    raw[1] = detail::mean(std::array<double, 4>{double(p[0]), double(p[1]),
                                                double(reverse_base - p[2]),
                                                double(reverse_base - p[3])});
    raw[2] = r.mental_demand;
    raw[3] = detail::mean(std::array<double, 4>{double(r.safety_items[0]), double(r.safety_items[1]),
                                                double(r.safety_items[2]), double(r.safety_items[3])});
    raw[4] = (double(r.usefulness) + double(r.satisfaction)) / 2.0;
    raw[5] = r.visual_appeal;
    raw[6] = r.time_to_cross_s;
    return raw;
}

/// Affine map of [lo,hi] onto [-1,1], sign-flipped for minimized scales.
/// Inputs outside [lo,hi] are clamped first.
inline double normalize(double raw, const ScaleSpec& spec) {
    const double x = std::clamp(raw, spec.lo, spec.hi);
    const double v = 2.0 * (x - spec.lo) / (spec.hi - spec.lo) - 1.0;
    return spec.direction == Direction::Minimize ? -v : v;
}

inline ObjectiveVector normalize_all(const RawObjectives& raw, const ScaleSpecs& specs) {
    ObjectiveVector out{};
    for (std::size_t i = 0; i < kNumObjectives; ++i) out[i] = normalize(raw[i], specs[i]);
    return out;
}

inline ObjectiveVector to_objectives(const QuestionnaireResponse& r, const ItemScales& s = {}) {
    return normalize_all(score_questionnaire(r, s), default_scale_specs(s));
}

/// Highest rating on every subjective item and lowest mental demand.
/// Inverse-coded predictability items are perfect at the scale minimum.
/// Crossing time is measured, not rated, so it does not take part.
inline bool is_perfect_rating(const QuestionnaireResponse& r, const ItemScales& s = {}) {
    validate_response(r, s);
    const auto all_at = [](const auto& items, int v) {
        return std::all_of(items.begin(), items.end(), [v](int x) { return x == v; });
    };
    const auto& p = r.predictability_items;
    return all_at(r.trust_items, s.likert_hi) && p[0] == s.likert_hi && p[1] == s.likert_hi &&
           p[2] == s.likert_lo && p[3] == s.likert_lo && r.mental_demand == s.demand_lo &&
           all_at(r.safety_items, s.safety_hi) && r.usefulness == s.single_item_hi &&
           r.satisfaction == s.single_item_hi && r.visual_appeal == s.single_item_hi;
}

/// Response with every item at its best value.
inline QuestionnaireResponse perfect_response(double time_to_cross_s, const ItemScales& s = {}) {
    QuestionnaireResponse r;
    r.trust_items = {s.likert_hi, s.likert_hi};
    r.predictability_items = {s.likert_hi, s.likert_hi, s.likert_lo, s.likert_lo};
    r.mental_demand = s.demand_lo;
    r.safety_items = {s.safety_hi, s.safety_hi, s.safety_hi, s.safety_hi};
    r.usefulness = r.satisfaction = r.visual_appeal = s.single_item_hi;
    r.time_to_cross_s = time_to_cross_s;
    return r;
}

} // namespace ehmi
