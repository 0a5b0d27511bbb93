#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "ehmi/acquisition.hpp"
#include "ehmi/design_space.hpp"
#include "ehmi/error.hpp"
#include "ehmi/objectives.hpp"

namespace ehmi {

using Json = nlohmann::ordered_json;

inline Json to_json(const DesignParams& p) {
    Json arr = Json::array();
    for (double x : p.values()) arr.push_back(x);
    return arr;
}

inline DesignParams design_from_json(const Json& j) {
    if (!j.is_array()) throw Error(ErrorCode::SchemaError, "design must be an array of 9 numbers");
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) throw Error(ErrorCode::SchemaError, "design components must be numbers");
        v.push_back(x.get<double>());
    }
    return validate_params(v);
}

inline Json to_json(const EhmiRendering& r) {
    return Json{{"color", {{"r", r.color.r}, {"g", r.color.g}, {"b", r.color.b}, {"a", r.color.a}}},
                {"blink_hz", r.blink_hz},
                {"rect", {{"center_u", r.rect.center_u}, {"center_v", r.rect.center_v}, {"w", r.rect.w}, {"h", r.rect.h}}},
                {"loudness", r.loudness}};
}

inline Json to_json(const QuestionnaireResponse& r) {
    return Json{{"trust_items", r.trust_items},
                {"predictability_items", r.predictability_items},
                {"mental_demand", r.mental_demand},
                {"safety_items", r.safety_items},
                {"usefulness", r.usefulness},
                {"satisfaction", r.satisfaction},
                {"visual_appeal", r.visual_appeal},
                {"time_to_cross_s", r.time_to_cross_s}};
}

namespace detail {

template <std::size_t N>
std::array<int, N> int_items(const Json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::ScaleViolation, std::string("missing item: ") + key);
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != N)
        throw Error(ErrorCode::ScaleViolation, std::string(key) + " needs " + std::to_string(N) + " items");
    std::array<int, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        if (!a[i].is_number_integer()) throw Error(ErrorCode::ScaleViolation, std::string(key) + " items must be integers");
        out[i] = a[i].get<int>();
    }
    return out;
}

inline int int_item(const Json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::ScaleViolation, std::string("missing item: ") + key);
    if (!j.at(key).is_number_integer()) throw Error(ErrorCode::ScaleViolation, std::string(key) + " must be an integer");
    return j.at(key).get<int>();
}

} // namespace detail

/// Parses a flat questionnaire payload. Missing or mistyped items are scale
/// violations; nothing is imputed.
inline QuestionnaireResponse response_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ScaleViolation, "questionnaire payload must be an object");
    QuestionnaireResponse r;
    r.trust_items = detail::int_items<2>(j, "trust_items");
    r.predictability_items = detail::int_items<4>(j, "predictability_items");
    r.mental_demand = detail::int_item(j, "mental_demand");
    r.safety_items = detail::int_items<4>(j, "safety_items");
    r.usefulness = detail::int_item(j, "usefulness");
    r.satisfaction = detail::int_item(j, "satisfaction");
    r.visual_appeal = detail::int_item(j, "visual_appeal");
    if (!j.contains("time_to_cross_s") || !j.at("time_to_cross_s").is_number())
        throw Error(ErrorCode::ScaleViolation, "missing item: time_to_cross_s");
    r.time_to_cross_s = j.at("time_to_cross_s").get<double>();
    return r;
}

inline Json to_json(const AcquisitionConfig& c) {
    return Json{{"n_sobol", c.n_sobol},
                {"n_candidates", c.n_candidates},
                {"n_mc_samples", c.n_mc_samples},
                {"q", c.q},
                {"seed", c.seed},
                {"perturbation_sd", c.perturbation_sd}};
}

inline AcquisitionConfig acquisition_from_json(const Json& j) {
    AcquisitionConfig c;
    c.n_sobol = j.value("n_sobol", c.n_sobol);
    c.n_candidates = j.value("n_candidates", c.n_candidates);
    c.n_mc_samples = j.value("n_mc_samples", c.n_mc_samples);
    c.q = j.value("q", c.q);
    c.seed = j.value("seed", c.seed);
    c.perturbation_sd = j.value("perturbation_sd", c.perturbation_sd);
    return c;
}

inline Json to_json(const ItemScales& s) {
    return Json{{"likert", {s.likert_lo, s.likert_hi}},
                {"demand", {s.demand_lo, s.demand_hi}},
                {"safety", {s.safety_lo, s.safety_hi}},
                {"single_item", {s.single_item_lo, s.single_item_hi}},
                {"t_max_s", s.t_max_s}};
}

inline ItemScales scales_from_json(const Json& j) {
    ItemScales s;
    auto pair = [&j](const char* key, int& lo, int& hi) {
        if (!j.contains(key)) return;
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 2) throw Error(ErrorCode::ConfigInvalid, std::string(key) + " must be [lo, hi]");
        lo = a[0].get<int>();
        hi = a[1].get<int>();
        if (lo >= hi) throw Error(ErrorCode::ConfigInvalid, std::string(key) + ": lo must be < hi");
    };
    pair("likert", s.likert_lo, s.likert_hi);
    pair("demand", s.demand_lo, s.demand_hi);
    pair("safety", s.safety_lo, s.safety_hi);
    pair("single_item", s.single_item_lo, s.single_item_hi);
    s.t_max_s = j.value("t_max_s", s.t_max_s);
    if (!(s.t_max_s > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t_max_s must be > 0");
    return s;
}

template <std::size_t N>
Json named(const std::array<double, N>& values) {
    Json o = Json::object();
    for (std::size_t i = 0; i < N; ++i) o[std::string(kObjectiveNames[i])] = values[i];
    return o;
}

} // namespace ehmi
