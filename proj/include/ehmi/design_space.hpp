#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

#include "ehmi/error.hpp"

namespace ehmi {

inline constexpr std::size_t kNumParams = 9;

enum class Param : std::size_t {
    Red = 0,
    Green,
    Blue,
    Alpha,
    Blink,
    Width,
    Height,
    VerticalPosition,
    Loudness,
};

inline constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "red", "green", "blue", "alpha", "blink", "width", "height", "vertical_position", "loudness"};

/// A point of the eHMI design box [0,1]^9, in the fixed order p1..p9
/// (R, G, B, alpha, blink, width, height, vertical position, loudness).
///
/// Only validate_params() produces one from untrusted input, so holding a
/// DesignParams means every component is finite and inside [0,1].
class DesignParams {
public:
    DesignParams() { values_.fill(0.5); }

    double operator[](std::size_t i) const { return values_[i]; }
    double operator[](Param p) const { return values_[static_cast<std::size_t>(p)]; }

    const std::array<double, kNumParams>& values() const noexcept { return values_; }
    std::span<const double, kNumParams> span() const noexcept { return values_; }

    double r() const { return (*this)[Param::Red]; }
    double g() const { return (*this)[Param::Green]; }
    double b() const { return (*this)[Param::Blue]; }
    double alpha() const { return (*this)[Param::Alpha]; }
    double blink() const { return (*this)[Param::Blink]; }
    double width() const { return (*this)[Param::Width]; }
    double height() const { return (*this)[Param::Height]; }
    double vertical_position() const { return (*this)[Param::VerticalPosition]; }
    double loudness() const { return (*this)[Param::Loudness]; }

    friend bool operator==(const DesignParams&, const DesignParams&) = default;

private:
    explicit DesignParams(const std::array<double, kNumParams>& v) : values_(v) {}
    friend DesignParams validate_params(std::span<const double> raw);

    std::array<double, kNumParams> values_;
};

inline DesignParams validate_params(std::span<const double> raw) {
    if (raw.size() != kNumParams) {
        throw Error(ErrorCode::WrongArity,
                    "design needs " + std::to_string(kNumParams) + " components, got " +
                        std::to_string(raw.size()));
    }
    std::array<double, kNumParams> v{};
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const double x = raw[i];
        if (!std::isfinite(x)) {
            throw Error(ErrorCode::NotFinite, "p" + std::to_string(i + 1) + " is not finite");
        }
        if (x < 0.0 || x > 1.0) {
            throw Error(ErrorCode::OutOfRange,
                        "p" + std::to_string(i + 1) + " = " + std::to_string(x) + " outside [0,1]");
        }
        v[i] = x;
    }
    return DesignParams(v);
}

inline DesignParams validate_params(std::initializer_list<double> raw) {
    return validate_params(std::span<const double>(raw.begin(), raw.size()));
}

inline constexpr double kMaxBlinkHz = 4.0;

// Reciprocal form 1 / ((1/blink) * 0.25). blink = 0 means constantly on, reported as 0 Hz.
inline double blink_frequency_hz(double blink) {
    if (blink <= 0.0) return 0.0;
    return 1.0 / ((1.0 / blink) * 0.25);
}

struct Rgba {
    double r = 0, g = 0, b = 0, a = 0;
    friend bool operator==(const Rgba&, const Rgba&) = default;
};

/// Rectangle in normalized coordinates of the allowed front-face region.
/// The horizontal center is pinned to the vehicle's vertical axis.
struct Rect {
    double center_u = 0.5;
    double center_v = 0.5;
    double w = 0;
    double h = 0;
    friend bool operator==(const Rect&, const Rect&) = default;
};

struct EhmiRendering {
    Rgba color;
    double blink_hz = 0;
    Rect rect;
    double loudness = 0;
    friend bool operator==(const EhmiRendering&, const EhmiRendering&) = default;
};

inline EhmiRendering resolve_geometry(const DesignParams& p) {
    EhmiRendering out;
    out.color = {p.r(), p.g(), p.b(), p.alpha()};
    out.blink_hz = blink_frequency_hz(p.blink());
    out.rect.w = p.width();
    out.rect.h = p.height();
    const double half = p.height() / 2.0;
    out.rect.center_v = std::clamp(p.vertical_position(), half, 1.0 - half);
    out.loudness = p.loudness();
    return out;
}

} // namespace ehmi
