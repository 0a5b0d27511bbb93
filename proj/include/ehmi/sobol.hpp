#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ehmi/error.hpp"

namespace ehmi {

/// Unscrambled Sobol sequence in up to 9 dimensions, Gray-code order.
///
/// Direction numbers are the Joe & Kuo (2008) "new-joe-kuo-6.21201" set,
/// the same table scipy and most BO toolkits use, so point k here equals
/// point k of those generators. Index 0 is the origin.
class SobolSequence {
public:
    static constexpr std::size_t kMaxDim = 9;
    static constexpr int kBits = 32;

    explicit SobolSequence(std::size_t dim) : dim_(dim) {
        if (dim == 0 || dim > kMaxDim) {
            throw Error(ErrorCode::ConfigInvalid, "Sobol dimension must be in [1,9]");
        }
        // {degree s, coefficient bits a, initial m_1..m_s}
        struct Poly {
            int s;
            unsigned a;
            std::array<std::uint32_t, 5> m;
        };
        static constexpr std::array<Poly, kMaxDim - 1> kPolys = {{
            {1, 0, {1}},
            {2, 1, {1, 3}},
            {3, 1, {1, 3, 1}},
            {3, 2, {1, 1, 1}},
            {4, 1, {1, 1, 3, 3}},
            {4, 4, {1, 3, 5, 13}},
            {5, 2, {1, 1, 5, 5, 17}},
            {5, 4, {1, 1, 5, 5, 5}},
        }};

        for (int i = 0; i < kBits; ++i) directions_[0][i] = std::uint32_t{1} << (kBits - 1 - i);
        for (std::size_t d = 1; d < dim_; ++d) {
            const Poly& poly = kPolys[d - 1];
            auto& v = directions_[d];
            for (int i = 0; i < poly.s; ++i) v[i] = poly.m[i] << (kBits - 1 - i);
            for (int i = poly.s; i < kBits; ++i) {
                v[i] = v[i - poly.s] ^ (v[i - poly.s] >> poly.s);
                for (int k = 1; k < poly.s; ++k) {
                    if ((poly.a >> (poly.s - 1 - k)) & 1u) v[i] ^= v[i - k];
                }
            }
        }
    }

    std::size_t dim() const noexcept { return dim_; }

    /// Point `index` of the sequence (index 0 is the origin).
    std::vector<double> point(std::uint64_t index) const {
        const std::uint64_t gray = index ^ (index >> 1);
        std::vector<double> out(dim_);
        for (std::size_t d = 0; d < dim_; ++d) {
            std::uint32_t x = 0;
            for (int bit = 0; bit < kBits; ++bit) {
                if ((gray >> bit) & 1u) x ^= directions_[d][bit];
            }
            out[d] = double(x) / 4294967296.0;
        }
        return out;
    }

    /// `count` consecutive points starting at `first`.
    std::vector<std::vector<double>> points(std::uint64_t first, std::size_t count) const {
        std::vector<std::vector<double>> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) out.push_back(point(first + i));
        return out;
    }

private:
    std::size_t dim_;
    std::array<std::array<std::uint32_t, kBits>, kMaxDim> directions_{};
};

} // namespace ehmi
