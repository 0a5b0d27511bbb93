#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ehmi/design_space.hpp"
#include "ehmi/error.hpp"
#include "ehmi/pareto.hpp"
#include "ehmi/sobol.hpp"
#include "ehmi/surrogate.hpp"

namespace ehmi {

struct AcquisitionConfig {
    int n_sobol = 5;
    int n_candidates = 2024;
    int n_mc_samples = 512;
    int q = 1;
    std::uint64_t seed = 0;
    double perturbation_sd = 0.05;
};

inline void validate_config(const AcquisitionConfig& c) {
    if (c.n_sobol < 1) throw Error(ErrorCode::ConfigInvalid, "n_sobol must be >= 1");
    if (c.n_candidates < 1) throw Error(ErrorCode::ConfigInvalid, "n_candidates must be >= 1");
    if (c.n_mc_samples < 1) throw Error(ErrorCode::ConfigInvalid, "n_mc_samples must be >= 1");
    if (c.q != 1) throw Error(ErrorCode::ConfigInvalid, "only q = 1 is supported");
    if (!(c.perturbation_sd >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "perturbation_sd must be >= 0");
}

/// The shared initial designs: Sobol points 1..n_sobol (the origin is skipped).
/// They depend on nothing but n_sobol, so every session sees the same list.
inline std::vector<DesignParams> sobol_designs(const AcquisitionConfig& config) {
    validate_config(config);
    const SobolSequence sobol(kNumParams);
    std::vector<DesignParams> out;
    for (int i = 1; i <= config.n_sobol; ++i) out.push_back(validate_params(sobol.point(std::uint64_t(i))));
    return out;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Monte Carlo EHVI for each row of `mean`/`sd` (independent Gaussian
/// marginals per objective). All rows share the same standard-normal base
/// samples drawn from `seed`, so scores are comparable across candidates.
inline std::vector<double> ehvi_from_marginals(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sd,
                                               const BoxDecomposition& dec, int n_mc, std::uint64_t seed) {
    if (n_mc < 1) throw Error(ErrorCode::ConfigInvalid, "n_mc must be >= 1");
    const Eigen::Index k = mean.cols();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd base(n_mc, k);
    for (Eigen::Index s = 0; s < n_mc; ++s)
        for (Eigen::Index o = 0; o < k; ++o) base(s, o) = normal(rng);

    std::vector<double> scores(std::size_t(mean.rows()), 0.0);
    Eigen::ArrayXd volume(n_mc);
    Eigen::ArrayXXd y(n_mc, k);
    for (Eigen::Index c = 0; c < mean.rows(); ++c) {
        for (Eigen::Index o = 0; o < k; ++o) y.col(o) = mean(c, o) + sd(c, o) * base.col(o).array();
        double total = 0.0;
        for (const Box& box : dec.boxes) {
            volume.setOnes();
            for (Eigen::Index o = 0; o < k; ++o) {
                const auto lo = box.lower[std::size_t(o)];
                const auto hi = box.upper[std::size_t(o)];
                volume *= (y.col(o).min(hi) - lo).max(0.0);
            }
            total += volume.sum();
        }
        scores[std::size_t(c)] = total / double(n_mc);
    }
    return scores;
}

inline std::vector<double> ehvi_scores(const SurrogateModel& model, const BoxDecomposition& dec,
                                       const Eigen::MatrixXd& candidates, int n_mc, std::uint64_t seed) {
    const MultiPosterior post = model.posterior(candidates, false);
    return ehvi_from_marginals(post.mean, post.variance.cwiseSqrt(), dec, n_mc, seed);
}

inline double ehvi_mc(const SurrogateModel& model, const BoxDecomposition& dec, const DesignParams& candidate,
                      int n_mc, std::uint64_t seed) {
    Eigen::MatrixXd x(1, Eigen::Index(kNumParams));
    for (std::size_t i = 0; i < kNumParams; ++i) x(0, Eigen::Index(i)) = candidate[i];
    return ehvi_scores(model, dec, x, n_mc, seed).front();
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// FNV-1a over the IEEE bit patterns of every candidate coordinate.
inline std::uint64_t pool_hash(const Eigen::MatrixXd& pool) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
        for (Eigen::Index j = 0; j < pool.cols(); ++j) {
            const auto bits = std::bit_cast<std::uint64_t>(pool(i, j));
            for (int byte = 0; byte < 8; ++byte) {
                h ^= (bits >> (8 * byte)) & 0xffu;
                h *= 0x100000001b3ull;
            }
        }
    }
    return h;
}

/// Candidate pool for optimization round `round` (0 for the first suggestion):
/// the first ceil(n/2) rows continue the Sobol sequence past the initial
/// designs, the rest perturb the current Pareto-optimal designs round-robin.
inline Eigen::MatrixXd candidate_pool(std::span<const DesignParams> pareto_designs, const AcquisitionConfig& config,
                                      int round) {
    validate_config(config);
    const int n_perturbed = pareto_designs.empty() ? 0 : config.n_candidates / 2;
    const int n_quasi = config.n_candidates - n_perturbed;
    const Eigen::Index d = Eigen::Index(kNumParams);
    Eigen::MatrixXd pool(config.n_candidates, d);

    const SobolSequence sobol(kNumParams);
    const std::uint64_t first = 1 + std::uint64_t(config.n_sobol) + std::uint64_t(round) * std::uint64_t(n_quasi);
    for (int i = 0; i < n_quasi; ++i) {
        const auto p = sobol.point(first + std::uint64_t(i));
        for (Eigen::Index j = 0; j < d; ++j) pool(i, j) = p[std::size_t(j)];
    }
    std::mt19937_64 rng(mix_seed(config.seed, 0x5eed0000ull + std::uint64_t(round)));
    std::normal_distribution<double> normal(0.0, config.perturbation_sd);
    for (int i = 0; i < n_perturbed; ++i) {
        const DesignParams& base = pareto_designs[std::size_t(i) % pareto_designs.size()];
        for (Eigen::Index j = 0; j < d; ++j)
            pool(n_quasi + i, j) = std::clamp(base[std::size_t(j)] + normal(rng), 0.0, 1.0);
    }
    return pool;
}

struct Suggestion {
    DesignParams design;
    int candidate_index = 0;
    double best_score = 0.0;
    std::string pool_hash;
    std::uint64_t seed = 0;
};

/// Highest-EHVI candidate of the round's pool; ties go to the lowest index.
inline Suggestion suggest_next(const SurrogateModel& model, const ParetoFront& front,
                               std::span<const DesignParams> pareto_designs, const AcquisitionConfig& config,
                               int round) {
    const Eigen::MatrixXd pool = candidate_pool(pareto_designs, config, round);
    const BoxDecomposition dec = box_decomposition(front);
    const std::uint64_t seed = mix_seed(config.seed, std::uint64_t(round));
    const std::vector<double> scores = ehvi_scores(model, dec, pool, config.n_mc_samples, seed);

    int best = 0;
    for (int i = 1; i < int(scores.size()); ++i)
        if (scores[std::size_t(i)] > scores[std::size_t(best)]) best = i;

    Suggestion s;
    std::vector<double> row(kNumParams);
    for (std::size_t j = 0; j < kNumParams; ++j) row[j] = pool(best, Eigen::Index(j));
    s.design = validate_params(row);
    s.candidate_index = best;
    s.best_score = scores[std::size_t(best)];
    s.pool_hash = hash_hex(pool_hash(pool));
    s.seed = seed;
    return s;
}

} // namespace ehmi
