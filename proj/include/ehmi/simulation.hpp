#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ehmi/acquisition.hpp"
#include "ehmi/design_space.hpp"
#include "ehmi/objectives.hpp"
#include "ehmi/pareto.hpp"
#include "ehmi/session.hpp"
#include "ehmi/synthetic_user.hpp"

namespace ehmi {

/// One simulated participant run. `hypervolume[i]` is the hypervolume of the
/// front after i + 1 ratings.
struct SimulationRun {
    std::string method; // "mobo" or "random"
    std::vector<DesignParams> designs;
    std::vector<RawObjectives> raw;
    std::vector<ObjectiveVector> objectives;
    std::vector<double> hypervolume;
    bool stopped_early = false;
    std::string log; // JSONL export
};

inline double front_hypervolume(const std::vector<ObjectiveVector>& ys) {
    std::vector<Point> pts;
    for (const auto& y : ys) pts.emplace_back(y.begin(), y.end());
    return hypervolume(pareto_front(pts));
}

inline SimulationRun simulate_mobo(const SyntheticRater& rater, const SessionConfig& config, const std::string& id) {
    Session s = Session::start(config, id);
    SimulationRun run;
    run.method = "mobo";
    while (s.pending_design()) {
        const DesignParams d = *s.pending_design();
        s.submit(rate(rater, d, s.iteration() + 1));
        run.designs.push_back(d);
        run.raw.push_back(s.history().back().raw);
        run.objectives.push_back(s.history().back().objectives);
        run.hypervolume.push_back(front_hypervolume(run.objectives));
    }
    run.stopped_early = s.stopped_early();
    run.log = s.export_records();
    return run;
}

/// Baseline: the same number of ratings on independent uniform designs.
inline SimulationRun simulate_random(const SyntheticRater& rater, const SessionConfig& config, const std::string& id,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto specs = default_scale_specs(config.scales);
    SimulationRun run;
    run.method = "random";
    for (int it = 1; it <= config.total_iterations(); ++it) {
        std::vector<double> v(kNumParams);
        for (auto& x : v) x = unit(rng);
        const DesignParams d = validate_params(v);
        const QuestionnaireResponse r = rate(rater, d, it);
        const RawObjectives raw = score_questionnaire(r, config.scales);
        const ObjectiveVector y = normalize_all(raw, specs);
        run.designs.push_back(d);
        run.raw.push_back(raw);
        run.objectives.push_back(y);
        run.hypervolume.push_back(front_hypervolume(run.objectives));
        Json rec{{"session_id", id},
                 {"iteration", it},
                 {"phase", "random"},
                 {"params", to_json(d)},
                 {"response", to_json(r)},
                 {"raw", named(raw)},
                 {"objectives", named(y)}};
        run.log += rec.dump() + "\n";
    }
    return run;
}

} // namespace ehmi
