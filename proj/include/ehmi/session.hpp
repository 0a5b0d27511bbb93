#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ehmi/acquisition.hpp"
#include "ehmi/design_space.hpp"
#include "ehmi/error.hpp"
#include "ehmi/json_io.hpp"
#include "ehmi/objectives.hpp"
#include "ehmi/pareto.hpp"
#include "ehmi/surrogate.hpp"

namespace ehmi {

enum class Phase { Sampling, Optimization, Finished };

inline constexpr std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::Sampling: return "sampling";
    case Phase::Optimization: return "optimization";
    case Phase::Finished: return "finished";
    }
    return "unknown";
}

struct SessionConfig {
    AcquisitionConfig acquisition{};
    ItemScales scales{};
    int n_optimization = 15;
    int fit_restarts = 8;

    int total_iterations() const { return acquisition.n_sobol + n_optimization; }
};

inline void validate_config(const SessionConfig& c) {
    validate_config(c.acquisition);
    if (c.n_optimization < 0) throw Error(ErrorCode::ConfigInvalid, "n_optimization must be >= 0");
    if (c.fit_restarts < 1) throw Error(ErrorCode::ConfigInvalid, "fit_restarts must be >= 1");
    const ItemScales& s = c.scales;
    if (s.likert_lo >= s.likert_hi || s.demand_lo >= s.demand_hi || s.safety_lo >= s.safety_hi ||
        s.single_item_lo >= s.single_item_hi || !(s.t_max_s > 0.0))
        throw Error(ErrorCode::ConfigInvalid, "scale bounds must satisfy lo < hi");
}

inline Json to_json(const SessionConfig& c) {
    return Json{{"acquisition", to_json(c.acquisition)},
                {"scales", to_json(c.scales)},
                {"n_optimization", c.n_optimization},
                {"fit_restarts", c.fit_restarts}};
}

inline SessionConfig session_config_from_json(const Json& j) {
    SessionConfig c;
    if (j.contains("acquisition")) c.acquisition = acquisition_from_json(j.at("acquisition"));
    if (j.contains("scales")) c.scales = scales_from_json(j.at("scales"));
    c.n_optimization = j.value("n_optimization", c.n_optimization);
    c.fit_restarts = j.value("fit_restarts", c.fit_restarts);
    return c;
}

/// How a design was produced, kept for the export log.
struct AcquisitionDiagnostics {
    std::string source = "sobol"; // "sobol" or "ehvi"
    double best_score = 0.0;
    int candidate_index = 0;
    std::string pool_hash;
    std::uint64_t seed = 0;
    std::vector<GPHyperparams> hyperparams;
};

inline Json to_json(const AcquisitionDiagnostics& d) {
    Json j{{"source", d.source}};
    if (d.source == "ehvi") {
        j["best_score"] = d.best_score;
        j["candidate_index"] = d.candidate_index;
        j["pool_hash"] = d.pool_hash;
        j["seed"] = d.seed;
        Json hps = Json::array();
        for (const auto& hp : d.hyperparams) {
            Json ls = Json::array();
            for (Eigen::Index i = 0; i < hp.lengthscales.size(); ++i) ls.push_back(hp.lengthscales(i));
            hps.push_back(Json{{"lengthscales", ls},
                               {"signal_variance", hp.signal_variance},
                               {"noise_variance", hp.noise_variance}});
        }
        j["hyperparams"] = hps;
    }
    return j;
}

struct IterationRecord {
    int iteration = 0; // 1-based
    Phase phase = Phase::Sampling;
    DesignParams design;
    QuestionnaireResponse response;
    RawObjectives raw{};
    ObjectiveVector objectives{};
    AcquisitionDiagnostics diagnostics;
};

struct SubmitResult {
    bool finished = false;
    bool stopped_early = false;
    std::optional<DesignParams> next_design;
};

/// One participant's optimization run: `n_sobol` shared sampling designs,
/// then EHVI-driven suggestions, until the iteration budget is spent or a
/// perfect rating arrives. Strictly serial: one pending design at a time.
class Session {
public:
    static Session start(const SessionConfig& config, std::string id = "session") {
        validate_config(config);
        Session s;
        s.id_ = std::move(id);
        s.config_ = config;
        s.sobol_ = sobol_designs(config.acquisition);
        s.pending_ = s.sobol_.front();
        s.pending_diag_ = AcquisitionDiagnostics{};
        return s;
    }

    const std::string& id() const noexcept { return id_; }
    const SessionConfig& config() const noexcept { return config_; }
    int iteration() const noexcept { return int(history_.size()); }
    bool stopped_early() const noexcept { return stopped_early_; }
    const std::vector<IterationRecord>& history() const noexcept { return history_; }
    const std::optional<DesignParams>& pending_design() const noexcept { return pending_; }
    const AcquisitionDiagnostics& pending_diagnostics() const noexcept { return pending_diag_; }

    Phase phase() const noexcept {
        if (finished_) return Phase::Finished;
        return iteration() < config_.acquisition.n_sobol ? Phase::Sampling : Phase::Optimization;
    }

    SubmitResult submit(const QuestionnaireResponse& response) {
        if (finished_) throw Error(ErrorCode::SessionFinished, "session " + id_ + " is finished");
        const RawObjectives raw = score_questionnaire(response, config_.scales);

        IterationRecord rec;
        rec.iteration = iteration() + 1;
        rec.phase = phase();
        rec.design = *pending_;
        rec.response = response;
        rec.raw = raw;
        rec.objectives = normalize_all(raw, default_scale_specs(config_.scales));
        rec.diagnostics = pending_diag_;
        history_.push_back(std::move(rec));

        SubmitResult result;
        if (is_perfect_rating(response, config_.scales)) {
            stopped_early_ = true;
            finish();
        } else if (iteration() >= config_.total_iterations()) {
            finish();
        } else if (iteration() < config_.acquisition.n_sobol) {
            pending_ = sobol_[std::size_t(iteration())];
            pending_diag_ = AcquisitionDiagnostics{};
        } else {
            optimize_next();
        }
        result.finished = finished_;
        result.stopped_early = stopped_early_;
        result.next_design = pending_;
        return result;
    }

    /// Current Pareto front over the normalized objectives (indices into history).
    ParetoFront front() const {
        if (history_.empty()) return ParetoFront{{}, default_reference_point(kNumObjectives)};
        std::vector<Point> pts;
        for (const auto& r : history_) pts.emplace_back(r.objectives.begin(), r.objectives.end());
        return pareto_front(pts);
    }

    /// One line-delimited JSON record per completed iteration. Contains no
    /// wall-clock data, so equal sessions export equal bytes.
    std::string export_records() const {
        std::string out;
        for (const auto& r : history_) {
            Json j{{"session_id", id_},
                   {"iteration", r.iteration},
                   {"phase", std::string(to_string(r.phase))},
                   {"params", to_json(r.design)},
                   {"response", to_json(r.response)},
                   {"raw", named(r.raw)},
                   {"objectives", named(r.objectives)},
                   {"acquisition", to_json(r.diagnostics)}};
            out += j.dump();
            out += '\n';
        }
        return out;
    }

private:
    void finish() {
        finished_ = true;
        pending_.reset();
        pending_diag_ = AcquisitionDiagnostics{};
    }

    void optimize_next() {
        const Eigen::Index n = Eigen::Index(history_.size());
        Eigen::MatrixXd X(n, Eigen::Index(kNumParams));
        Eigen::MatrixXd Y(n, Eigen::Index(kNumObjectives));
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& rec = history_[std::size_t(i)];
            for (std::size_t d = 0; d < kNumParams; ++d) X(i, Eigen::Index(d)) = rec.design[d];
            for (std::size_t o = 0; o < kNumObjectives; ++o) Y(i, Eigen::Index(o)) = rec.objectives[o];
        }
        const int round = iteration() - config_.acquisition.n_sobol;
        FitOptions fit;
        fit.restarts = config_.fit_restarts;
        fit.seed = mix_seed(config_.acquisition.seed, 0xF17000ull + std::uint64_t(round));
        const SurrogateModel model = SurrogateModel::fit(X, Y, fit);

        const ParetoFront pf = front();
        std::vector<DesignParams> pareto_designs;
        for (const auto& e : pf.points) pareto_designs.push_back(history_[e.index].design);
        const Suggestion s = suggest_next(model, pf, pareto_designs, config_.acquisition, round);

        pending_ = s.design;
        AcquisitionDiagnostics diag;
        diag.source = "ehvi";
        diag.best_score = s.best_score;
        diag.candidate_index = s.candidate_index;
        diag.pool_hash = s.pool_hash;
        diag.seed = s.seed;
        for (std::size_t o = 0; o < model.num_outputs(); ++o) diag.hyperparams.push_back(model.output(o).hyperparams());
        pending_diag_ = std::move(diag);
    }

    std::string id_;
    SessionConfig config_;
    std::vector<DesignParams> sobol_;
    std::vector<IterationRecord> history_;
    std::optional<DesignParams> pending_;
    AcquisitionDiagnostics pending_diag_;
    bool finished_ = false;
    bool stopped_early_ = false;
};

inline Session start_session(const SessionConfig& config, std::string id = "session") {
    return Session::start(config, std::move(id));
}

inline SubmitResult submit_rating(Session& session, const QuestionnaireResponse& response) {
    return session.submit(response);
}

inline std::string export_session(const Session& session) { return session.export_records(); }

inline std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, int(ms));
    return out;
}

/// Append-only event log of one session (`<dir>/<id>.jsonl`). Replaying the
/// logged ratings through a fresh Session reproduces its state exactly.
class SessionJournal {
public:
    SessionJournal(std::filesystem::path path) : path_(std::move(path)) {}

    const std::filesystem::path& path() const noexcept { return path_; }

    void session_started(const Session& s) {
        append(Json{{"event", "session_started"}, {"ts", iso8601_now()}, {"session_id", s.id()},
                    {"config", to_json(s.config())}});
        design_issued(s);
    }

    void design_issued(const Session& s) {
        if (!s.pending_design()) return;
        append(Json{{"event", "design_issued"},
                    {"ts", iso8601_now()},
                    {"iteration", s.iteration() + 1},
                    {"params", to_json(*s.pending_design())},
                    {"acquisition", to_json(s.pending_diagnostics())}});
    }

    void rating_received(int iteration, const QuestionnaireResponse& r) {
        append(Json{{"event", "rating_received"}, {"ts", iso8601_now()}, {"iteration", iteration}, {"response", to_json(r)}});
    }

    void session_finished(const Session& s) {
        append(Json{{"event", "session_finished"}, {"ts", iso8601_now()}, {"stopped_early", s.stopped_early()}});
    }

    /// Rebuilds a session from its log. A torn final line (crash mid-write) is
    /// ignored; any other malformed line, or an issued design that the replay
    /// does not reproduce, is a ParseError.
    static Session replay(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) lines.push_back(line);

        std::optional<Session> session;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            Json ev;
            try {
                ev = Json::parse(lines[i]);
            } catch (const Json::parse_error&) {
                if (i + 1 == lines.size()) break;
                throw Error(ErrorCode::ParseError, path.string() + ": malformed line " + std::to_string(i + 1));
            }
            const std::string kind = ev.value("event", "");
            if (kind == "session_started") {
                session = Session::start(session_config_from_json(ev.at("config")), ev.at("session_id").get<std::string>());
            } else if (!session) {
                throw Error(ErrorCode::ParseError, path.string() + ": log does not begin with session_started");
            } else if (kind == "design_issued") {
                if (!session->pending_design() || ev.at("iteration").get<int>() != session->iteration() + 1 ||
                    design_from_json(ev.at("params")) != *session->pending_design())
                    throw Error(ErrorCode::ParseError, path.string() + ": replay diverged at line " + std::to_string(i + 1));
            } else if (kind == "rating_received") {
                if (ev.at("iteration").get<int>() != session->iteration() + 1)
                    throw Error(ErrorCode::ParseError, path.string() + ": out-of-order rating at line " + std::to_string(i + 1));
                session->submit(response_from_json(ev.at("response")));
            }
        }
        if (!session) throw Error(ErrorCode::ParseError, path.string() + ": empty session log");
        return std::move(*session);
    }

private:
    void append(const Json& j) {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path_.string());
        out << j.dump() << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "write failed: " + path_.string());
    }

    std::filesystem::path path_;
};

} // namespace ehmi
