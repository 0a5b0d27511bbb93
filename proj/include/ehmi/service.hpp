#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ehmi/acquisition.hpp"
#include "ehmi/design_space.hpp"
#include "ehmi/error.hpp"
#include "ehmi/json_io.hpp"
#include "ehmi/pareto.hpp"
#include "ehmi/session.hpp"

// Must follow Eigen: <resolv.h> (pulled in by httplib) defines the macro _res.
#include <httplib.h>

namespace ehmi {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path store_dir = "sessions";
    std::chrono::seconds expiry{24 * 3600}; // idle time before a session is unloaded
    SessionConfig session{};
};

inline ServiceConfig service_config_from_json(const Json& j) {
    ServiceConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.store_dir = j.value("store_dir", c.store_dir.string());
    c.expiry = std::chrono::seconds(j.value("expiry_s", std::int64_t(c.expiry.count())));
    if (j.contains("session")) c.session = session_config_from_json(j.at("session"));
    validate_config(c.session);
    if (c.expiry.count() <= 0) throw Error(ErrorCode::ConfigInvalid, "expiry_s must be > 0");
    if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::ConfigInvalid, "port out of range");
    return c;
}

/// EHMI_PORT and EHMI_STORE take precedence over the config file.
inline void apply_env_overrides(ServiceConfig& c) {
    if (const char* p = std::getenv("EHMI_PORT"); p && *p) {
        try {
            c.port = std::stoi(p);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigInvalid, std::string("EHMI_PORT is not a number: ") + p);
        }
    }
    if (const char* s = std::getenv("EHMI_STORE"); s && *s) c.store_dir = s;
}

inline ServiceConfig load_service_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
    }
    ServiceConfig c = service_config_from_json(j);
    apply_env_overrides(c);
    return c;
}

inline std::string random_id() {
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    return hash_hex(rng());
}

/// Current state of a session as served to the client.
inline Json session_state(const Session& s) {
    Json design = nullptr;
    if (s.pending_design()) {
        design = Json{{"iteration", s.iteration() + 1},
                      {"params", to_json(*s.pending_design())},
                      {"rendering", to_json(resolve_geometry(*s.pending_design()))},
                      {"acquisition", to_json(s.pending_diagnostics())}};
    }
    return Json{{"session_id", s.id()},
                {"phase", std::string(to_string(s.phase()))},
                {"iteration", s.iteration()},
                {"total_iterations", s.config().total_iterations()},
                {"finished", s.phase() == Phase::Finished},
                {"stopped_early", s.stopped_early()},
                {"design", design}};
}

inline Json pareto_state(const Session& s) {
    const ParetoFront pf = s.front();
    Json pts = Json::array();
    for (const auto& e : pf.points) {
        const auto& rec = s.history()[e.index];
        pts.push_back(Json{{"iteration", rec.iteration},
                           {"params", to_json(rec.design)},
                           {"objectives", named(rec.objectives)}});
    }
    return Json{{"session_id", s.id()},
                {"reference_point", pf.reference_point},
                {"hypervolume", pf.points.empty() ? 0.0 : hypervolume(pf)},
                {"points", pts}};
}

/// In-memory sessions backed by one journal file each. Every mutation is
/// appended to the journal before it is acknowledged, so a restarted store
/// replays to the same state.
class SessionStore {
public:
    struct Entry {
        std::mutex mutex;
        Session session;
        SessionJournal journal;
        std::chrono::steady_clock::time_point last_access;

        Entry(Session s, SessionJournal j)
            : session(std::move(s)), journal(std::move(j)), last_access(std::chrono::steady_clock::now()) {}
    };

    SessionStore(std::filesystem::path dir, SessionConfig defaults, std::chrono::seconds expiry = std::chrono::hours(24))
        : dir_(std::move(dir)), defaults_(std::move(defaults)), expiry_(expiry) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string() + ": " + ec.message());
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

    /// Replays every journal in the store directory. Journals that fail to
    /// replay are reported on stderr and skipped.
    std::size_t load_all() {
        std::size_t loaded = 0;
        for (const auto& f : std::filesystem::directory_iterator(dir_)) {
            if (f.path().extension() != ".jsonl") continue;
            try {
                auto entry = load(f.path());
                std::lock_guard lock(mutex_);
                sessions_[entry->session.id()] = std::move(entry);
                ++loaded;
            } catch (const Error& e) {
                std::cerr << "warning: skipping " << f.path().string() << ": " << to_string(e.code()) << ": "
                          << e.what() << '\n';
            }
        }
        return loaded;
    }

    /// `overrides` may carry "session_id" and "seed"; anything else comes from
    /// the store defaults.
    std::shared_ptr<Entry> create(const Json& overrides = Json::object()) {
        SessionConfig config = defaults_;
        if (overrides.contains("seed")) {
            if (!overrides.at("seed").is_number_unsigned())
                throw Error(ErrorCode::ConfigInvalid, "seed must be a non-negative integer");
            config.acquisition.seed = overrides.at("seed").get<std::uint64_t>();
        }
        std::string id = overrides.contains("session_id") ? overrides.at("session_id").get<std::string>() : random_id();
        if (id.empty() || id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_") !=
                              std::string::npos)
            throw Error(ErrorCode::ConfigInvalid, "session_id must be non-empty [A-Za-z0-9_-]");

        std::lock_guard lock(mutex_);
        if (sessions_.count(id) || std::filesystem::exists(journal_path(id)))
            throw Error(ErrorCode::ConfigInvalid, "session " + id + " already exists");
        auto entry = std::make_shared<Entry>(Session::start(config, id), SessionJournal(journal_path(id)));
        entry->journal.session_started(entry->session);
        sessions_[id] = entry;
        return entry;
    }

    /// Looks a session up, reloading it from its journal if it was evicted.
    std::shared_ptr<Entry> find(const std::string& id) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = sessions_.find(id); it != sessions_.end()) {
                it->second->last_access = std::chrono::steady_clock::now();
                return it->second;
            }
        }
        const auto path = journal_path(id);
        if (id.find('/') != std::string::npos || !std::filesystem::exists(path))
            throw Error(ErrorCode::UnknownSession, "no session " + id);
        auto entry = load(path); // replay refits surrogates; other sessions stay responsive
        std::lock_guard lock(mutex_);
        return sessions_.try_emplace(id, std::move(entry)).first->second;
    }

    /// Unloads sessions idle for longer than the expiry. Their journals stay
    /// on disk, so a later request reloads them.
    std::size_t evict_expired(std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now()) {
        std::lock_guard lock(mutex_);
        std::size_t n = 0;
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            std::unique_lock entry_lock(it->second->mutex, std::try_to_lock);
            if (entry_lock.owns_lock() && now - it->second->last_access > expiry_) {
                entry_lock.unlock();
                it = sessions_.erase(it);
                ++n;
            } else {
                ++it;
            }
        }
        return n;
    }

    std::size_t loaded_count() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

    std::vector<std::string> ids() const {
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        for (const auto& [id, e] : sessions_) out.push_back(id);
        return out;
    }

    /// Records a rating and returns the new session state. `iteration`, when
    /// given, is the idempotency key: a rating for an iteration that is
    /// already recorded is rejected rather than applied twice.
    Json rate(const std::string& id, const QuestionnaireResponse& response, std::optional<int> iteration) {
        auto entry = find(id);
        std::lock_guard lock(entry->mutex);
        Session& s = entry->session;
        if (iteration) {
            if (*iteration >= 1 && *iteration <= s.iteration())
                throw Error(ErrorCode::DuplicateRating, "iteration " + std::to_string(*iteration) + " is already rated");
            if (*iteration != s.iteration() + 1)
                throw Error(ErrorCode::DuplicateRating, "expected a rating for iteration " +
                                                            std::to_string(s.iteration() + 1) + ", got " +
                                                            std::to_string(*iteration));
        }
        if (s.phase() == Phase::Finished) throw Error(ErrorCode::SessionFinished, "session " + id + " is finished");
        score_questionnaire(response, s.config().scales); // validate before anything is journaled
        entry->journal.rating_received(s.iteration() + 1, response);
        const SubmitResult r = s.submit(response);
        if (r.finished) {
            entry->journal.session_finished(s);
        } else {
            entry->journal.design_issued(s);
        }
        entry->last_access = std::chrono::steady_clock::now();
        return session_state(s);
    }

private:
    std::filesystem::path journal_path(const std::string& id) const { return dir_ / (id + ".jsonl"); }

    std::shared_ptr<Entry> load(const std::filesystem::path& path) const {
        Session s = SessionJournal::replay(path);
        return std::make_shared<Entry>(std::move(s), SessionJournal(path));
    }

    std::filesystem::path dir_;
    SessionConfig defaults_;
    std::chrono::seconds expiry_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

inline int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::DuplicateRating:
    case ErrorCode::SessionFinished: return 409;
    case ErrorCode::ScaleViolation:
    case ErrorCode::OutOfRange:
    case ErrorCode::NotFinite:
    case ErrorCode::WrongArity:
    case ErrorCode::SchemaError:
    case ErrorCode::ConfigInvalid:
    case ErrorCode::ParseError: return 422;
    default: return 500;
    }
}

/// HTTP front end over a SessionStore.
///
///   POST /sessions                 {"seed"?, "session_id"?}  -> 201 session state
///   GET  /sessions/{id}                                      -> session state
///   POST /sessions/{id}/rating     questionnaire, or {"iteration", "response"};
///                                  "iteration" is an optional idempotency key
///   GET  /sessions/{id}/pareto                               -> front + hypervolume
///   GET  /sessions/{id}/export                               -> JSONL records
class Service {
public:
    explicit Service(const ServiceConfig& config)
        : config_(config), store_(config.store_dir, config.session, config.expiry) {
        store_.load_all();
        routes();
    }

    SessionStore& store() noexcept { return store_; }
    httplib::Server& server() noexcept { return server_; }

    bool listen() { return server_.listen(config_.host, config_.port); }

    /// Binds an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any_port() { return server_.bind_to_any_port(config_.host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }

private:
    static void send_json(httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <class F>
    static void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const Error& e) {
            const int status = http_status(e.code());
            Json body{{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
            if (status == 500) body["diagnostic_id"] = log_internal(e.what());
            send_json(res, status, body);
        } catch (const Json::exception& e) {
            send_json(res, 422, Json{{"error", "SCHEMA_ERROR"}, {"message", e.what()}});
        } catch (const std::exception& e) {
            send_json(res, 500, Json{{"error", "INTERNAL"}, {"message", "internal error"},
                                     {"diagnostic_id", log_internal(e.what())}});
        }
    }

    static std::string log_internal(const std::string& what) {
        const std::string id = random_id();
        std::cerr << iso8601_now() << " error " << id << ": " << what << '\n';
        return id;
    }

    static Json parse_body(const httplib::Request& req) {
        if (req.body.empty()) return Json::object();
        try {
            return Json::parse(req.body);
        } catch (const Json::parse_error& e) {
            throw Error(ErrorCode::SchemaError, std::string("malformed JSON: ") + e.what());
        }
    }

    void routes() {
        server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                store_.evict_expired();
                auto entry = store_.create(parse_body(req));
                std::lock_guard lock(entry->mutex);
                send_json(res, 201, session_state(entry->session));
            });
        });
        server_.Get(R"(/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto entry = store_.find(req.matches[1]);
                std::lock_guard lock(entry->mutex);
                send_json(res, 200, session_state(entry->session));
            });
        });
        server_.Post(R"(/sessions/([A-Za-z0-9_-]+)/rating)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const Json body = parse_body(req);
                std::optional<int> iteration;
                if (body.contains("iteration")) {
                    if (!body.at("iteration").is_number_integer())
                        throw Error(ErrorCode::SchemaError, "iteration must be an integer");
                    iteration = body.at("iteration").get<int>();
                }
                const QuestionnaireResponse r = response_from_json(body.contains("response") ? body.at("response") : body);
                send_json(res, 200, store_.rate(req.matches[1], r, iteration));
            });
        });
        server_.Get(R"(/sessions/([A-Za-z0-9_-]+)/pareto)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto entry = store_.find(req.matches[1]);
                std::lock_guard lock(entry->mutex);
                send_json(res, 200, pareto_state(entry->session));
            });
        });
        server_.Get(R"(/sessions/([A-Za-z0-9_-]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto entry = store_.find(req.matches[1]);
                std::lock_guard lock(entry->mutex);
                res.status = 200;
                res.set_content(entry->session.export_records(), "application/x-ndjson");
            });
        });
    }

    ServiceConfig config_;
    SessionStore store_;
    httplib::Server server_;
};

} // namespace ehmi
