#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ehmi/ehmi.hpp"
#include "ehmi/service.hpp"

namespace fs = std::filesystem;
using namespace ehmi;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

SessionConfig load_session_config(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    try {
        const Json j = Json::parse(in);
        SessionConfig c = session_config_from_json(j.contains("session") ? j.at("session") : j);
        validate_config(c);
        return c;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, path + ": " + e.what());
    }
}

int run_serve(const std::string& config_path) {
    ServiceConfig config;
    if (!config_path.empty()) {
        config = load_service_config(config_path);
    } else {
        apply_env_overrides(config);
    }
    Service service(config);
    std::cerr << "loaded " << service.store().loaded_count() << " session(s) from " << config.store_dir.string() << '\n';
    std::cerr << "listening on " << config.host << ':' << config.port << '\n';
    if (!service.listen()) throw Error(ErrorCode::IoError, "cannot listen on " + config.host + ":" + std::to_string(config.port));
    return 0;
}

struct SimulateOptions {
    int raters = 20;
    std::uint64_t seed = 1;
    std::string seeds; // "a..b" or "a,b,c": per-rater session seeds
    double noise_sd = 0.0;
    std::string out = "sim_out";
    std::string config;
};

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> out;
    try {
        if (auto dots = spec.find(".."); dots != std::string::npos) {
            const std::uint64_t a = std::stoull(spec.substr(0, dots)), b = std::stoull(spec.substr(dots + 2));
            if (b < a) throw Error(ErrorCode::ConfigInvalid, "--seeds range is empty: " + spec);
            for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
        } else {
            std::stringstream in(spec);
            for (std::string item; std::getline(in, item, ',');) out.push_back(std::stoull(item));
        }
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::ConfigInvalid, "--seeds must look like 1..20 or 1,2,3: " + spec);
    }
    return out;
}

int run_simulate(SimulateOptions o, bool raters_given) {
    std::vector<std::uint64_t> seeds;
    if (!o.seeds.empty()) {
        seeds = parse_seeds(o.seeds);
        if (!raters_given) o.raters = int(seeds.size());
        if (int(seeds.size()) != o.raters)
            throw Error(ErrorCode::ConfigInvalid, "--seeds lists " + std::to_string(seeds.size()) + " seeds for " +
                                                      std::to_string(o.raters) + " raters");
    } else {
        for (int i = 0; i < o.raters; ++i) seeds.push_back(mix_seed(o.seed, std::uint64_t(i)));
    }
    if (o.raters < 1) throw Error(ErrorCode::ConfigInvalid, "--raters must be >= 1");
    SessionConfig config = load_session_config(o.config);
    RaterPopulation pop;
    pop.count = o.raters;
    pop.seed = o.seed;
    pop.noise_sd = o.noise_sd;
    const auto raters = make_population(pop);
    fs::create_directories(o.out);

    std::ostringstream csv;
    csv << "rater,method,iteration,hypervolume\n";
    std::vector<StudyRecord> study;
    int wins = 0;
    double sum_mobo = 0.0, sum_random = 0.0;
    for (int i = 0; i < o.raters; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "rater_%03d", i + 1);
        SessionConfig c = config;
        c.acquisition.seed = seeds[std::size_t(i)];
        const SimulationRun mobo = simulate_mobo(raters[std::size_t(i)], c, std::string(name) + "_mobo");
        const std::uint64_t baseline_seed =
            o.seeds.empty() ? mix_seed(o.seed, 0xBA5E + std::uint64_t(i)) : mix_seed(seeds[std::size_t(i)], 0xBA5E);
        const SimulationRun random = simulate_random(raters[std::size_t(i)], c, std::string(name) + "_random", baseline_seed);
        write_file(fs::path(o.out) / (std::string(name) + "_mobo.jsonl"), mobo.log);
        write_file(fs::path(o.out) / (std::string(name) + "_random.jsonl"), random.log);
        for (const SimulationRun* run : {&mobo, &random})
            for (std::size_t k = 0; k < run->hypervolume.size(); ++k)
                csv << name << ',' << run->method << ',' << k + 1 << ',' << Json(run->hypervolume[k]).dump() << '\n';
        for (std::size_t k = 0; k < mobo.designs.size(); ++k) {
            StudyRecord r;
            r.participant = name;
            r.group = i % 2 ? "b" : "a";
            r.iteration = int(k) + 1;
            r.phase = r.iteration <= c.acquisition.n_sobol ? "sampling" : "optimization";
            r.params = mobo.designs[k].values();
            r.raw = mobo.raw[k];
            r.normalized = mobo.objectives[k];
            study.push_back(std::move(r));
        }
        const double hm = mobo.hypervolume.back(), hr = random.hypervolume.back();
        wins += hm >= hr;
        sum_mobo += hm;
        sum_random += hr;
        std::cout << name << "  mobo " << std::fixed << std::setprecision(3) << hm << "  random " << hr
                  << (mobo.stopped_early ? "  (stopped early)" : "") << '\n';
    }
    write_file(fs::path(o.out) / "hypervolume.csv", csv.str());
    write_file(fs::path(o.out) / "study.csv", write_study_csv(study));
    std::cout << "mobo >= random on " << wins << '/' << o.raters << " raters; mean hypervolume mobo "
              << sum_mobo / o.raters << ", random " << sum_random / o.raters << '\n';
    return 0;
}

struct AnalyzeOptions {
    std::string data;
    std::string schema;
    bool pareto_only = false;
    std::string space = "normalized";
    std::string group_col;
    std::string group_a = "female";
    std::string group_b = "male";
    bool json = false;
};

std::string fmt(double x, int prec = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << x;
    return s.str();
}

std::string fmt_bf(double bf) {
    std::ostringstream s;
    if (bf >= 1000.0 || bf < 0.001) {
        s << std::scientific << std::setprecision(2) << bf;
    } else {
        s << std::fixed << std::setprecision(3) << bf;
    }
    return s.str();
}

int run_analyze(const AnalyzeOptions& o) {
    SchemaMapping mapping;
    if (!o.schema.empty()) {
        std::ifstream in(o.schema);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + o.schema);
        try {
            mapping = schema_mapping_from_json(Json::parse(in));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::SchemaError, o.schema + ": " + e.what());
        }
    }
    if (!o.group_col.empty()) mapping.columns["group"] = o.group_col;
    const ObjectiveSpace space = o.space == "raw" ? ObjectiveSpace::Raw : ObjectiveSpace::Normalized;

    const IngestResult ingest = ingest_dataset(o.data, mapping);
    for (const auto& v : ingest.violations) std::cerr << "warning: row " << v.row << " rejected: " << v.message << '\n';

    // Only the two compared groups take part; other labels are excluded.
    std::vector<StudyRecord> records;
    for (const auto& r : ingest.records)
        if (r.group == o.group_a || r.group == o.group_b) records.push_back(r);
    if (records.empty()) throw Error(ErrorCode::EmptyGroup, "no records in groups " + o.group_a + "/" + o.group_b);

    const auto flags = pareto_flags(records, space, mapping.scales);
    std::vector<StudyRecord> front;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (flags[i]) front.push_back(records[i]);
    const std::vector<StudyRecord>& basis = o.pareto_only ? front : records;

    const auto counts = pareto_counts_by_group(records, space);
    const auto corr = correlation_matrix(basis, false);
    const auto params = compare_parameters(basis, o.group_a, o.group_b);

    if (o.json) {
        Json j;
        j["rows"] = ingest.data_rows;
        j["rejected"] = ingest.violations.size();
        j["pareto_counts"] = Json::object();
        for (const auto& [g, n] : counts) j["pareto_counts"][g] = n;
        Json cm = Json::array();
        for (std::size_t a = 0; a < kNumObjectives; ++a) {
            Json row = Json::array();
            for (std::size_t b = 0; b < kNumObjectives; ++b)
                row.push_back(Json{{"r", corr[a][b].r}, {"p_adjusted", corr[a][b].p_adjusted}});
            cm.push_back(row);
        }
        j["correlations"] = cm;
        Json ps = Json::array();
        for (const auto& p : params)
            ps.push_back(Json{{"parameter", p.parameter},
                              {"bf10", p.bf.bf10},
                              {"error_pct", p.bf.error_pct},
                              {"evidence", std::string(to_string(p.bf.evidence))},
                              {"iqr_" + o.group_a, {p.iqr_a.first, p.iqr_a.second}},
                              {"iqr_" + o.group_b, {p.iqr_b.first, p.iqr_b.second}}});
        j["parameters"] = ps;
        std::cout << j.dump(2) << '\n';
        return 0;
    }

    std::cout << "rows " << ingest.data_rows << ", rejected " << ingest.violations.size() << ", analysed "
              << basis.size() << (o.pareto_only ? " (Pareto-optimal only)" : "") << "\n\n";
    std::cout << "Pareto-optimal designs per group (" << o.space << " objectives)\n";
    for (const auto& [g, n] : counts) std::cout << "  " << g << ": " << n << '\n';

    std::cout << "\nPearson correlations of raw objectives (* Holm-adjusted p < .05)\n" << std::setw(18) << "";
    for (auto n : kObjectiveNames) std::cout << std::setw(10) << n.substr(0, 9);
    std::cout << '\n';
    for (std::size_t a = 0; a < kNumObjectives; ++a) {
        std::cout << std::setw(18) << kObjectiveNames[a];
        for (std::size_t b = 0; b < kNumObjectives; ++b) {
            const std::string cell = a == b ? "-" : fmt(corr[a][b].r, 2) + (corr[a][b].significant ? "*" : " ");
            std::cout << std::setw(10) << cell;
        }
        std::cout << '\n';
    }

    std::cout << "\nDesign parameters, " << o.group_a << " vs " << o.group_b << '\n';
    std::cout << std::setw(18) << "parameter" << std::setw(12) << "BF10" << std::setw(10) << "error %" << std::setw(22)
              << ("IQR " + o.group_a) << std::setw(22) << ("IQR " + o.group_b) << "  evidence\n";
    for (const auto& p : params) {
        std::cout << std::setw(18) << p.parameter << std::setw(12) << fmt_bf(p.bf.bf10) << std::setw(10)
                  << fmt(p.bf.error_pct, 4) << std::setw(22)
                  << ("[" + fmt(p.iqr_a.first) + ", " + fmt(p.iqr_a.second) + "]") << std::setw(22)
                  << ("[" + fmt(p.iqr_b.first) + ", " + fmt(p.iqr_b.second) + "]") << "  " << to_string(p.bf.evidence)
                  << '\n';
    }

    std::cout << "\nObjectives (raw), " << o.group_a << " vs " << o.group_b << '\n';
    for (const auto& c : compare_objectives(basis, o.group_a, o.group_b)) {
        std::cout << std::setw(18) << c.objective << std::setw(12) << fmt_bf(c.bf.bf10) << std::setw(10)
                  << fmt(c.bf.error_pct, 4) << "  " << to_string(c.bf.evidence) << '\n';
    }
    return 0;
}

int run_demo(std::uint64_t seed) {
    RaterPopulation pop;
    pop.count = 1;
    pop.seed = seed;
    const SyntheticRater rater = make_population(pop).front();
    SessionConfig config;
    config.acquisition.seed = seed;
    Session s = Session::start(config, "demo");
    std::vector<ObjectiveVector> ys;
    std::cout << "iter  phase         hypervolume  params\n";
    while (s.pending_design()) {
        const DesignParams d = *s.pending_design();
        s.submit(rate(rater, d, s.iteration() + 1));
        const auto& rec = s.history().back();
        ys.push_back(rec.objectives);
        std::cout << std::setw(4) << rec.iteration << "  " << std::left << std::setw(12) << to_string(rec.phase)
                  << std::right << std::setw(13) << fmt(front_hypervolume(ys), 4) << "  [";
        for (std::size_t i = 0; i < kNumParams; ++i) std::cout << (i ? " " : "") << fmt(d[i], 2);
        std::cout << "]\n";
    }
    std::cout << "finished after " << s.iteration() << " iterations" << (s.stopped_early() ? " (perfect rating)" : "")
              << "; Pareto front has " << s.front().points.size() << " design(s)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective Bayesian optimization of external HMI designs"};
    app.require_subcommand(1);

    std::string serve_config;
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    serve->add_option("--config", serve_config, "Service config JSON");

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Run synthetic raters through MOBO and a random baseline");
    auto* raters_opt = simulate->add_option("--raters", sim.raters, "Number of synthetic raters")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Population seed")->capture_default_str();
    simulate->add_option("--seeds", sim.seeds, "Per-rater session seeds, e.g. 1..20");
    simulate->add_option("--noise", sim.noise_sd, "Rating noise standard deviation")->capture_default_str();
    simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();
    simulate->add_option("--config", sim.config, "Session config JSON");

    AnalyzeOptions an;
    auto* analyze = app.add_subcommand("analyze", "Analyse a study dataset");
    analyze->add_option("--data", an.data, "Study CSV")->required();
    analyze->add_option("--schema", an.schema, "Column mapping JSON");
    analyze->add_flag("--pareto-only", an.pareto_only, "Restrict to per-participant Pareto-optimal designs");
    analyze->add_option("--space", an.space, "Objective space for Pareto filtering")
        ->check(CLI::IsMember({"normalized", "raw"}))
        ->capture_default_str();
    analyze->add_option("--group-col", an.group_col, "Column holding the group label");
    analyze->add_option("--group-a", an.group_a)->capture_default_str();
    analyze->add_option("--group-b", an.group_b)->capture_default_str();
    analyze->add_flag("--json", an.json, "Emit JSON");

    std::uint64_t demo_seed = 1;
    auto* demo = app.add_subcommand("demo", "Run one synthetic session and print every iteration");
    demo->add_option("--seed", demo_seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*serve) return run_serve(serve_config);
        if (*simulate) return run_simulate(sim, raters_opt->count() > 0);
        if (*analyze) return run_analyze(an);
        if (*demo) return run_demo(demo_seed);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: INTERNAL: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
