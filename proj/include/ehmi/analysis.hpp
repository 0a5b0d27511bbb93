#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ehmi/design_space.hpp"
#include "ehmi/error.hpp"
#include "ehmi/json_io.hpp"
#include "ehmi/objectives.hpp"
#include "ehmi/pareto.hpp"
#include "ehmi/session.hpp"

namespace ehmi {

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct StudyRecord {
    std::string participant;
    std::string group;
    int iteration = 0;
    std::string phase;
    std::array<double, kNumParams> params{};
    RawObjectives raw{};
    ObjectiveVector normalized{};

    friend bool operator==(const StudyRecord&, const StudyRecord&) = default;
};

/// Canonical CSV column names, in output order.
inline std::vector<std::string> study_columns() {
    std::vector<std::string> cols = {"participant", "group", "iteration", "phase"};
    for (std::size_t i = 0; i < kNumParams; ++i) cols.push_back("p" + std::to_string(i + 1));
    for (auto n : kObjectiveNames) cols.push_back("raw_" + std::string(n));
    for (auto n : kObjectiveNames) cols.push_back("norm_" + std::string(n));
    return cols;
}

inline std::vector<StudyRecord> session_records(const Session& s, const std::string& participant,
                                                const std::string& group) {
    std::vector<StudyRecord> out;
    for (const auto& it : s.history()) {
        StudyRecord r;
        r.participant = participant;
        r.group = group;
        r.iteration = it.iteration;
        r.phase = std::string(to_string(it.phase));
        r.params = it.design.values();
        r.raw = it.raw;
        r.normalized = it.objectives;
        out.push_back(std::move(r));
    }
    return out;
}

namespace detail {

inline std::string format_double(double x) {
    // Shortest round-trip representation, same as the JSON logs.
    return nlohmann::json(x).dump();
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline double parse_number(const std::string& s, std::size_t row, const std::string& col) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " + col + ": not a number: '" + s + "'");
    }
}

} // namespace detail

inline std::string write_study_csv(std::span<const StudyRecord> records) {
    std::ostringstream out;
    const auto cols = study_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : records) {
        out << detail::csv_escape(r.participant) << ',' << detail::csv_escape(r.group) << ',' << r.iteration << ','
            << detail::csv_escape(r.phase);
        for (double v : r.params) out << ',' << detail::format_double(v);
        for (double v : r.raw) out << ',' << detail::format_double(v);
        for (double v : r.normalized) out << ',' << detail::format_double(v);
        out << '\n';
    }
    return out.str();
}

/// Maps canonical column names to the names used by a particular file.
/// Columns not listed keep their canonical name. When the normalized
/// objective columns are absent they are derived from the raw ones.
struct SchemaMapping {
    std::map<std::string, std::string> columns;
    ScaleSpecs scales = default_scale_specs();

    std::string source(const std::string& canonical) const {
        auto it = columns.find(canonical);
        return it == columns.end() ? canonical : it->second;
    }
};

inline SchemaMapping schema_mapping_from_json(const Json& j) {
    SchemaMapping m;
    if (j.contains("columns")) {
        for (const auto& [k, v] : j.at("columns").items()) m.columns[k] = v.get<std::string>();
    }
    if (j.contains("scales")) m.scales = default_scale_specs(scales_from_json(j.at("scales")));
    return m;
}

struct RowViolation {
    std::size_t row = 0; // 1-based data row
    std::string message;
};

struct IngestResult {
    std::vector<StudyRecord> records;
    std::vector<RowViolation> violations;
    std::size_t data_rows = 0;
};

inline IngestResult parse_study_csv(std::istream& in, const SchemaMapping& mapping = {}) {
    std::string header_line;
    while (std::getline(in, header_line)) {
        if (!header_line.empty() && header_line != "\r") break;
    }
    if (header_line.empty() || header_line == "\r") throw Error(ErrorCode::SchemaError, "dataset is empty");
    const auto header = detail::split_csv_line(header_line);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;

    auto column = [&](const std::string& canonical, bool required) -> std::optional<std::size_t> {
        auto it = index.find(mapping.source(canonical));
        if (it == index.end()) {
            if (required) throw Error(ErrorCode::SchemaError, "missing column '" + mapping.source(canonical) + "'");
            return std::nullopt;
        }
        return it->second;
    };

    const auto participant_col = *column("participant", true);
    const auto group_col = column("group", false);
    const auto iteration_col = *column("iteration", true);
    const auto phase_col = column("phase", false);
    std::array<std::size_t, kNumParams> param_cols{};
    for (std::size_t i = 0; i < kNumParams; ++i) param_cols[i] = *column("p" + std::to_string(i + 1), true);
    std::array<std::size_t, kNumObjectives> raw_cols{};
    for (std::size_t i = 0; i < kNumObjectives; ++i) raw_cols[i] = *column("raw_" + std::string(kObjectiveNames[i]), true);
    std::array<std::optional<std::size_t>, kNumObjectives> norm_cols{};
    for (std::size_t i = 0; i < kNumObjectives; ++i)
        norm_cols[i] = column("norm_" + std::string(kObjectiveNames[i]), false);

    IngestResult result;
    std::set<std::pair<std::string, int>> seen;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size()) {
            throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                                                   " fields, header has " + std::to_string(header.size()));
        }
        StudyRecord r;
        r.participant = f[participant_col];
        r.group = group_col ? f[*group_col] : "";
        r.iteration = int(detail::parse_number(f[iteration_col], row, "iteration"));
        r.phase = phase_col ? f[*phase_col] : "";
        for (std::size_t i = 0; i < kNumParams; ++i) r.params[i] = detail::parse_number(f[param_cols[i]], row, header[param_cols[i]]);
        for (std::size_t i = 0; i < kNumObjectives; ++i) r.raw[i] = detail::parse_number(f[raw_cols[i]], row, header[raw_cols[i]]);
        for (std::size_t i = 0; i < kNumObjectives; ++i) {
            r.normalized[i] = norm_cols[i] ? detail::parse_number(f[*norm_cols[i]], row, header[*norm_cols[i]])
                                           : normalize(r.raw[i], mapping.scales[i]);
        }

        std::string problem;
        for (std::size_t i = 0; i < kNumParams && problem.empty(); ++i) {
            if (!(r.params[i] >= 0.0 && r.params[i] <= 1.0)) problem = "p" + std::to_string(i + 1) + " outside [0,1]";
        }
        for (std::size_t i = 0; i < kNumObjectives && problem.empty(); ++i) {
            if (!(r.normalized[i] >= -1.0 && r.normalized[i] <= 1.0))
                problem = "normalized " + std::string(kObjectiveNames[i]) + " outside [-1,1]";
        }
        if (problem.empty() && !seen.insert({r.participant, r.iteration}).second)
            problem = "duplicate (participant, iteration) = (" + r.participant + ", " + std::to_string(r.iteration) + ")";

        if (problem.empty()) {
            result.records.push_back(std::move(r));
        } else {
            result.violations.push_back({row, problem});
        }
    }
    result.data_rows = row;
    return result;
}

inline IngestResult ingest_dataset(const std::string& path, const SchemaMapping& mapping = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return parse_study_csv(in, mapping);
}

// ---------------------------------------------------------------------------
// Pareto filtering per participant
// ---------------------------------------------------------------------------

enum class ObjectiveSpace { Normalized, Raw };

/// Pareto-optimality flag of every record, computed within its participant.
/// Raw mode negates the minimized objectives so larger is better throughout.
inline std::vector<bool> pareto_flags(std::span<const StudyRecord> records,
                                      ObjectiveSpace space = ObjectiveSpace::Normalized,
                                      const ScaleSpecs& scales = default_scale_specs()) {
    std::map<std::string, std::vector<std::size_t>> by_participant;
    for (std::size_t i = 0; i < records.size(); ++i) by_participant[records[i].participant].push_back(i);

    std::vector<bool> flags(records.size(), false);
    for (const auto& [pid, rows] : by_participant) {
        std::vector<Point> pts;
        for (std::size_t i : rows) {
            Point p(kNumObjectives);
            for (std::size_t o = 0; o < kNumObjectives; ++o) {
                if (space == ObjectiveSpace::Normalized) {
                    p[o] = records[i].normalized[o];
                } else {
                    p[o] = scales[o].direction == Direction::Minimize ? -records[i].raw[o] : records[i].raw[o];
                }
            }
            pts.push_back(std::move(p));
        }
        for (std::size_t k : non_dominated_indices(pts)) flags[rows[k]] = true;
    }
    return flags;
}

inline std::map<std::string, std::size_t> pareto_counts_by_group(std::span<const StudyRecord> records,
                                                                 ObjectiveSpace space = ObjectiveSpace::Normalized) {
    const auto flags = pareto_flags(records, space);
    std::map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (flags[i]) ++counts[records[i].group];
    return counts;
}

// ---------------------------------------------------------------------------
// Bayes factors
// ---------------------------------------------------------------------------

enum class Evidence {
    ExtremeEquality,
    StrongEquality,
    ModerateEquality,
    Inconclusive,
    ModerateDifference,
    StrongDifference,
    ExtremeDifference,
};

inline constexpr std::string_view to_string(Evidence e) {
    switch (e) {
    case Evidence::ExtremeEquality: return "extreme-equality";
    case Evidence::StrongEquality: return "strong-equality";
    case Evidence::ModerateEquality: return "moderate-equality";
    case Evidence::Inconclusive: return "inconclusive";
    case Evidence::ModerateDifference: return "moderate-difference";
    case Evidence::StrongDifference: return "strong-difference";
    case Evidence::ExtremeDifference: return "extreme-difference";
    }
    return "unknown";
}

inline Evidence categorize_bf(double bf10) {
    if (bf10 < 0.01) return Evidence::ExtremeEquality;
    if (bf10 < 0.1) return Evidence::StrongEquality;
    if (bf10 < 0.3) return Evidence::ModerateEquality;
    if (bf10 <= 3.0) return Evidence::Inconclusive;
    if (bf10 <= 10.0) return Evidence::ModerateDifference;
    if (bf10 <= 100.0) return Evidence::StrongDifference;
    return Evidence::ExtremeDifference;
}

struct TwoSampleT {
    double t = 0;
    double df = 0;
    double effective_n = 0; // n1 n2 / (n1 + n2)
};

/// Pooled-variance Student t statistic for x versus y.
inline TwoSampleT two_sample_t(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2 || y.size() < 2) throw Error(ErrorCode::DegenerateSample, "each sample needs at least 2 values");
    for (double v : x)
        if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateSample, "non-finite value in sample");
    for (double v : y)
        if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateSample, "non-finite value in sample");
    const double n1 = double(x.size()), n2 = double(y.size());
    const double m1 = std::accumulate(x.begin(), x.end(), 0.0) / n1;
    const double m2 = std::accumulate(y.begin(), y.end(), 0.0) / n2;
    double ss = 0.0;
    for (double v : x) ss += (v - m1) * (v - m1);
    for (double v : y) ss += (v - m2) * (v - m2);
    const double df = n1 + n2 - 2.0;
    const double pooled = ss / df;
    if (!(pooled > 0.0)) throw Error(ErrorCode::DegenerateSample, "zero pooled variance");
    const double neff = n1 * n2 / (n1 + n2);
    return {(m1 - m2) / std::sqrt(pooled / neff), df, neff};
}

struct BayesFactorResult {
    double bf10 = 1.0;
    double error_pct = 0.0;
    Evidence evidence = Evidence::Inconclusive;
};

/// JZS Bayes factor for a two-sample t statistic: Cauchy(0, scale) prior on
/// the standardized effect, written as a normal mixture over g with
/// g ~ InvGamma(1/2, scale^2/2) and integrated by adaptive Gauss-Kronrod.
inline BayesFactorResult jzs_bayes_factor(double t, double df, double effective_n, double scale = std::sqrt(0.5)) {
    if (!(df > 0.0) || !(effective_n > 0.0) || !(scale > 0.0) || !std::isfinite(t))
        throw Error(ErrorCode::DegenerateSample, "invalid t-test summary");
    const double log_null = -(df + 1.0) / 2.0 * std::log1p(t * t / df);
    const double log_prior_const = std::log(scale) - 0.5 * std::log(2.0 * std::numbers::pi);
    auto log_integrand = [=](double g) {
        const double a = 1.0 + effective_n * g;
        const double log_alt = -0.5 * std::log(a) - (df + 1.0) / 2.0 * std::log1p(t * t / (a * df));
        const double log_prior = log_prior_const - 1.5 * std::log(g) - scale * scale / (2.0 * g);
        return log_alt - log_null + log_prior;
    };
    // Factor out the peak so large |t| cannot overflow the integrand.
    double peak = -std::numeric_limits<double>::infinity();
    for (double lg = -12.0; lg <= 12.0; lg += 0.25) peak = std::max(peak, log_integrand(std::pow(10.0, lg)));
    auto integrand = [&](double g) { return g > 0.0 ? std::exp(log_integrand(g) - peak) : 0.0; };
    double error = 0.0;
    const double scaled = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-10, &error);
    if (!(scaled > 0.0) || !std::isfinite(scaled)) throw Error(ErrorCode::NumericalFailure, "Bayes factor integral failed");
    const double bf = std::exp(peak + std::log(scaled));
    return {bf, 100.0 * error / scaled, categorize_bf(bf)};
}

inline BayesFactorResult bayes_factor_ttest(std::span<const double> x, std::span<const double> y,
                                            double cauchy_scale = std::sqrt(0.5)) {
    const TwoSampleT ts = two_sample_t(x, y);
    return jzs_bayes_factor(ts.t, ts.df, ts.effective_n, cauchy_scale);
}

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

/// Holm step-down adjustment; output is in the input order.
inline std::vector<double> holm_adjust(std::span<const double> p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adj(m);
    double running = 0.0;
    for (std::size_t rank = 0; rank < m; ++rank) {
        const double v = std::min(1.0, double(m - rank) * p[order[rank]]);
        running = std::max(running, v);
        adj[order[rank]] = running;
    }
    return adj;
}

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::DegenerateColumn, "constant column");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided p-value of H0: rho = 0 via t = r sqrt((n-2)/(1-r^2)).
inline double pearson_p_value(double r, std::size_t n) {
    if (std::abs(r) >= 1.0) return 0.0;
    const double df = double(n) - 2.0;
    const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
    boost::math::students_t dist(df);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

struct CorrelationCell {
    double r = 1.0;
    double p_raw = 0.0;
    double p_adjusted = 0.0;
    bool significant = true;
};

using CorrelationMatrix = std::array<std::array<CorrelationCell, kNumObjectives>, kNumObjectives>;

/// Pearson correlations between columns, Holm-adjusted over the k(k-1)/2 pairs.
inline std::vector<std::vector<CorrelationCell>> correlate_columns(const std::vector<std::vector<double>>& columns,
                                                                   double alpha = 0.05) {
    const std::size_t k = columns.size();
    if (k == 0 || columns.front().size() < 3) throw Error(ErrorCode::InsufficientData, "correlation needs >= 3 rows");
    const std::size_t n = columns.front().size();
    std::vector<std::vector<CorrelationCell>> out(k, std::vector<CorrelationCell>(k));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<double> pvals;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            const double r = pearson_r(columns[a], columns[b]);
            out[a][b].r = out[b][a].r = r;
            const double p = pearson_p_value(r, n);
            out[a][b].p_raw = out[b][a].p_raw = p;
            pairs.emplace_back(a, b);
            pvals.push_back(p);
        }
    }
    const auto adj = holm_adjust(pvals);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [a, b] = pairs[i];
        out[a][b].p_adjusted = out[b][a].p_adjusted = adj[i];
        out[a][b].significant = out[b][a].significant = adj[i] < alpha;
    }
    return out;
}

inline CorrelationMatrix correlation_matrix(std::span<const StudyRecord> records, bool pareto_only,
                                            ObjectiveSpace space = ObjectiveSpace::Normalized) {
    std::vector<bool> keep(records.size(), true);
    if (pareto_only) keep = pareto_flags(records, space);
    std::vector<std::vector<double>> columns(kNumObjectives);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!keep[i]) continue;
        for (std::size_t o = 0; o < kNumObjectives; ++o) columns[o].push_back(records[i].raw[o]);
    }
    const auto cells = correlate_columns(columns);
    CorrelationMatrix m;
    for (std::size_t a = 0; a < kNumObjectives; ++a)
        for (std::size_t b = 0; b < kNumObjectives; ++b) m[a][b] = cells[a][b];
    return m;
}

// ---------------------------------------------------------------------------
// Quantiles
// ---------------------------------------------------------------------------

/// Linear-interpolation quantile (Hyndman & Fan type 7).
inline double quantile_type7(std::vector<double> v, double q) {
    if (v.empty()) throw Error(ErrorCode::EmptyGroup, "quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (double(v.size()) - 1.0) * q;
    const auto lo = std::size_t(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

using IqrTable = std::array<std::pair<double, double>, kNumParams>;

/// Per-parameter (Q1, Q3) over the records of `group`. Pass only the
/// Pareto-optimal records to reproduce the front-based tables.
inline IqrTable parameter_iqr(std::span<const StudyRecord> records, const std::string& group) {
    std::array<std::vector<double>, kNumParams> cols;
    for (const auto& r : records) {
        if (r.group != group) continue;
        for (std::size_t i = 0; i < kNumParams; ++i) cols[i].push_back(r.params[i]);
    }
    if (cols[0].empty()) throw Error(ErrorCode::EmptyGroup, "no records in group '" + group + "'");
    IqrTable out;
    for (std::size_t i = 0; i < kNumParams; ++i)
        out[i] = {quantile_type7(cols[i], 0.25), quantile_type7(cols[i], 0.75)};
    return out;
}

// ---------------------------------------------------------------------------
// Group comparison report
// ---------------------------------------------------------------------------

struct ParameterComparison {
    std::string parameter;
    BayesFactorResult bf;
    std::pair<double, double> iqr_a;
    std::pair<double, double> iqr_b;
};

/// BF and IQR per design parameter, group_a versus group_b, over the given records.
inline std::vector<ParameterComparison> compare_parameters(std::span<const StudyRecord> records,
                                                           const std::string& group_a, const std::string& group_b) {
    const IqrTable iqr_a = parameter_iqr(records, group_a);
    const IqrTable iqr_b = parameter_iqr(records, group_b);
    std::vector<ParameterComparison> out;
    for (std::size_t i = 0; i < kNumParams; ++i) {
        std::vector<double> a, b;
        for (const auto& r : records) {
            if (r.group == group_a) a.push_back(r.params[i]);
            if (r.group == group_b) b.push_back(r.params[i]);
        }
        out.push_back({std::string(kParamNames[i]), bayes_factor_ttest(a, b), iqr_a[i], iqr_b[i]});
    }
    return out;
}

struct ObjectiveComparison {
    std::string objective;
    BayesFactorResult bf;
};

inline std::vector<ObjectiveComparison> compare_objectives(std::span<const StudyRecord> records,
                                                           const std::string& group_a, const std::string& group_b) {
    std::vector<ObjectiveComparison> out;
    for (std::size_t o = 0; o < kNumObjectives; ++o) {
        std::vector<double> a, b;
        for (const auto& r : records) {
            if (r.group == group_a) a.push_back(r.raw[o]);
            if (r.group == group_b) b.push_back(r.raw[o]);
        }
        out.push_back({std::string(kObjectiveNames[o]), bayes_factor_ttest(a, b)});
    }
    return out;
}

} // namespace ehmi
