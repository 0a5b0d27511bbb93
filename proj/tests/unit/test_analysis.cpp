#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ehmi/analysis.hpp"
#include "ehmi/sobol.hpp"
#include "ehmi/synthetic_user.hpp"

using namespace ehmi;
using Catch::Approx;

namespace {

template <class F> ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no ehmi::Error thrown");
    return ErrorCode::IoError;
}

// BF10 as the ratio of the marginal likelihood of t under a Cauchy(0, r)
// effect-size prior to its likelihood at zero effect.
double bf_oracle(double t, double df, double neff, double r) {
    const double null = boost::math::pdf(boost::math::students_t(df), t);
    auto integrand = [&](double delta) {
        const double lik = boost::math::pdf(boost::math::non_central_t(df, delta * std::sqrt(neff)), t);
        const double prior = 1.0 / (std::numbers::pi * r * (1.0 + (delta / r) * (delta / r)));
        return lik * prior;
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double inf = std::numeric_limits<double>::infinity();
    return (GK::integrate(integrand, -inf, 0.0, 15, 1e-12) + GK::integrate(integrand, 0.0, inf, 15, 1e-12)) / null;
}

// Synthetic study: `participants` raters, `iters` Sobol designs each.
std::vector<StudyRecord> synthetic_records(int participants, int iters, std::uint64_t seed = 1) {
    RaterPopulation pop;
    pop.count = participants;
    pop.seed = seed;
    pop.noise_sd = 0.3;
    const auto raters = make_population(pop);
    const SobolSequence sobol(9);
    std::vector<StudyRecord> out;
    for (int p = 0; p < participants; ++p)
        for (int k = 1; k <= iters; ++k) {
            const auto d = validate_params(sobol.point(std::uint64_t(p * iters + k)));
            const auto resp = rate(raters[std::size_t(p)], d, k);
            StudyRecord r;
            r.participant = "P" + std::to_string(p);
            r.group = p % 2 ? "male" : "female";
            r.iteration = k;
            r.phase = k <= 5 ? "sampling" : "optimization";
            r.params = d.values();
            r.raw = score_questionnaire(resp);
            r.normalized = normalize_all(r.raw, default_scale_specs());
            out.push_back(r);
        }
    return out;
}

IngestResult parse(const std::string& text, const SchemaMapping& m = {}) {
    std::istringstream in(text);
    return parse_study_csv(in, m);
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// evidence categories

TEST_CASE("Bayes factor evidence categories", "[bf]") {
    CHECK(categorize_bf(0.17) == Evidence::ModerateEquality);
    CHECK(categorize_bf(6.0) == Evidence::ModerateDifference);
    CHECK(categorize_bf(1.0) == Evidence::Inconclusive);
    CHECK(categorize_bf(0.005) == Evidence::ExtremeEquality);
    CHECK(categorize_bf(0.05) == Evidence::StrongEquality);
    CHECK(categorize_bf(50.0) == Evidence::StrongDifference);
    CHECK(categorize_bf(1000.0) == Evidence::ExtremeDifference);
    CHECK(categorize_bf(0.01) == Evidence::StrongEquality);
    CHECK(categorize_bf(0.1) == Evidence::ModerateEquality);
    CHECK(categorize_bf(0.3) == Evidence::Inconclusive);
    CHECK(categorize_bf(3.0) == Evidence::Inconclusive);
    CHECK(categorize_bf(10.0) == Evidence::ModerateDifference);
    CHECK(categorize_bf(100.0) == Evidence::StrongDifference);
    CHECK(to_string(Evidence::ModerateEquality) == "moderate-equality");
}

TEST_CASE("evidence category is monotone in the Bayes factor", "[bf][property]") {
    double prev = 1e-4;
    for (double bf = 1e-4; bf < 1e4; bf *= 1.01) {
        REQUIRE(int(categorize_bf(bf)) >= int(categorize_bf(prev)));
        REQUIRE(int(categorize_bf(bf)) - int(categorize_bf(prev)) <= 1);
        prev = bf;
    }
}

// ---------------------------------------------------------------------------
// Bayes factors

TEST_CASE("JZS Bayes factor matches the effect-size integral", "[bf]") {
    struct Case { double t, df, neff, r; };
    for (const Case c : {Case{0.0, 38, 10, std::sqrt(0.5)}, Case{1.2, 38, 10, std::sqrt(0.5)},
                         Case{2.5, 58, 15, std::sqrt(0.5)}, Case{-3.1, 98, 25, 1.0}, Case{4.0, 20, 5.5, 0.5}}) {
        const auto bf = jzs_bayes_factor(c.t, c.df, c.neff, c.r);
        CHECK(bf.bf10 == Approx(bf_oracle(c.t, c.df, c.neff, c.r)).epsilon(1e-5));
        CHECK(bf.error_pct >= 0.0);
        CHECK(bf.error_pct < 1e-3);
        CHECK(bf.evidence == categorize_bf(bf.bf10));
    }
}

TEST_CASE("JZS Bayes factor does not overflow for huge t", "[bf]") {
    const auto bf = jzs_bayes_factor(25.0, 998, 250);
    CHECK(std::isfinite(bf.bf10));
    CHECK(bf.bf10 > 1e100);
    CHECK(bf.error_pct < 1e-3);
    CHECK(bf.evidence == Evidence::ExtremeDifference);
}

TEST_CASE("two-sample Bayes factor symmetries", "[bf][property]") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x(12 + rep), y(15);
        for (auto& v : x) v = n01(rng) + 0.3;
        for (auto& v : y) v = n01(rng);
        const double bxy = bayes_factor_ttest(x, y).bf10;
        CHECK(bayes_factor_ttest(y, x).bf10 == Approx(bxy).epsilon(1e-6));
        // t is invariant under a common affine map with positive slope.
        std::vector<double> ax = x, ay = y;
        for (auto& v : ax) v = 3.0 * v - 7.0;
        for (auto& v : ay) v = 3.0 * v - 7.0;
        CHECK(bayes_factor_ttest(ax, ay).bf10 == Approx(bxy).epsilon(1e-6));
    }
}

TEST_CASE("two-sample t examples", "[bf]") {
    const std::vector<double> x = {1, 2, 3, 4}, y = {3, 4, 5, 6};
    const auto ts = two_sample_t(x, y);
    // Means 2.5 and 4.5, pooled variance 5/3, neff 2.
    CHECK(ts.t == Approx(-2.0 / std::sqrt((5.0 / 3.0) / 2.0)).epsilon(1e-14));
    CHECK(ts.df == 6.0);
    CHECK(ts.effective_n == 2.0);
}

TEST_CASE("a large effect is decisive with moderate samples", "[bf]") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n01;
    std::vector<double> x(100), y(100);
    for (auto& v : x) v = n01(rng) + 1.5;
    for (auto& v : y) v = n01(rng);
    CHECK(bayes_factor_ttest(x, y).bf10 > 100.0);
}

TEST_CASE("degenerate Bayes factor input", "[bf]") {
    const std::vector<double> one = {1.0}, two = {1.0, 2.0}, flat = {2.0, 2.0, 2.0};
    const std::vector<double> nan = {1.0, std::nan("")};
    CHECK(code_of([&] { bayes_factor_ttest(one, two); }) == ErrorCode::DegenerateSample);
    CHECK(code_of([&] { bayes_factor_ttest(two, nan); }) == ErrorCode::DegenerateSample);
    CHECK(code_of([&] { bayes_factor_ttest(flat, flat); }) == ErrorCode::DegenerateSample);
    CHECK(code_of([] { jzs_bayes_factor(1.0, 0.0, 2.0); }) == ErrorCode::DegenerateSample);
}

// ---------------------------------------------------------------------------
// correlations

TEST_CASE("Holm adjustment example", "[correlation]") {
    const std::vector<double> p = {0.01, 0.04, 0.03, 0.005};
    const auto adj = holm_adjust(p);
    CHECK(adj[0] == Approx(0.03));
    CHECK(adj[1] == Approx(0.06));
    CHECK(adj[2] == Approx(0.06));
    CHECK(adj[3] == Approx(0.02));
    const std::vector<double> big = {0.6, 0.9};
    CHECK(holm_adjust(big) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("Holm-adjusted p-values dominate and keep order", "[correlation][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 0.2);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> p(1 + rng() % 21);
        for (auto& v : p) v = u(rng);
        const auto adj = holm_adjust(p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            REQUIRE(adj[i] >= p[i]);
            REQUIRE(adj[i] <= 1.0);
            for (std::size_t j = 0; j < p.size(); ++j)
                if (p[i] < p[j]) REQUIRE(adj[i] <= adj[j]);
        }
    }
}

TEST_CASE("Pearson p-value matches the incomplete beta identity", "[correlation]") {
    for (double r : {0.05, 0.3, 0.5, -0.72, 0.95})
        for (std::size_t n : {5u, 10u, 40u, 200u}) {
            const double df = double(n) - 2.0;
            const double t2 = r * r * df / (1.0 - r * r);
            const double oracle = boost::math::ibeta(df / 2.0, 0.5, df / (df + t2));
            CHECK(pearson_p_value(r, n) == Approx(oracle).epsilon(1e-10));
        }
    CHECK(pearson_p_value(1.0, 10) == 0.0);
}

TEST_CASE("correlation matrix structure", "[correlation]") {
    std::vector<std::vector<double>> cols = {{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}, {5, 3, 4, 1, 2}};
    const auto m = correlate_columns(cols);
    CHECK(m[0][1].r == 1.0);
    CHECK(m[0][1].significant);
    CHECK(m[0][0].r == 1.0);
    CHECK(m[0][2].r == Approx(-0.8));
    CHECK(m[2][0].r == m[0][2].r);
    CHECK(m[0][2].p_adjusted >= m[0][2].p_raw);

    cols[2] = {2, 2, 2, 2, 2};
    CHECK(code_of([&] { correlate_columns(cols); }) == ErrorCode::DegenerateColumn);
    CHECK(code_of([] { correlate_columns({{1, 2}, {2, 1}}); }) == ErrorCode::InsufficientData);
}

TEST_CASE("objective correlation matrix over study records", "[correlation]") {
    const auto recs = synthetic_records(6, 20);
    const auto m = correlation_matrix(recs, false);
    for (std::size_t a = 0; a < kNumObjectives; ++a)
        for (std::size_t b = 0; b < kNumObjectives; ++b) {
            CHECK(m[a][b].r == Approx(m[b][a].r));
            CHECK(std::abs(m[a][b].r) <= 1.0);
        }
    std::vector<double> trust, pred;
    for (const auto& r : recs) {
        trust.push_back(r.raw[0]);
        pred.push_back(r.raw[1]);
    }
    CHECK(m[0][1].r == Approx(pearson_r(trust, pred)).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// quantiles

TEST_CASE("type-7 quantile examples", "[quantile]") {
    CHECK(quantile_type7({0, 1, 2, 3}, 0.25) == 0.75);
    CHECK(quantile_type7({0, 1, 2, 3}, 0.75) == 2.25);
    CHECK(quantile_type7({3, 0, 2, 1}, 0.5) == 1.5);
    CHECK(quantile_type7({0.5, 0.5, 0.5}, 0.25) == 0.5);
    CHECK(quantile_type7({7}, 0.9) == 7.0);
    CHECK(code_of([] { quantile_type7({}, 0.5); }) == ErrorCode::EmptyGroup);
}

TEST_CASE("IQR bounds are ordered and inside the data range", "[quantile][property]") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<double> v(1 + rng() % 40);
        for (auto& x : v) x = u(rng);
        const double q1 = quantile_type7(v, 0.25), q3 = quantile_type7(v, 0.75);
        REQUIRE(q1 <= q3);
        REQUIRE(q1 >= *std::min_element(v.begin(), v.end()));
        REQUIRE(q3 <= *std::max_element(v.begin(), v.end()));
    }
}

TEST_CASE("parameter IQR per group", "[quantile]") {
    auto recs = synthetic_records(4, 5);
    for (auto& r : recs)
        if (r.group == "female") r.params.fill(0.5);
    const auto iqr = parameter_iqr(recs, "female");
    for (const auto& [q1, q3] : iqr) {
        CHECK(q1 == 0.5);
        CHECK(q3 == 0.5);
    }
    CHECK(code_of([&] { parameter_iqr(recs, "other"); }) == ErrorCode::EmptyGroup);

    const auto cmp = compare_parameters(recs, "male", "female");
    REQUIRE(cmp.size() == kNumParams);
    CHECK(cmp[0].parameter == "red");
    CHECK(cmp[0].iqr_b == std::pair{0.5, 0.5});
    CHECK(compare_objectives(recs, "male", "female").size() == kNumObjectives);
}

// ---------------------------------------------------------------------------
// ingest

TEST_CASE("study CSV round trip", "[ingest]") {
    const auto recs = synthetic_records(3, 8);
    const auto back = parse(write_study_csv(recs));
    CHECK(back.violations.empty());
    CHECK(back.data_rows == recs.size());
    CHECK(back.records == recs);
}

TEST_CASE("session records export", "[ingest]") {
    SessionConfig cfg;
    cfg.n_optimization = 0;
    Session s = Session::start(cfg);
    std::array<double, kNumParams> ideal{};
    ideal.fill(0.2); // away from the first design, which would end the session early
    const auto rater = make_rater(ideal, 0.3, 2);
    for (int i = 0; i < 5; ++i) s.submit(rate(rater, *s.pending_design(), i + 1));
    const auto recs = session_records(s, "P, \"quoted\"", "female");
    REQUIRE(recs.size() == 5);
    CHECK(recs[4].iteration == 5);
    CHECK(recs[0].phase == "sampling");
    CHECK(parse(write_study_csv(recs)).records == recs);
}

TEST_CASE("ingest reports invalid rows without dropping valid ones", "[ingest]") {
    const auto recs = synthetic_records(2, 4);
    auto lines = split_lines(write_study_csv(recs));
    const auto header = split_lines(write_study_csv({}))[0];
    // Row 2: p1 out of range.
    auto f = detail::split_csv_line(lines[2]);
    f[4] = "1.5";
    std::string row;
    for (std::size_t i = 0; i < f.size(); ++i) row += (i ? "," : "") + f[i];
    lines[2] = row;
    // Duplicate of row 3 appended.
    lines.push_back(lines[3]);
    const auto res = parse(join_lines(lines));
    CHECK(res.data_rows == recs.size() + 1);
    CHECK(res.records.size() == recs.size() - 1);
    REQUIRE(res.violations.size() == 2);
    CHECK(res.violations[0].row == 2);
    CHECK(res.violations[1].row == recs.size() + 1);
    CHECK(lines[0] == header);
}

TEST_CASE("ingest errors", "[ingest]") {
    CHECK(code_of([] { parse(""); }) == ErrorCode::SchemaError);
    CHECK(code_of([] { parse("\n\n"); }) == ErrorCode::SchemaError);
    CHECK(code_of([] { parse("participant,iteration\nA,1\n"); }) == ErrorCode::SchemaError);

    const auto lines = split_lines(write_study_csv(synthetic_records(1, 2)));
    auto bad = lines;
    bad[1] += ",extra";
    CHECK(code_of([&] { parse(join_lines(bad)); }) == ErrorCode::ParseError);
    bad = lines;
    auto f = detail::split_csv_line(bad[1]);
    f[5] = "abc";
    bad[1].clear();
    for (std::size_t i = 0; i < f.size(); ++i) bad[1] += (i ? "," : "") + f[i];
    CHECK(code_of([&] { parse(join_lines(bad)); }) == ErrorCode::ParseError);
    CHECK(code_of([] { ingest_dataset("/nonexistent/study.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("schema mapping renames columns and derives normalized objectives", "[ingest]") {
    const auto recs = synthetic_records(2, 5);
    auto lines = split_lines(write_study_csv(recs));
    // Keep only the canonical columns up to the raw objectives, renaming two.
    const std::size_t keep = 4 + kNumParams + kNumObjectives;
    for (auto& l : lines) {
        auto f = detail::split_csv_line(l);
        f.resize(keep);
        l.clear();
        for (std::size_t i = 0; i < f.size(); ++i) l += (i ? "," : "") + f[i];
    }
    auto header = detail::split_csv_line(lines[0]);
    header[0] = "pid";
    header[4] = "red";
    lines[0].clear();
    for (std::size_t i = 0; i < header.size(); ++i) lines[0] += (i ? "," : "") + header[i];

    CHECK(code_of([&] { parse(join_lines(lines)); }) == ErrorCode::SchemaError);
    const SchemaMapping m = schema_mapping_from_json(Json{{"columns", {{"participant", "pid"}, {"p1", "red"}}}});
    const auto res = parse(join_lines(lines), m);
    REQUIRE(res.records.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(res.records[i].participant == recs[i].participant);
        CHECK(res.records[i].params == recs[i].params);
        CHECK(res.records[i].normalized == recs[i].normalized);
    }
}

// ---------------------------------------------------------------------------
// Pareto filtering

TEST_CASE("Pareto flags are computed per participant", "[pareto-filter]") {
    auto recs = synthetic_records(1, 10);
    auto copy = recs;
    for (auto& r : copy) r.participant = "Q";
    // A dominating record for Q only.
    StudyRecord top = copy.front();
    top.iteration = 99;
    top.normalized.fill(1.0);
    top.raw = {5, 5, 1, 3, 7, 7, 0};
    copy.push_back(top);
    std::vector<StudyRecord> all = recs;
    all.insert(all.end(), copy.begin(), copy.end());

    const auto flags = pareto_flags(all);
    const auto solo = pareto_flags(recs);
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(flags[i] == solo[i]);
    for (std::size_t i = recs.size(); i + 1 < all.size(); ++i) CHECK_FALSE(flags[i]);
    CHECK(flags.back());
}

TEST_CASE("raw and normalized Pareto flags agree inside the scale ranges", "[pareto-filter][property]") {
    const auto recs = synthetic_records(8, 20, 4);
    for (const auto& r : recs) REQUIRE(r.raw[6] <= 60.0);
    CHECK(pareto_flags(recs, ObjectiveSpace::Raw) == pareto_flags(recs, ObjectiveSpace::Normalized));
    const auto counts = pareto_counts_by_group(recs);
    const auto flags = pareto_flags(recs);
    CHECK(counts.at("female") + counts.at("male") == std::size_t(std::count(flags.begin(), flags.end(), true)));
}
