// Regenerates data/gbsg2.csv and data/gbsg2.schema.json.
//
// The file shipped in data/ is a synthetic replica of the GBSG2 breast
// cancer study table (686 patients, 8 covariates, 44% censored): marginals,
// effect directions and censoring follow the published summary statistics,
// but the rows are simulated. Point experiment configs at a real GBSG2
// export (R package TH.data, or scikit-survival's loader) to reproduce
// results on the original data; the column layout matches.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsurf/csv.hpp"
#include "fedsurf/dataset.hpp"
#include "fedsurf/rng.hpp"

using namespace fedsurf;

namespace {

constexpr std::size_t kRecords = 686;
constexpr std::size_t kTargetCensored = 302;  // 44.02%
constexpr std::uint64_t kSeed = 230486;

// Log-hazard effects on transformed covariates; magnitudes tuned so a
// survival forest reaches a test concordance in the low .70s, like the
// published GBSG2 results.
constexpr double kHorThEffect = -0.82;
constexpr double kAgeEffect = -0.246;      // per (age-53)/10
constexpr double kMenoEffect = 0.41;
constexpr double kSizeEffect = 0.451;      // per (tsize-29)/14
constexpr double kGradeEffect[3] = {0.0, 1.1275, 1.476};
constexpr double kNodesEffect = 1.271;     // per log1p(pnodes) - log1p(3)
constexpr double kProgrecEffect = -0.656;  // per (log1p(progrec) - log1p(32)) / 1.6
constexpr double kEstrecEffect = -0.164;   // per (log1p(estrec) - log1p(36)) / 1.3

constexpr double kWeibullShape = 1.3;
constexpr double kWeibullScale = 1400.0;  // days

struct Patient {
    double hor_th, age, menostat, tsize, tgrade, pnodes, progrec, estrec;
    double log_hazard() const {
        double lp = 0.0;
        lp += kHorThEffect * hor_th;
        lp += kAgeEffect * (age - 53.0) / 10.0;
        lp += kMenoEffect * menostat;
        lp += kSizeEffect * (tsize - 29.0) / 14.0;
        lp += kGradeEffect[static_cast<int>(tgrade)];
        lp += kNodesEffect * (std::log1p(pnodes) - std::log1p(3.0));
        lp += kProgrecEffect * (std::log1p(progrec) - std::log1p(32.0)) / 1.6;
        lp += kEstrecEffect * (std::log1p(estrec) - std::log1p(36.0)) / 1.3;
        return lp;
    }
};

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

}  // namespace

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "data";
    std::filesystem::create_directories(out_dir);

    Rng rng(kSeed);
    std::vector<Patient> patients(kRecords);
    std::vector<double> event_time(kRecords);

    for (std::size_t i = 0; i < kRecords; ++i) {
        Patient& p = patients[i];
        p.age = std::round(clip(53.0 + 10.0 * rng.normal(), 21.0, 80.0));
        const double post_prob = p.age >= 50.0 ? 0.93 : 0.12;
        p.menostat = rng.uniform01() < post_prob ? 1.0 : 0.0;
        p.hor_th = rng.uniform01() < 0.36 ? 1.0 : 0.0;
        p.tsize = std::round(clip(std::exp(3.30 + 0.44 * rng.normal()), 3.0, 120.0));
        const double grade_u = rng.uniform01();
        p.tgrade = grade_u < 0.118 ? 0.0 : (grade_u < 0.765 ? 1.0 : 2.0);
        p.pnodes = std::round(clip(1.0 + 4.3 * rng.exponential(), 1.0, 51.0));
        p.progrec = std::round(clip(std::exp(3.50 + 1.60 * rng.normal()) - 1.0, 0.0, 2380.0));
        p.estrec = std::round(clip(std::exp(3.60 + 1.30 * rng.normal()) - 1.0, 0.0, 1144.0));

        // Weibull proportional hazards draw.
        const double u = rng.exponential();
        event_time[i] =
            kWeibullScale * std::pow(u / std::exp(p.log_hazard()), 1.0 / kWeibullShape);
    }

    // Administrative censoring window; the upper bound is bisected so the
    // censored count lands on the published 44%.
    std::vector<double> censor_u(kRecords);
    for (auto& u : censor_u) u = rng.uniform01();
    auto censored_count = [&](double window) {
        std::size_t censored = 0;
        for (std::size_t i = 0; i < kRecords; ++i) {
            const double censor_time = 120.0 + window * censor_u[i];
            censored += event_time[i] > censor_time ? 1 : 0;
        }
        return censored;
    };
    double lo = 100.0;
    double hi = 20000.0;
    for (int iter = 0; iter < 100; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (censored_count(mid) > kTargetCensored) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double window = hi;

    FeatureSchema schema;
    schema.features = {
        {"horTh", FeatureKind::CategoricalOrdinal, {"no", "yes"}},
        {"age", FeatureKind::Numerical, {}},
        {"menostat", FeatureKind::CategoricalOrdinal, {"Pre", "Post"}},
        {"tsize", FeatureKind::Numerical, {}},
        {"tgrade", FeatureKind::CategoricalOrdinal, {"I", "II", "III"}},
        {"pnodes", FeatureKind::Numerical, {}},
        {"progrec", FeatureKind::Numerical, {}},
        {"estrec", FeatureKind::Numerical, {}},
    };
    schema.time_column = "time";
    schema.event_column = "cens";
    schema.missing_marker = "?";

    std::vector<SurvivalRecord> rows(kRecords);
    std::size_t censored = 0;
    for (std::size_t i = 0; i < kRecords; ++i) {
        const Patient& p = patients[i];
        const double censor_time = 120.0 + window * censor_u[i];
        const bool event = event_time[i] <= censor_time;
        censored += event ? 0 : 1;
        rows[i].features = {p.hor_th, p.age,    p.menostat, p.tsize,
                            p.tgrade, p.pnodes, p.progrec,  p.estrec};
        rows[i].event = event;
        rows[i].time = std::max(1.0, std::round(event ? event_time[i] : censor_time));
    }

    const SurvivalDataset data(rows, schema);
    save_csv(data, out_dir + "/gbsg2.csv");
    std::FILE* schema_file = std::fopen((out_dir + "/gbsg2.schema.json").c_str(), "wb");
    const std::string schema_text = schema_to_json_text(schema);
    std::fwrite(schema_text.data(), 1, schema_text.size(), schema_file);
    std::fclose(schema_file);

    std::printf("wrote %s/gbsg2.csv: %zu records, %zu censored (%.1f%%)\n", out_dir.c_str(),
                data.size(), censored, 100.0 * static_cast<double>(censored) / kRecords);
    return 0;
}
