#pragma once

/*
 * Beat-tracking accuracy metrics.
 *
 * Count-based scores use one-to-one greedy matching inside a tolerance
 * window that scales with the local inter-annotation interval:
 *
 *   P = b / (b + max(p, n))        F = b / (b + (p + n) / 2)
 *
 * with b correct, p false and n missed beats.
 *
 * Continuity metrics follow the CML/AML convention: a detected beat is
 * correct when it is phase-accurate to its reference beat and its
 * inter-beat interval matches the local reference interval; runs of
 * correct beats that advance the reference one annotation at a time give
 * CML_c (longest run ratio) and CML_t (total ratio). The AML variants
 * take the best value over allowed metrical levels: original, double,
 * half, and off-beat.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <string>
#include <vector>

#include "obtain/errors.hpp"

namespace obtain {

struct MatchCounts {
    int correct = 0;   // b
    int false_pos = 0; // p
    int missed = 0;    // n
};

struct EvalConfig {
    double tempo_tolerance = 0.175;
    double phase_tolerance = 0.25;
    double fmeasure_window = 0.175;
    double skip_sec = 5.0;
    bool skip_transient = false;

    bool valid() const noexcept {
        auto frac = [](double v) { return v > 0.0 && v < 1.0; };
        return frac(tempo_tolerance) && frac(phase_tolerance) && frac(fmeasure_window) &&
               skip_sec >= 0.0;
    }
};

struct EvalReport {
    double cml_c = 0.0;
    double cml_t = 0.0;
    double aml_c = 0.0;
    double aml_t = 0.0;
    double p_score = 0.0;
    double f_measure = 0.0;
};

namespace metrics_detail {

inline std::vector<double> drop_before(const std::vector<double>& times, double cutoff) {
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        if (t >= cutoff) {
            out.push_back(t);
        }
    }
    return out;
}

/// Local inter-annotation interval around reference beat j.
inline double local_interval(const std::vector<double>& ref, std::size_t j) {
    if (ref.size() < 2) {
        throw EvalError("metrics require at least 2 reference beats");
    }
    return j > 0 ? ref[j] - ref[j - 1] : ref[1] - ref[0];
}

inline std::size_t nearest_index(const std::vector<double>& ref, double t) {
    const auto it = std::lower_bound(ref.begin(), ref.end(), t);
    if (it == ref.begin()) {
        return 0;
    }
    if (it == ref.end()) {
        return ref.size() - 1;
    }
    const auto hi = static_cast<std::size_t>(it - ref.begin());
    const std::size_t lo = hi - 1;
    return (t - ref[lo]) <= (ref[hi] - t) ? lo : hi;
}

} // namespace metrics_detail

/// One-to-one greedy matching by ascending time distance. A detection may
/// claim a reference beat when it lies within fmeasure_window times the
/// local inter-annotation interval.
inline MatchCounts match_beats(const std::vector<double>& detected,
                               const std::vector<double>& reference,
                               const EvalConfig& cfg) {
    using namespace metrics_detail;
    std::vector<double> det = detected;
    std::vector<double> ref = reference;
    if (cfg.skip_transient) {
        det = drop_before(det, cfg.skip_sec);
        ref = drop_before(ref, cfg.skip_sec);
    }
    if (ref.empty()) {
        throw EvalError("empty reference annotation");
    }
    if (ref.size() < 2) {
        throw EvalError("metrics require at least 2 reference beats");
    }

    struct Pair {
        double dist;
        std::size_t ref_idx;
        std::size_t det_idx;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < det.size(); ++i) {
        for (std::size_t j = 0; j < ref.size(); ++j) {
            const double window = cfg.fmeasure_window * local_interval(ref, j);
            const double dist = std::abs(det[i] - ref[j]);
            if (dist <= window) {
                pairs.push_back({dist, j, i});
            }
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.dist != b.dist) {
            return a.dist < b.dist;
        }
        if (a.ref_idx != b.ref_idx) {
            return a.ref_idx < b.ref_idx;
        }
        return a.det_idx < b.det_idx;
    });

    std::vector<bool> det_used(det.size(), false);
    std::vector<bool> ref_used(ref.size(), false);
    int b = 0;
    for (const Pair& pair : pairs) {
        if (!det_used[pair.det_idx] && !ref_used[pair.ref_idx]) {
            det_used[pair.det_idx] = true;
            ref_used[pair.ref_idx] = true;
            ++b;
        }
    }
    MatchCounts counts;
    counts.correct = b;
    counts.false_pos = static_cast<int>(det.size()) - b;
    counts.missed = static_cast<int>(ref.size()) - b;
    return counts;
}

inline double p_score(const MatchCounts& counts) {
    const int denom = counts.correct + std::max(counts.false_pos, counts.missed);
    if (denom <= 0) {
        throw EvalError("P-score undefined: no beats in either sequence");
    }
    return static_cast<double>(counts.correct) / denom;
}

inline double f_measure(const MatchCounts& counts) {
    const double denom =
        counts.correct + (counts.false_pos + counts.missed) / 2.0;
    if (denom <= 0.0) {
        throw EvalError("F-measure undefined: no beats in either sequence");
    }
    return counts.correct / denom;
}

struct ContinuityScores {
    double cml_c = 0.0;
    double cml_t = 0.0;
    double aml_c = 0.0;
    double aml_t = 0.0;
};

namespace metrics_detail {

/// Longest-run and total continuity ratios at one metrical level.
inline std::pair<double, double> continuity_at_level(const std::vector<double>& det,
                                                     const std::vector<double>& ref,
                                                     const EvalConfig& cfg) {
    if (ref.size() < 2) {
        throw EvalError("metrics require at least 2 reference beats");
    }
    if (det.empty()) {
        return {0.0, 0.0};
    }

    const std::size_t n_det = det.size();
    std::vector<std::size_t> map(n_det);
    std::vector<bool> correct(n_det, false);
    for (std::size_t i = 0; i < n_det; ++i) {
        const std::size_t j = nearest_index(ref, det[i]);
        map[i] = j;
        const double interval = local_interval(ref, j);
        const bool phase_ok = std::abs(det[i] - ref[j]) <= cfg.phase_tolerance * interval;
        bool tempo_ok = true;
        if (i > 0) {
            const double ibi = det[i] - det[i - 1];
            tempo_ok = std::abs(ibi - interval) <= cfg.tempo_tolerance * interval;
        }
        correct[i] = phase_ok && tempo_ok;
    }

    int total = 0;
    int longest = 0;
    int run = 0;
    for (std::size_t i = 0; i < n_det; ++i) {
        if (!correct[i]) {
            run = 0;
            continue;
        }
        ++total;
        const bool linked = i > 0 && correct[i - 1] && map[i] == map[i - 1] + 1;
        run = linked ? run + 1 : 1;
        longest = std::max(longest, run);
    }
    const auto denom = static_cast<double>(ref.size());
    return {std::min(1.0, longest / denom), std::min(1.0, total / denom)};
}

inline std::vector<double> level_double(const std::vector<double>& ref) {
    std::vector<double> out;
    out.reserve(ref.size() * 2);
    for (std::size_t j = 0; j + 1 < ref.size(); ++j) {
        out.push_back(ref[j]);
        out.push_back((ref[j] + ref[j + 1]) / 2.0);
    }
    out.push_back(ref.back());
    return out;
}

inline std::vector<double> level_half(const std::vector<double>& ref) {
    std::vector<double> out;
    for (std::size_t j = 0; j < ref.size(); j += 2) {
        out.push_back(ref[j]);
    }
    return out;
}

inline std::vector<double> level_offbeat(const std::vector<double>& ref) {
    std::vector<double> out;
    out.reserve(ref.size());
    for (std::size_t j = 0; j + 1 < ref.size(); ++j) {
        out.push_back((ref[j] + ref[j + 1]) / 2.0);
    }
    return out;
}

} // namespace metrics_detail

/// The four continuity metrics. AML values take the maximum over the
/// allowed metrical levels {original, double, half, off-beat}.
inline ContinuityScores continuity_metrics(const std::vector<double>& detected,
                                           const std::vector<double>& reference,
                                           const EvalConfig& cfg) {
    using namespace metrics_detail;
    std::vector<double> det = detected;
    std::vector<double> ref = reference;
    if (cfg.skip_transient) {
        det = drop_before(det, cfg.skip_sec);
        ref = drop_before(ref, cfg.skip_sec);
    }
    if (ref.size() < 2) {
        throw EvalError("metrics require at least 2 reference beats");
    }

    ContinuityScores scores;
    const auto [cml_c, cml_t] = continuity_at_level(det, ref, cfg);
    scores.cml_c = cml_c;
    scores.cml_t = cml_t;
    scores.aml_c = cml_c;
    scores.aml_t = cml_t;
    for (const auto& level : {level_double(ref), level_half(ref), level_offbeat(ref)}) {
        if (level.size() < 2) {
            continue;
        }
        const auto [c, t] = continuity_at_level(det, level, cfg);
        scores.aml_c = std::max(scores.aml_c, c);
        scores.aml_t = std::max(scores.aml_t, t);
    }
    return scores;
}

/// All six metrics in one report.
inline EvalReport evaluate(const std::vector<double>& detected,
                           const std::vector<double>& reference, const EvalConfig& cfg) {
    const MatchCounts counts = match_beats(detected, reference, cfg);
    const ContinuityScores continuity = continuity_metrics(detected, reference, cfg);
    EvalReport report;
    report.cml_c = continuity.cml_c;
    report.cml_t = continuity.cml_t;
    report.aml_c = continuity.aml_c;
    report.aml_t = continuity.aml_t;
    report.p_score = p_score(counts);
    report.f_measure = f_measure(counts);
    return report;
}

struct SweepRow {
    double tolerance = 0.0;
    double cml_t = 0.0;
    double cml_c = 0.0;
    double aml_t = 0.0;
    double aml_c = 0.0;
};

/// Continuity metrics recomputed at each phase tolerance.
inline std::vector<SweepRow> tolerance_sweep(const std::vector<double>& detected,
                                             const std::vector<double>& reference,
                                             const std::vector<double>& tolerances,
                                             EvalConfig cfg) {
    std::vector<SweepRow> rows;
    rows.reserve(tolerances.size());
    for (double tol : tolerances) {
        cfg.phase_tolerance = tol;
        const auto scores = continuity_metrics(detected, reference, cfg);
        rows.push_back({tol, scores.cml_t, scores.cml_c, scores.aml_t, scores.aml_c});
    }
    return rows;
}

/// Parse a beat-annotation stream: one time (seconds) per line, `#`
/// comments and blank lines ignored. Times must be non-negative and
/// strictly increasing.
inline std::vector<double> parse_annotations(std::istream& in) {
    std::vector<double> times;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::size_t consumed = 0;
        double value = 0.0;
        try {
            value = std::stod(line.substr(first), &consumed);
        } catch (const std::exception&) {
            throw EvalError("annotation parse error at line " + std::to_string(line_no));
        }
        const auto rest = line.find_first_not_of(" \t\r", first + consumed);
        if (rest != std::string::npos && line[rest] != '#') {
            throw EvalError("annotation parse error at line " + std::to_string(line_no));
        }
        if (value < 0.0 || (!times.empty() && value <= times.back())) {
            throw EvalError("annotation times must be non-negative and strictly "
                            "increasing (line " +
                            std::to_string(line_no) + ")");
        }
        times.push_back(value);
    }
    return times;
}

/// Six-metric JSON object, 4 decimal places per field.
inline std::string format_report_json(const EvalReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "{\"cml_c\": %.4f, \"cml_t\": %.4f, \"aml_c\": %.4f, "
                  "\"aml_t\": %.4f, \"p_score\": %.4f, \"f_measure\": %.4f}",
                  report.cml_c, report.cml_t, report.aml_c, report.aml_t,
                  report.p_score, report.f_measure);
    return buf;
}

} // namespace obtain
