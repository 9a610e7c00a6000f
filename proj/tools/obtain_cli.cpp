// obtain - streaming beat tracker and evaluation CLI.
//
//   obtain track  <input.wav>            detect beats in an audio file
//   obtain stream                        detect beats in raw PCM on stdin
//   obtain eval   <detected> <reference> score beats against annotations
//   obtain sweep  <detected> <reference> continuity metrics vs. phase tolerance

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "obtain/obtain.hpp"

namespace {

struct TrackOptions {
    std::string input;
    std::string output;
    std::string debug_csv_dir;
    bool json = false;
};

struct StreamOptions {
    int rate = 44100;
    int channels = 1;
    bool json = false;
};

struct EvalOptions {
    std::string detected;
    std::string reference;
};

struct SweepOptions {
    std::string detected;
    std::string reference;
    std::string tolerances = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5";
};

void add_pipeline_flags(CLI::App* cmd, obtain::PipelineConfig& cfg) {
    cmd->add_option("--window-len", cfg.frame.window_len, "Analysis window length (samples)")
        ->capture_default_str();
    cmd->add_option("--hop", cfg.frame.hop, "Hop size (samples)")->capture_default_str();
    cmd->add_option("--gamma", cfg.compression.gamma, "Log-compression strength")
        ->capture_default_str();
    cmd->add_option("--noise-floor-db", cfg.compression.noise_floor_db,
                    "Noise gate depth below the reference maximum (dB)")
        ->capture_default_str();
    cmd->add_option("--ref-span", cfg.compression.ref_span_frames,
                    "Frames used to estimate the normalization maximum")
        ->capture_default_str();
    cmd->add_option("--tempo-buffer", cfg.tempo.buffer_len, "Tempo buffer length (OSS samples)")
        ->capture_default_str();
    cmd->add_option("--tempo-hop", cfg.tempo.buffer_hop,
                    "Samples between tempo re-estimations")
        ->capture_default_str();
    cmd->add_option("--min-bpm", cfg.tempo.min_bpm, "Lower tempo limit")->capture_default_str();
    cmd->add_option("--max-bpm", cfg.tempo.max_bpm, "Upper tempo limit")->capture_default_str();
    cmd->add_option("--candidates", cfg.tempo.n_candidates, "Tempo candidates per estimate")
        ->capture_default_str();
    cmd->add_option("--history-sec", cfg.tempo.history_sec, "Tempo history span (s)")
        ->capture_default_str();
    cmd->add_option("--change-threshold", cfg.tempo.change_threshold_bpm,
                    "Tempo-change threshold (BPM)")
        ->capture_default_str();
    cmd->add_option("--change-delay", cfg.tempo.change_delay_sec,
                    "Persistence required before adopting a new tempo (s)")
        ->capture_default_str();
    cmd->add_option("--kernel-bpm", cfg.tempo.accumulator_kernel_bpm,
                    "Accumulator kernel width (BPM)")
        ->capture_default_str();
    cmd->add_option("--accumulator-decay", cfg.tempo.accumulator_decay,
                    "Accumulator recency decay per estimate")
        ->capture_default_str();
    cmd->add_option("--alpha", cfg.cbss.alpha, "CBSS blend weight")->capture_default_str();
    cmd->add_option("--eta", cfg.cbss.eta, "Log-Gaussian window width")->capture_default_str();
    cmd->add_option("--seed", cfg.detector.rng_seed, "Peak-detector RNG seed")
        ->capture_default_str();
}

std::string format_event_text(const obtain::BeatEvent& event) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f\n", event.time_sec);
    return buf;
}

std::string format_event_json(const obtain::BeatEvent& event) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "{\"time\": %.6f, \"source\": \"%s\"}\n",
                  event.time_sec, obtain::to_string(event.source));
    return buf;
}

int run_track(const TrackOptions& opts, const obtain::PipelineConfig& cfg) {
    const bool want_traces = !opts.debug_csv_dir.empty();
    obtain::RunResult result = obtain::run_file(opts.input, cfg, want_traces);

    std::string out;
    for (const auto& event : result.events) {
        out += opts.json ? format_event_json(event) : format_event_text(event);
    }
    if (opts.output.empty()) {
        std::cout << out;
    } else {
        std::ofstream file(opts.output, std::ios::trunc);
        if (!file) {
            throw obtain::InputError("cannot open output file: " + opts.output);
        }
        file << out;
    }
    if (want_traces) {
        namespace fs = std::filesystem;
        fs::create_directories(opts.debug_csv_dir);
        const fs::path dir(opts.debug_csv_dir);
        std::ofstream(dir / "oss.csv") << obtain::format_oss_csv(result.traces.oss);
        std::ofstream(dir / "cbss.csv") << obtain::format_cbss_csv(result.traces.cbss);
        std::ofstream(dir / "tempo.csv") << obtain::format_tempo_csv(result.traces.tempo);
    }
    std::cerr << "processed " << result.audio_sec << " s of audio in " << result.wall_sec
              << " s; " << result.events.size() << " beats; per-hop p99 "
              << result.latency.p99_ms << " ms (budget " << result.latency.budget_ms
              << " ms, " << result.latency.overruns << " overruns)\n";
    return 0;
}

int run_stream_cmd(const StreamOptions& opts, const obtain::PipelineConfig& cfg) {
    std::ios::sync_with_stdio(false);
    const auto sink = [&](const obtain::BeatEvent& event) {
        std::cout << (opts.json ? format_event_json(event) : format_event_text(event));
        std::cout.flush();
        return static_cast<bool>(std::cout);
    };
    obtain::LatencyStats latency;
    const int status = obtain::run_stream(std::cin, opts.rate, opts.channels, sink, cfg,
                                          &latency);
    std::cerr << "stream done; " << latency.hops << " hops, p99 " << latency.p99_ms
              << " ms (budget " << latency.budget_ms << " ms, " << latency.overruns
              << " overruns)\n";
    return status;
}

std::vector<double> load_annotations(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw obtain::InputError("cannot open annotation file: " + path);
    }
    try {
        return obtain::parse_annotations(file);
    } catch (const obtain::EvalError& e) {
        throw obtain::EvalError(path + ": " + e.what());
    }
}

int run_eval(const EvalOptions& opts, const obtain::EvalConfig& cfg) {
    const auto detected = load_annotations(opts.detected);
    const auto reference = load_annotations(opts.reference);
    const auto report = obtain::evaluate(detected, reference, cfg);
    std::cout << obtain::format_report_json(report) << "\n";
    return 0;
}

int run_sweep(const SweepOptions& opts, const obtain::EvalConfig& cfg) {
    const auto detected = load_annotations(opts.detected);
    const auto reference = load_annotations(opts.reference);

    std::vector<double> tolerances;
    std::stringstream ss(opts.tolerances);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        try {
            tolerances.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw obtain::InputError("bad tolerance value: " + item);
        }
    }
    const auto rows = obtain::tolerance_sweep(detected, reference, tolerances, cfg);
    std::string out = "tolerance,cml_t,cml_c,aml_t,aml_c\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%g,%.4f,%.4f,%.4f,%.4f\n", r.tolerance, r.cml_t,
                      r.cml_c, r.aml_t, r.aml_c);
        out += buf;
    }
    std::cout << out;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"obtain - real-time beat tracking"};
    app.require_subcommand(1);

    obtain::PipelineConfig cfg;
    TrackOptions track_opts;
    StreamOptions stream_opts;
    EvalOptions eval_opts;
    SweepOptions sweep_opts;

    auto* track = app.add_subcommand("track", "Detect beats in an audio file");
    track->add_option("input", track_opts.input, "Input WAV file")->required();
    track->add_option("-o,--output", track_opts.output,
                      "Write beat times here instead of stdout");
    track->add_flag("--json", track_opts.json, "Emit JSON lines instead of plain times");
    track->add_option("--debug-csv", track_opts.debug_csv_dir,
                      "Directory for oss.csv, cbss.csv and tempo.csv traces");
    add_pipeline_flags(track, cfg);

    auto* stream = app.add_subcommand("stream",
                                      "Detect beats in raw s16le PCM read from stdin");
    stream->add_option("--rate", stream_opts.rate, "Input sample rate (Hz)")
        ->capture_default_str();
    stream->add_option("--channels", stream_opts.channels, "Input channel count")
        ->capture_default_str();
    stream->add_flag("--json", stream_opts.json, "Emit JSON lines instead of plain times");
    add_pipeline_flags(stream, cfg);

    auto* eval = app.add_subcommand("eval", "Score detected beats against annotations");
    eval->add_option("detected", eval_opts.detected, "Detected beat times (text)")->required();
    eval->add_option("reference", eval_opts.reference, "Reference annotations (text)")
        ->required();
    eval->add_option("--tempo-tol", cfg.eval.tempo_tolerance, "Continuity tempo tolerance")
        ->capture_default_str();
    eval->add_option("--phase-tol", cfg.eval.phase_tolerance, "Continuity phase tolerance")
        ->capture_default_str();
    eval->add_option("--f-window", cfg.eval.fmeasure_window,
                     "F-measure window (fraction of the local interval)")
        ->capture_default_str();
    eval->add_flag("--skip-transient", cfg.eval.skip_transient,
                   "Drop the first 5 s from both sequences");
    eval->add_option("--skip-sec", cfg.eval.skip_sec, "Transient length to drop (s)")
        ->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "Continuity metrics vs. phase tolerance");
    sweep->add_option("detected", sweep_opts.detected, "Detected beat times (text)")
        ->required();
    sweep->add_option("reference", sweep_opts.reference, "Reference annotations (text)")
        ->required();
    sweep->add_option("--tolerances", sweep_opts.tolerances,
                      "Comma-separated phase tolerances")
        ->capture_default_str();
    sweep->add_option("--tempo-tol", cfg.eval.tempo_tolerance, "Continuity tempo tolerance")
        ->capture_default_str();
    sweep->add_flag("--skip-transient", cfg.eval.skip_transient,
                    "Drop the first 5 s from both sequences");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (track->parsed()) {
            return run_track(track_opts, cfg);
        }
        if (stream->parsed()) {
            return run_stream_cmd(stream_opts, cfg);
        }
        if (eval->parsed()) {
            return run_eval(eval_opts, cfg.eval);
        }
        if (sweep->parsed()) {
            return run_sweep(sweep_opts, cfg.eval);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
