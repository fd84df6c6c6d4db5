#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpmap/config.hpp"
#include "fpmap/error.hpp"
#include "fpmap/localization.hpp"
#include "fpmap/pdr.hpp"
#include "fpmap/radiomap.hpp"
#include "fpmap/sim.hpp"

namespace fpmap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
    cmd->add_option("--config", c.config_path, "Config file (defaults apply when omitted)");
    cmd->add_option("--set", c.overrides, "Override one config key: key=value")->take_all();
    cmd->add_option("--seed", c.seed, "Random seed");
    auto* out = cmd->add_option("--out", c.out_dir, "Output directory");
    if (needs_out) out->required();
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

PipelineConfig resolve_config(const Common& c) {
    PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
    for (const auto& o : c.overrides) apply_override(cfg, o);
    cfg.validate();
    return cfg;
}

/// Collects outputs as strings and commits them with write-then-rename, so a
/// failing command leaves no half-written files behind.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

    std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& [name, _] : files_) n.push_back(name);
        return n;
    }

    void commit() {
        fs::create_directories(dir_);
        std::vector<fs::path> temps;
        try {
            for (const auto& [name, content] : files_) {
                const fs::path tmp = dir_ / (name + ".tmp");
                temps.push_back(tmp);
                std::ofstream f(tmp, std::ios::binary);
                if (!f) throw Error("cannot write " + tmp.string());
                f << content;
                f.close();
                if (!f) throw Error("failed writing " + tmp.string());
            }
            for (const auto& [name, _] : files_) fs::rename(dir_ / (name + ".tmp"), dir_ / name);
        } catch (...) {
            std::error_code ec;
            for (const auto& t : temps) fs::remove(t, ec);
            throw;
        }
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

json parse_json_text(const std::string& text) { return json::parse(text); }

std::string manifest(const std::string& command, const json& inputs, const PipelineConfig& cfg,
                     std::optional<std::uint64_t> seed, const std::vector<std::string>& outputs) {
    json m = {{"command", command},
              {"inputs", inputs},
              {"config", parse_json_text(config_to_json(cfg))},
              {"seed", seed ? json(*seed) : json(nullptr)},
              {"outputs", outputs}};
    return m.dump(2) + "\n";
}

void finish(OutputSet& outs, const std::string& command, const json& inputs, const PipelineConfig& cfg,
            std::optional<std::uint64_t> seed) {
    auto names = outs.names();
    names.push_back("manifest.json");
    outs.add("manifest.json", manifest(command, inputs, cfg, seed, names));
    outs.commit();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParseError("bad number \"" + item + "\" in list \"" + text + "\"");
        }
    }
    return out;
}

// --- shared pipeline stages -----------------------------------------------------------

struct TrackStats {
    std::vector<double> errors;  // sorted
    double mean = 0;
};

std::optional<TrackStats> track_stats(const Trajectory& traj, const SensorTrace& trace) {
    if (trace.truth.empty()) return std::nullopt;
    TrackStats s;
    s.errors = position_errors(traj, trace.truth);
    if (s.errors.empty()) return std::nullopt;
    s.mean = std::accumulate(s.errors.begin(), s.errors.end(), 0.0) / static_cast<double>(s.errors.size());
    std::sort(s.errors.begin(), s.errors.end());
    return s;
}

std::string track_summary_json(const Trajectory& traj, const std::optional<TrackStats>& stats,
                               HeadingSource mode) {
    json j = {{"mode", heading_source_name(mode)},
              {"poses", traj.poses.size()},
              {"segments", traj.segments.size()},
              {"landmark_visits", traj.landmark_visits.size()},
              {"missed_step_anomalies", traj.missed_step_anomalies}};
    if (stats) {
        j["mean_error_m"] = stats->mean;
        j["p50"] = percentile(stats->errors, 0.5);
        j["p90"] = percentile(stats->errors, 0.9);
        j["max_error_m"] = stats->errors.back();
    }
    return j.dump(2) + "\n";
}

std::string cdf_csv(const std::vector<double>& sorted) {
    std::string s = "error_m,fraction\n";
    for (std::size_t i = 0; i < sorted.size(); ++i)
        s += fmt(sorted[i]) + "," + fmt(static_cast<double>(i + 1) / static_cast<double>(sorted.size())) + "\n";
    return s;
}

std::string segments_csv(const BuildReport& rep) {
    std::string s = "segment,belief,scans,accepted\n";
    for (const auto& seg : rep.segments)
        s += std::to_string(seg.segment) + "," + (seg.belief ? fmt(*seg.belief) : std::string("")) + "," +
             std::to_string(seg.scans) + "," + std::to_string(seg.accepted) + "\n";
    return s;
}

std::string summary_row(double tau, const std::string& metric, const EvaluationReport& rep) {
    auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(""); };
    return fmt(tau) + "," + metric + "," + std::to_string(rep.outcomes.size()) + "," + fmt(rep.floor_accuracy) +
           "," + opt(rep.mean_error) + "," + opt(rep.p50) + "," + opt(rep.p75) + "," + opt(rep.p90) + "\n";
}

constexpr const char* kSummaryHeader = "tau,metric,queries,floor_accuracy,mean_error_m,p50,p75,p90\n";

std::string trace_text(const SensorTrace& trace) {
    std::ostringstream s;
    write_trace(trace, s);
    return s.str();
}

// --- commands --------------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& scenario_path, std::ostream& out) {
    const auto cfg = resolve_config(c);
    Scenario sc = load_scenario(scenario_path);
    if (c.seed) sc.noise.seed = *c.seed;
    const auto walk = generate_trace(sc.env, sc.script, sc.noise);
    const auto queries = generate_test_queries(sc.env, query_positions(sc), sc.noise);

    OutputSet outs(c.out_dir);
    outs.add("trace.jsonl", trace_text(walk.trace));
    outs.add("graph.json", dump_landmark_graph(sc.env.graph));
    std::ostringstream pose;
    write_pose_json(walk.initial, pose);
    outs.add("initial_pose.json", pose.str());
    std::ostringstream q;
    write_queries(queries, q);
    outs.add("queries.jsonl", q.str());
    json info = {{"scripted_steps", walk.scripted_steps},
                 {"duration_s", walk.trace.accel.empty() ? 0.0 : walk.trace.accel.back().t},
                 {"scans", walk.trace.wifi.size()},
                 {"queries", queries.size()}};
    outs.add("simulation.json", info.dump(2) + "\n");
    finish(outs, "simulate", {{"scenario", scenario_path}}, cfg, sc.noise.seed);
    out << "simulated " << walk.scripted_steps << " steps, " << walk.trace.wifi.size() << " scans -> "
        << c.out_dir << "\n";
    return 0;
}

int cmd_track(const Common& c, const std::string& trace_path, const std::string& graph_path,
              const std::string& initial_path, const std::string& mode, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(c);
    if (!mode.empty()) cfg.pdr.heading_source = parse_heading_source(mode);
    const auto trace = load_trace(trace_path);
    const auto graph = load_landmark_graph(graph_path, cfg.graph);
    const Pose initial = parse_pose_json(read_file(initial_path));
    const auto traj = run_pdr(trace, graph, initial, cfg.pdr, cfg.sensors, cfg.landmarks);
    const auto stats = track_stats(traj, trace);

    OutputSet outs(c.out_dir);
    std::ostringstream t;
    write_trajectory(traj, t);
    outs.add("trajectory.jsonl", t.str());
    outs.add("summary.json", track_summary_json(traj, stats, cfg.pdr.heading_source));
    if (stats)
        outs.add("errors_cdf.csv", cdf_csv(stats->errors));
    else
        err << "notice: trace has no ground truth; error statistics omitted\n";
    finish(outs, "track",
           {{"trace", trace_path}, {"graph", graph_path}, {"initial", initial_path},
            {"mode", heading_source_name(cfg.pdr.heading_source)}},
           cfg, c.seed);
    out << "tracked " << traj.poses.size() << " poses, " << traj.landmark_visits.size() << " landmark visits";
    if (stats) out << ", mean error " << fmt(stats->mean) << " m";
    out << "\n";
    return 0;
}

int cmd_build_map(const Common& c, const std::string& traj_path, const std::string& trace_path,
                  std::ostream& out, std::ostream& err) {
    const auto cfg = resolve_config(c);
    const auto traj = load_trajectory(traj_path);
    const auto trace = load_trace(trace_path);
    BuildReport rep;
    const auto map = build_radio_map(traj, trace.wifi, cfg.radiomap, &rep);
    for (const auto& w : rep.warnings) err << "warning: " << w << "\n";

    OutputSet outs(c.out_dir);
    outs.add("radio_map.json", dump_radio_map(map));
    outs.add("segments.csv", segments_csv(rep));
    finish(outs, "build-map", {{"trajectory", traj_path}, {"trace", trace_path}}, cfg, c.seed);
    out << "radio map: " << map.entries.size() << " entries from " << rep.segments.size() << " segments\n";
    return 0;
}

int cmd_localize(const Common& c, const std::string& map_path, const std::string& fp_text, std::ostream& out) {
    const auto cfg = resolve_config(c);
    const auto map = load_radio_map(map_path);
    Fingerprint fp;
    try {
        const json doc = json::parse(fp_text);
        if (!doc.is_object()) throw ParseError("fingerprint must be a JSON object of MAC -> dBm");
        for (const auto& [mac, rss] : doc.items()) {
            if (!is_valid_mac(mac)) throw ValidationError("invalid MAC \"" + mac + "\"");
            fp[mac] = rss.get<int>();
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("fingerprint must be a JSON object of MAC -> dBm: ") + e.what());
    }
    const auto r = knn_localize(fp, map, cfg.localization);
    json neighbors = json::array();
    for (const auto& n : r.neighbors)
        neighbors.push_back({{"entry", n.entry}, {"distance", n.distance ? json(*n.distance) : json(nullptr)}});
    const json result = {{"x", r.x}, {"y", r.y}, {"floor", r.floor}, {"neighbors", neighbors}};
    out << result.dump(2) << "\n";
    if (!c.out_dir.empty()) {
        OutputSet outs(c.out_dir);
        outs.add("localize.json", result.dump(2) + "\n");
        finish(outs, "localize", {{"map", map_path}, {"fingerprint", fp_text}}, cfg, c.seed);
    }
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& map_path, const std::string& queries_path,
                 const std::string& tau_sweep, std::ostream& out) {
    const auto cfg = resolve_config(c);
    const auto map = load_radio_map(map_path);
    const auto queries = load_queries(queries_path);
    OutputSet outs(c.out_dir);
    const json inputs = {{"map", map_path}, {"queries", queries_path}, {"tau_sweep", tau_sweep}};
    if (tau_sweep.empty()) {
        const auto rep = evaluate(queries, map, cfg.localization);
        std::ostringstream csv;
        write_evaluation_csv(rep, csv);
        outs.add("evaluation.csv", csv.str());
        outs.add("summary.json", evaluation_summary_json(rep));
        finish(outs, "evaluate", inputs, cfg, c.seed);
        out << "floor accuracy " << fmt(rep.floor_accuracy) << ", mean error "
            << (rep.mean_error ? fmt(*rep.mean_error) : std::string("n/a")) << " m\n";
        return 0;
    }
    std::string rows = kSummaryHeader;
    for (double tau : parse_list(tau_sweep)) {
        auto lc = cfg.localization;
        lc.tau = tau;
        const auto rep = evaluate(queries, map, lc);
        rows += summary_row(tau, metric_name(lc.metric), rep);
    }
    outs.add("tau_sweep.csv", rows);
    finish(outs, "evaluate", inputs, cfg, c.seed);
    out << rows;
    return 0;
}

int cmd_sweep(const Common& c, const std::string& scenario_path, const std::string& seeds_text,
              const std::string& beliefs_text, const std::string& taus_text, std::ostream& out) {
    const auto cfg = resolve_config(c);
    const Scenario base = load_scenario(scenario_path);
    std::vector<std::uint64_t> seeds;
    for (double s : parse_list(seeds_text)) {
        if (s < 0 || s != std::floor(s)) throw ParseError("seeds must be non-negative integers");
        seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (seeds.empty()) seeds.push_back(c.seed.value_or(base.noise.seed));
    auto beliefs = parse_list(beliefs_text);
    if (beliefs.empty()) beliefs.push_back(cfg.radiomap.belief_threshold);
    auto taus = parse_list(taus_text);
    if (taus.empty()) taus.push_back(cfg.localization.tau);

    std::vector<std::string> rows(seeds.size());
    std::vector<std::exception_ptr> failures(seeds.size());
    auto work = [&](std::size_t i) {
        try {
            Scenario sc = base;
            sc.noise.seed = seeds[i];
            const auto walk = generate_trace(sc.env, sc.script, sc.noise);
            const auto queries = generate_test_queries(sc.env, query_positions(sc), sc.noise);
            const auto traj = run_pdr(walk.trace, sc.env.graph, walk.initial, cfg.pdr, cfg.sensors, cfg.landmarks);
            const auto stats = track_stats(traj, walk.trace);
            std::string block;
            for (double eps : beliefs) {
                auto qc = cfg.radiomap;
                qc.belief_threshold = eps;
                const auto map = build_radio_map(traj, walk.trace.wifi, qc);
                for (double tau : taus) {
                    auto lc = cfg.localization;
                    lc.tau = tau;
                    std::string eval_cols = ",,,";
                    if (!map.empty() && !queries.empty()) {
                        const auto rep = evaluate(queries, map, lc);
                        eval_cols = fmt(rep.floor_accuracy) + "," + (rep.mean_error ? fmt(*rep.mean_error) : "") +
                                    "," + (rep.p50 ? fmt(*rep.p50) : "") + "," + (rep.p90 ? fmt(*rep.p90) : "");
                    }
                    block += std::to_string(seeds[i]) + "," + fmt(eps) + "," + fmt(tau) + "," +
                             std::to_string(map.entries.size()) + "," + eval_cols + "," +
                             (stats ? fmt(stats->mean) : "") + "\n";
                }
            }
            rows[i] = std::move(block);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    };

    const auto jobs = static_cast<std::size_t>(std::max(1, c.jobs));
    if (jobs == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
    } else {
        std::mutex m;
        std::size_t next = 0;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(jobs, seeds.size()); ++w)
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i;
                    {
                        std::lock_guard lock(m);
                        if (next >= seeds.size()) return;
                        i = next++;
                    }
                    work(i);
                }
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);

    std::string csv = "seed,belief_threshold,tau,map_entries,floor_accuracy,mean_error_m,p50,p90,track_mean_error_m\n";
    for (const auto& r : rows) csv += r;
    OutputSet outs(c.out_dir);
    outs.add("sweep.csv", csv);
    finish(outs, "sweep",
           {{"scenario", scenario_path}, {"seeds", seeds}, {"belief_thresholds", beliefs}, {"taus", taus}}, cfg,
           c.seed);
    out << csv;
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Landmark-calibrated PDR, radio map construction and fingerprint localization"};
    app.require_subcommand(1);

    Common simulate_c, track_c, build_c, localize_c, evaluate_c, sweep_c;
    std::string scenario, trace, graph, initial, mode, trajectory, map, fingerprint, queries, tau_sweep;
    std::string sweep_scenario, seeds, beliefs, taus;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic trace from a scenario file");
    add_common(sim, simulate_c, true);
    sim->add_option("--scenario", scenario, "Scenario JSON")->required();

    auto* trk = app.add_subcommand("track", "Dead-reckon a trace into a trajectory");
    add_common(trk, track_c, true);
    trk->add_option("--trace", trace, "Trace JSONL")->required();
    trk->add_option("--graph", graph, "Landmark graph JSON")->required();
    trk->add_option("--initial", initial, "Initial pose JSON")->required();
    trk->add_option("--mode", mode, "pdr-compass, pdr-gyro or landmark (default from config)");

    auto* bld = app.add_subcommand("build-map", "Build a quality-gated radio map");
    add_common(bld, build_c, true);
    bld->add_option("--trajectory", trajectory, "Trajectory JSONL")->required();
    bld->add_option("--trace", trace, "Trace JSONL with WiFi scans")->required();

    auto* loc = app.add_subcommand("localize", "Locate one fingerprint against a radio map");
    add_common(loc, localize_c, false);
    loc->add_option("--map", map, "Radio map JSON")->required();
    loc->add_option("--fingerprint", fingerprint, "JSON object of MAC -> dBm")->required();

    auto* eva = app.add_subcommand("evaluate", "Evaluate test queries against a radio map");
    add_common(eva, evaluate_c, true);
    eva->add_option("--map", map, "Radio map JSON")->required();
    eva->add_option("--queries", queries, "Query JSONL")->required();
    eva->add_option("--tau-sweep", tau_sweep, "Comma-separated RSS thresholds, one summary row each");

    auto* swp = app.add_subcommand("sweep", "Run the whole pipeline over seeds and parameter grids");
    add_common(swp, sweep_c, true);
    swp->add_option("--scenario", sweep_scenario, "Scenario JSON")->required();
    swp->add_option("--seeds", seeds, "Comma-separated seeds");
    swp->add_option("--belief-thresholds", beliefs, "Comma-separated belief thresholds");
    swp->add_option("--taus", taus, "Comma-separated RSS thresholds");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (sim->parsed()) return cmd_simulate(simulate_c, scenario, out);
        if (trk->parsed()) return cmd_track(track_c, trace, graph, initial, mode, out, err);
        if (bld->parsed()) return cmd_build_map(build_c, trajectory, trace, out, err);
        if (loc->parsed()) return cmd_localize(localize_c, map, fingerprint, out);
        if (eva->parsed()) return cmd_evaluate(evaluate_c, map, queries, tau_sweep, out);
        if (swp->parsed()) return cmd_sweep(sweep_c, sweep_scenario, seeds, beliefs, taus, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace fpmap::cli
