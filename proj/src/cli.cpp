#include "bgest/cli.hpp"

#include "bgest/error.hpp"
#include "bgest/evalkit.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace bgest::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string normalise_key(std::string key) {
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T v{};
    in >> v;
    if (!in || !(in >> std::ws).eof()) throw ConfigError("invalid value '" + value + "' for '" + key + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "off" || value == "no") return false;
    throw ConfigError("invalid boolean '" + value + "' for '" + key + "'");
}

std::string fmt_double(double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}

// Keys settable both from the config file and from flags of the same name.
const std::vector<std::pair<std::string, std::string>>& config_keys() {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"block_size", "Node block size N in pixels"},
        {"t1", "Correlation threshold T1"},
        {"fps", "Frame rate of the input sequence"},
        {"eta", "Cap on the prior weight (neighbours used)"},
        {"tau", "Temperature divisor of the Gibbs prior"},
        {"w_max_seconds", "Likelihood weight cap in seconds"},
        {"icm_iterations", "ICM iterations after the fill (0 = single pass)"},
        {"training_frames", "Frames used to estimate T2"},
        {"band", "Retained spectral band: square or zigzag"},
        {"parallel", "Parallel Stage 1 and synchronous ICM (true/false)"},
        {"ep_threshold", "Error-pixel threshold"},
        {"width", "Frame width for raw planar input"},
        {"height", "Frame height for raw planar input"},
    };
    return keys;
}

const char* band_name(BandShape b) { return b == BandShape::square ? "square" : "zigzag"; }

struct Settings {
    std::string config_file;
    std::map<std::string, std::string> flags;  // only keys given on the command line
    bool parallel_flag = false;
};

void add_config_options(CLI::App* sub, Settings& s) {
    sub->add_option("--config", s.config_file, "Flat key=value configuration file");
    for (const auto& [key, help] : config_keys()) {
        if (key == "parallel") continue;
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        sub->add_option_function<std::string>(flag, [&s, key = key](const std::string& v) { s.flags[key] = v; }, help);
    }
    sub->add_flag("--parallel", s.parallel_flag, "Parallel Stage 1 and synchronous ICM");
}

RunConfig resolve(const Settings& s) {
    RunConfig cfg;
    if (!s.config_file.empty()) {
        for (const auto& [k, v] : read_config_file(s.config_file)) cfg.set(k, v);
    }
    for (const auto& [k, v] : s.flags) cfg.set(k, v);
    if (s.parallel_flag) cfg.set("parallel", "true");
    cfg.estimator.validate();
    return cfg;
}

void write_json(const json& j, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << j.dump(2) << '\n';
        return;
    }
    std::ofstream f(path);
    if (!f) throw WriteError("cannot open report '" + path + "' for writing");
    f << j.dump(2) << '\n';
    if (!f) throw WriteError("failed writing report '" + path + "'");
}

json report_header(const std::string& command, const RunConfig& cfg) {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["command"] = command;
    j["config"] = cfg.echo();
    return j;
}

json eval_json(const EvalReport& r) {
    return {{"age", r.age}, {"ep", r.ep_count}, {"cep", r.cep_count}, {"ep_threshold", r.ep_threshold}};
}

json score_json(const SegmentationScore& s) {
    return {{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"similarity", s.similarity}};
}

FrameSequence load_input(const std::string& path, const RunConfig& cfg) {
    IngestOptions opts;
    opts.width = cfg.width;
    opts.height = cfg.height;
    opts.fps = cfg.estimator.fps;
    return load_sequence(path, opts);
}

std::vector<Mask> load_masks(const std::string& dir) {
    std::vector<Mask> masks;
    for (const auto& f : ordered_frame_files(dir)) masks.push_back(Mask::from_image(read_image(f)));
    if (masks.empty()) throw IngestError("no mask images found in '" + dir + "'");
    return masks;
}

std::string numbered(const std::string& prefix, std::size_t i) {
    std::ostringstream o;
    o << prefix << std::setw(4) << std::setfill('0') << i << ".pgm";
    return o.str();
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw WriteError("cannot create directory '" + p.string() + "': " + ec.message());
}

// --- estimate -------------------------------------------------------------

struct EstimateArgs {
    std::string input, output, report, snapshot, resume, truth;
};

int cmd_estimate(const EstimateArgs& a, const RunConfig& cfg, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    FrameSequence frames = load_input(a.input, cfg);

    EstimateResult result;
    if (a.resume.empty()) {
        result = estimate_background(frames, cfg.estimator);
    } else {
        auto snap = load_snapshot(a.resume);
        if (snap.model.frame_width != frames.width || snap.model.frame_height != frames.height) {
            throw GeometryError("resumed model geometry does not match the input frames");
        }
        result.model = std::move(snap.model);
        for (const auto& f : frames.frames) ingest_frame(result.model, f, cfg.estimator.parallel);
        result.labels = label_scene(result.model, cfg.estimator, &result.report.labelling);
        result.background = render_background(result.model, result.labels);
        result.report.grid = result.model.grid;
        result.report.thresholds = result.model.thresholds;
        result.report.set_size_histogram = set_size_histogram(result.model);
        result.report.peak_model_bytes = result.model.model_bytes();
        result.report.frames = frames.frames.size();
    }
    write_image(result.background, a.output);
    if (!a.snapshot.empty()) save_snapshot({result.model, result.labels.labels}, a.snapshot);
    const double total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    const auto& rep = result.report;
    json j = report_header("estimate", cfg);
    j["input"] = {{"path", a.input}, {"frames", frames.frames.size()}, {"width", frames.width}, {"height", frames.height}};
    j["output"] = a.output;
    j["grid"] = {{"block_size", rep.grid.block_size}, {"cols", rep.grid.cols}, {"rows", rep.grid.rows}};
    j["thresholds"] = {{"t1", rep.thresholds.t1},
                       {"t2", rep.thresholds.t2},
                       {"q31_mean", rep.thresholds.q31_mean},
                       {"q31_std", rep.thresholds.q31_std}};
    j["set_size_histogram"] = rep.set_size_histogram;
    j["labelling"] = {{"partial_nodes", rep.labelling.partial_nodes},
                      {"corner_seeded", rep.labelling.seeded},
                      {"fill_passes", rep.labelling.fill.passes},
                      {"fallback_passes", rep.labelling.fill.fallback_passes},
                      {"valve_assignments", rep.labelling.fill.valve_assignments},
                      {"icm_iterations_run", rep.labelling.icm.iterations},
                      {"icm_changes", rep.labelling.icm.changes}};
    j["peak_model_bytes"] = rep.peak_model_bytes;
    j["raw_frame_bytes"] = static_cast<std::size_t>(frames.width) * frames.height * frames.frames.size();
    j["runtime_ms"] = total_ms;
    j["frames_per_second"] = total_ms > 0.0 ? 1000.0 * static_cast<double>(frames.frames.size()) / total_ms : 0.0;
    if (!a.truth.empty()) {
        const auto truth = crop(read_image(a.truth), result.background.width, result.background.height);
        const auto ev = evaluate(result.background, truth, cfg.ep_threshold);
        j["age"] = ev.age;
        j["ep"] = ev.ep_count;
        j["cep"] = ev.cep_count;
        j["ep_threshold"] = ev.ep_threshold;
    }
    write_json(j, a.report, out);
    return 0;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::string input, estimate, truth, report;
    int splits = 1;
};

int cmd_evaluate(const EvaluateArgs& a, const RunConfig& cfg, std::ostream& out) {
    const GreyImage truth = read_image(a.truth);
    json j = report_header("evaluate", cfg);
    j["truth"] = a.truth;

    if (!a.estimate.empty()) {
        const GreyImage est = read_image(a.estimate);
        if (est.width != truth.width || est.height != truth.height) {
            throw GeometryError("estimate is " + std::to_string(est.width) + "x" + std::to_string(est.height) +
                                ", truth is " + std::to_string(truth.width) + "x" + std::to_string(truth.height));
        }
        const auto ev = evaluate(est, truth, cfg.ep_threshold);
        j["estimate"] = a.estimate;
        j.update(eval_json(ev));
        write_json(j, a.report, out);
        return 0;
    }

    const FrameSequence frames = load_input(a.input, cfg);
    if (frames.width != truth.width || frames.height != truth.height) {
        throw GeometryError("truth geometry does not match the input frames");
    }
    const auto split = evaluate_splits(frames, truth, cfg.estimator, a.splits, cfg.ep_threshold);
    j["input"] = a.input;
    j["splits"] = a.splits;
    j["runs"] = json::array();
    for (std::size_t i = 0; i < split.runs.size(); ++i) {
        json r = eval_json(split.runs[i]);
        r["frames"] = split.frames_per_run[i];
        j["runs"].push_back(r);
    }
    j["age"] = split.mean_age;
    j["ep"] = split.mean_ep;
    j["cep"] = split.mean_cep;
    j["ep_threshold"] = cfg.ep_threshold;
    write_json(j, a.report, out);
    return 0;
}

// --- segment --------------------------------------------------------------

struct SegmentArgs {
    std::string model, input, train, out_masks, truth_masks, report;
    double k = kSegmentK;
    double var_floor = kSegmentVarFloor;
};

int cmd_segment(const SegmentArgs& a, const RunConfig& cfg, std::ostream& out) {
    if (a.model.empty() || !fs::exists(a.model)) throw SnapshotError("model snapshot '" + a.model + "' not found");
    auto snap = load_snapshot(a.model);
    BackgroundGrid labels;
    if (snap.background && std::none_of(snap.background->begin(), snap.background->end(), [](int v) { return v < 0; })) {
        labels = BackgroundGrid{snap.model.grid, *snap.background};
    } else {
        labels = label_scene(snap.model, cfg.estimator);
    }
    const FrameSequence frames = load_input(a.input, cfg);
    const FrameSequence train = a.train.empty() ? frames : load_input(a.train, cfg);
    if (frames.width != snap.model.frame_width || frames.height != snap.model.frame_height) {
        throw GeometryError("segmentation frames do not match the model geometry");
    }

    const GaussianBackground mrf = gaussian_from_labels(snap.model, labels);
    const GaussianBackground direct = gaussian_from_frames(train, mrf.width, mrf.height);

    std::vector<Mask> truth;
    if (!a.truth_masks.empty()) {
        truth = load_masks(a.truth_masks);
        if (truth.size() != frames.frames.size()) {
            throw IngestError("found " + std::to_string(truth.size()) + " truth masks for " +
                              std::to_string(frames.frames.size()) + " frames");
        }
    }
    if (!a.out_masks.empty()) {
        ensure_dir(fs::path(a.out_masks) / "mrf");
        ensure_dir(fs::path(a.out_masks) / "direct");
    }

    SegmentationScore mrf_score, direct_score;
    for (std::size_t f = 0; f < frames.frames.size(); ++f) {
        const GreyImage frame = crop(frames.frames[f], mrf.width, mrf.height);
        const Mask m = gaussian_segment(frame, mrf, a.k, a.var_floor);
        const Mask d = gaussian_segment(frame, direct, a.k, a.var_floor);
        if (!a.out_masks.empty()) {
            write_image(m.to_image(), fs::path(a.out_masks) / "mrf" / numbered("mask_", f + 1));
            write_image(d.to_image(), fs::path(a.out_masks) / "direct" / numbered("mask_", f + 1));
        }
        if (!truth.empty()) {
            const Mask t = crop(truth[f], mrf.width, mrf.height);
            mrf_score += similarity(m, t);
            direct_score += similarity(d, t);
        }
    }

    json j = report_header("segment", cfg);
    j["model"] = a.model;
    j["frames"] = frames.frames.size();
    j["k"] = a.k;
    j["var_floor"] = a.var_floor;
    if (!truth.empty()) {
        j["modes"] = {{"mrf", score_json(mrf_score)}, {"direct", score_json(direct_score)}};
        j["similarity"] = mrf_score.similarity;
        j["relative_improvement"] = direct_score.similarity > 0.0
                                        ? (mrf_score.similarity - direct_score.similarity) / direct_score.similarity
                                        : 0.0;
    }
    write_json(j, a.report, out);
    return 0;
}

// --- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string spec, preset = "stationary", out_dir;
    std::uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthSpec spec;
    if (!a.spec.empty()) {
        std::ifstream in(a.spec);
        if (!in) throw ConfigError("cannot open synth spec '" + a.spec + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        spec = synth_spec_from_json(buf.str());
    } else if (a.preset == "stationary") {
        spec = stationary_occluder_spec();
    } else if (a.preset == "bootstrap") {
        spec = bootstrap_spec();
    } else {
        throw ConfigError("unknown preset '" + a.preset + "'");
    }
    const auto data = synth_sequence(spec, a.seed);

    const fs::path root(a.out_dir);
    ensure_dir(root / "frames");
    ensure_dir(root / "masks");
    for (std::size_t f = 0; f < data.frames.frames.size(); ++f) {
        write_image(data.frames.frames[f], root / "frames" / numbered("frame_", f + 1));
        write_image(data.masks[f].to_image(), root / "masks" / numbered("mask_", f + 1));
    }
    write_image(data.truth, root / "truth_background.pgm");

    json echo = json::parse(synth_spec_to_json(spec));
    echo["seed"] = a.seed;
    std::ofstream f(root / "spec.json");
    if (!f) throw WriteError("cannot write spec echo");
    f << echo.dump(2) << '\n';
    out << "wrote " << data.frames.frames.size() << " frames to " << root.string() << '\n';
    return 0;
}

const char* stage_of(const std::exception& e) {
    if (dynamic_cast<const IngestError*>(&e)) return "ingest";
    if (dynamic_cast<const GeometryError*>(&e)) return "geometry";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const WriteError*>(&e)) return "write";
    if (dynamic_cast<const SnapshotError*>(&e)) return "snapshot";
    if (dynamic_cast<const EstimationError*>(&e)) return "estimation";
    if (dynamic_cast<const ContractViolation*>(&e)) return "contract";
    return "internal";
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& value) {
    const std::string key = normalise_key(raw_key);
    auto& e = estimator;
    if (key == "block_size") e.block_size = parse_number<int>(key, value);
    else if (key == "t1") e.t1 = parse_number<double>(key, value);
    else if (key == "fps") e.fps = parse_number<double>(key, value);
    else if (key == "eta") e.gibbs.eta = parse_number<int>(key, value);
    else if (key == "tau") e.gibbs.temperature_divisor = parse_number<double>(key, value);
    else if (key == "w_max_seconds") e.gibbs.w_max_seconds = parse_number<double>(key, value);
    else if (key == "icm_iterations") e.gibbs.icm_iterations = parse_number<int>(key, value);
    else if (key == "training_frames") e.training_frames = parse_number<std::size_t>(key, value);
    else if (key == "parallel") e.parallel = parse_bool(key, value);
    else if (key == "ep_threshold") ep_threshold = parse_number<int>(key, value);
    else if (key == "width") width = parse_number<int>(key, value);
    else if (key == "height") height = parse_number<int>(key, value);
    else if (key == "band") {
        if (value == "square") e.band = BandShape::square;
        else if (value == "zigzag") e.band = BandShape::zigzag;
        else throw ConfigError("band must be 'square' or 'zigzag'");
    } else {
        throw ConfigError("unknown configuration key '" + raw_key + "'");
    }
}

std::map<std::string, std::string> RunConfig::echo() const {
    const auto& e = estimator;
    return {
        {"block_size", std::to_string(e.block_size)},
        {"t1", fmt_double(e.t1)},
        {"fps", fmt_double(e.fps)},
        {"eta", std::to_string(e.gibbs.eta)},
        {"tau", fmt_double(e.gibbs.temperature_divisor)},
        {"w_max_seconds", fmt_double(e.gibbs.w_max_seconds)},
        {"icm_iterations", std::to_string(e.gibbs.icm_iterations)},
        {"training_frames", std::to_string(e.training_frames)},
        {"band", band_name(e.band)},
        {"parallel", e.parallel ? "true" : "false"},
        {"ep_threshold", std::to_string(ep_threshold)},
        {"width", std::to_string(width)},
        {"height", std::to_string(height)},
    };
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        out[normalise_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
    }
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Static background estimation from cluttered image sequences", "bgest"};
    app.require_subcommand(1);

    Settings est_settings, eval_settings, seg_settings;

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Estimate the background of a sequence");
    estimate->add_option("--in", est.input, "Frame directory or raw planar file")->required();
    estimate->add_option("--out", est.output, "Output background image (.pgm or .png)")->required();
    estimate->add_option("--report", est.report, "JSON report path (stdout if omitted)");
    estimate->add_option("--snapshot", est.snapshot, "Write the scene model snapshot here");
    estimate->add_option("--resume", est.resume, "Continue from a previously saved snapshot");
    estimate->add_option("--truth", est.truth, "Ground-truth background for AGE/EP/CEP");
    add_config_options(estimate, est_settings);

    EvaluateArgs ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score an estimate against ground truth");
    evaluate_cmd->add_option("--truth", ev.truth, "Ground-truth background image")->required();
    auto* ev_in = evaluate_cmd->add_option("--in", ev.input, "Frames to estimate from (split protocol)");
    auto* ev_est = evaluate_cmd->add_option("--estimate", ev.estimate, "Existing estimate image");
    ev_in->excludes(ev_est);
    evaluate_cmd->add_option("--splits", ev.splits, "Sub-sequences to average over")
        ->check(CLI::IsMember({1, 2, 4}));
    evaluate_cmd->add_option("--report", ev.report, "JSON report path (stdout if omitted)");
    add_config_options(evaluate_cmd, eval_settings);

    SegmentArgs seg;
    auto* segment = app.add_subcommand("segment", "Gaussian foreground segmentation, MRF vs direct initialisation");
    segment->add_option("--model", seg.model, "Scene model snapshot from `estimate --snapshot`")->required();
    segment->add_option("--in", seg.input, "Frames to segment")->required();
    segment->add_option("--train", seg.train, "Training frames for direct initialisation (default: --in)");
    segment->add_option("--out-masks", seg.out_masks, "Directory for mrf/ and direct/ masks");
    segment->add_option("--truth-masks", seg.truth_masks, "Ground-truth mask directory");
    segment->add_option("--report", seg.report, "JSON report path (stdout if omitted)");
    segment->add_option("--k", seg.k, "Deviation multiplier");
    segment->add_option("--var-floor", seg.var_floor, "Variance floor");
    add_config_options(segment, seg_settings);

    SynthArgs syn;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cluttered sequence with ground truth");
    synth->add_option("--spec", syn.spec, "JSON synth spec");
    synth->add_option("--preset", syn.preset, "Built-in spec when --spec is absent")
        ->check(CLI::IsMember({"stationary", "bootstrap"}));
    synth->add_option("--out", syn.out_dir, "Output directory")->required();
    synth->add_option("--seed", syn.seed, "Noise seed");

    std::vector<const char*> argv;
    argv.push_back("bgest");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "bgest: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*estimate) return cmd_estimate(est, resolve(est_settings), out);
        if (*evaluate_cmd) {
            if (ev.input.empty() && ev.estimate.empty()) throw ConfigError("evaluate needs --in or --estimate");
            return cmd_evaluate(ev, resolve(eval_settings), out);
        }
        if (*segment) return cmd_segment(seg, resolve(seg_settings), out);
        if (*synth) return cmd_synth(syn, out);
    } catch (const std::exception& e) {
        err << "bgest: " << stage_of(e) << " stage failed: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace bgest::cli
