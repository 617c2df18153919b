#include "zsl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "zsl/data_model.hpp"
#include "zsl/error.hpp"
#include "zsl/eval.hpp"
#include "zsl/gradcheck.hpp"
#include "zsl/report.hpp"
#include "zsl/run_config.hpp"
#include "zsl/synth.hpp"
#include "zsl/trainer.hpp"

namespace fs = std::filesystem;

namespace zsl {

namespace {

// Flag values shared by the subcommands; empty means "not given".
struct CommonFlags {
    std::string config;
    std::string seed;
    std::string jobs;
    std::string metric;
    std::string eta;
    std::string direction;
    std::string modalities;
    std::string out;
    std::string data;
    std::vector<std::string> assignments;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "configuration file (key = value lines)");
    app->add_option("--seed", f.seed, "base seed for all randomness");
    app->add_option("--set", f.assignments, "override a config key, e.g. --set train.epochs=50");
}

std::vector<double> parse_vector(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("invalid vector component '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty vector");
    return out;
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

RunConfig build_config(const CommonFlags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    auto apply = [&](const std::string& key, const std::string& value) {
        if (!value.empty()) cfg.set(key, value);
    };
    apply("seed", f.seed);
    apply("jobs", f.jobs);
    apply("eval.metric", f.metric);
    apply("eval.eta", f.eta);
    apply("net.direction", f.direction);
    apply("eval.modalities", f.modalities);
    apply("out", f.out);
    apply("data.dir", f.data);
    for (const auto& a : f.assignments) cfg.set_assignment(a);
    return cfg;
}

fs::path require_out(const RunConfig& cfg, const std::string& fallback) {
    fs::path out = cfg.get("out", fallback);
    fs::create_directories(out);
    return out;
}

Dataset require_dataset(const RunConfig& cfg) {
    if (!cfg.has("data.dir")) throw ConfigError("no dataset given (use --data or data.dir)");
    return load_dataset(cfg.get("data.dir", ""), cfg.load_options());
}

ModalitySet active_modalities(const RunConfig& cfg, const ModalitySet& fallback) {
    return cfg.has("eval.modalities") ? parse_modality_set(cfg.get("eval.modalities", "")) : fallback;
}

int run_synth(const RunConfig& cfg, std::ostream& out) {
    SynthConfig sc = cfg.synth_config();
    const std::string fmt = cfg.get("synth.format", "binary");
    if (fmt != "binary" && fmt != "csv") throw ConfigError("synth.format must be binary or csv");
    const fs::path dir = require_out(cfg, "synth_data");
    Dataset ds = generate(sc);
    save_dataset(ds, dir, fmt == "csv" ? FileFormat::Csv : FileFormat::Binary);
    out << "wrote " << ds.visual().rows() << " training and " << ds.test_visual().rows() << " test samples, "
        << ds.semantics().size() << " modalities to " << dir.string() << "\n";
    return 0;
}

int run_train(const RunConfig& cfg, std::ostream& out) {
    Dataset ds = require_dataset(cfg);
    TrainConfig tc = cfg.train_config();
    NetConfig nc = cfg.net_config(ds.visual().dim());
    const ModalitySet active = active_modalities(cfg, ds.modalities());
    const fs::path dir = require_out(cfg, "run");
    auto result = train(ds, nc, tc, active);
    save_checkpoint(result.model, dir / "model.zslc");
    write_history_csv(result.history, dir / "history.csv");
    out << "trained " << modality_set_name(active) << " " << direction_name(nc.direction) << " for " << tc.epochs
        << " epochs";
    if (!result.history.loss.empty()) out << ", final loss " << detail::format_exact(result.history.loss.back());
    out << "\ncheckpoint: " << (dir / "model.zslc").string() << "\n";
    return 0;
}

int run_eval(const RunConfig& cfg, const std::string& checkpoint, std::ostream& out) {
    if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
    if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
    Dataset ds = require_dataset(cfg);
    EmbeddingModel model = load_checkpoint(checkpoint);
    ModalitySet trained;
    for (const auto& [m, head] : model.fusion.heads) trained.insert(m);
    const ModalitySet active = active_modalities(cfg, trained);
    const MetricKind metric = cfg.metric();
    RowMatrix dist = test_distance_matrix(model, ds, metric, active);
    const auto& unseen = ds.unseen_classes();
    EvalResult r = score_distances(dist, ds.test_visual().labels(), {unseen.begin(), unseen.end()});
    const double hub = unseen.size() >= 2 ? hubness_skewness(dist, std::min<std::size_t>(cfg.get_uint("eval.hubness_k", 1), unseen.size())) : 0.0;

    out << "metric " << metric.name() << ", direction " << direction_name(model.config.direction) << ", modalities "
        << modality_set_name(active) << "\n";
    out << "top1/top5 " << format_accuracy_cell(r.top1, r.top5) << " (top1=" << fixed(r.top1) << " top5=" << fixed(r.top5)
        << ") hubness=" << fixed(hub) << "\n";

    if (cfg.has("out")) {
        const fs::path dir = require_out(cfg, "");
        std::string per_class = "class,top1\n";
        for (const auto& [c, v] : r.per_class_top1) per_class += std::to_string(c) + "," + detail::format_exact(v) + "\n";
        detail::write_text_file(dir / "eval_per_class.csv", per_class);
        std::string confusion = "true\\predicted";
        for (ClassId c : r.classes) confusion += "," + std::to_string(c);
        confusion += "\n";
        for (std::size_t i = 0; i < r.classes.size(); ++i) {
            confusion += std::to_string(r.classes[i]);
            for (std::size_t n : r.confusion[i]) confusion += "," + std::to_string(n);
            confusion += "\n";
        }
        detail::write_text_file(dir / "confusion.csv", confusion);
        detail::write_text_file(dir / "eval.csv", "metric,direction,modalities,top1,top5,hubness\n" + metric.name() + "," +
                                                       direction_name(model.config.direction) + "," +
                                                       modality_set_name(active) + "," + detail::format_exact(r.top1) +
                                                       "," + detail::format_exact(r.top5) + "," +
                                                       detail::format_exact(hub) + "\n");
    }
    return 0;
}

int run_ablate(const RunConfig& cfg, std::ostream& out) {
    // Everything is validated before the first model is trained.
    Dataset ds = cfg.has("data.dir") ? require_dataset(cfg) : generate(cfg.synth_config());
    TrainConfig tc = cfg.train_config();
    NetConfig nc = cfg.net_config(ds.visual().dim());
    AblationGrid grid = cfg.ablation_grid(ds.modalities());
    const fs::path dir = require_out(cfg, "ablation");
    auto cells = ablate(ds, nc, tc, grid);
    emit_report(cells, ReportFormat::Csv, dir / "report.csv");
    emit_report(cells, ReportFormat::Markdown, dir / "report.md");
    out << render_report_markdown(cells);
    return 0;
}

int run_distance(const RunConfig& cfg, const std::string& a_text, const std::string& b_text, std::ostream& out) {
    if (a_text.empty() || b_text.empty()) throw ConfigError("distance needs --a and --b");
    const auto a = parse_vector(a_text);
    const auto b = parse_vector(b_text);
    out << fixed(distance(a, b, cfg.metric())) << "\n";
    return 0;
}

int run_gradcheck(const RunConfig& cfg, std::size_t instances, std::ostream& out) {
    GradCheckOptions opt;
    opt.seed = cfg.seed();
    opt.instances = instances;
    auto report = zsl::run_gradcheck(opt);
    out << "checked " << report.instances << " draws, " << report.evaluations << " subset evaluations, "
        << report.parameters << " partial derivatives (" << report.redraws << " redraws near ReLU kinks)\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", report.max_relative_error);
    out << "max relative error " << buf << " at " << report.worst << "\n";
    return report.max_relative_error < 1e-6 ? 0 : 1;
}

}  // namespace

void configure_logging() {
    static bool done = false;
    if (!done) {
        auto logger = spdlog::stderr_logger_mt("zsl");
        logger->set_pattern("[%l] %v");
        spdlog::set_default_logger(logger);
        done = true;
    }
    const char* env = std::getenv("ZSL_EMBED_LOG");
    const std::string level = env ? env : "error";
    if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else {
        spdlog::set_level(spdlog::level::err);
    }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Zero-shot embedding toolkit: multi-modal semantic fusion, EC distance, ablation"};
    app.name("zsl-embed");
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint;
    std::string vec_a;
    std::string vec_b;
    std::size_t instances = 20;

    auto* synth = app.add_subcommand("synth", "generate a synthetic multi-modal dataset");
    add_common(synth, flags);
    synth->add_option("--out", flags.out, "output dataset directory");

    auto* train_cmd = app.add_subcommand("train", "train an embedding model, write checkpoint and history CSV");
    add_common(train_cmd, flags);
    train_cmd->add_option("--data", flags.data, "dataset directory");
    train_cmd->add_option("--direction", flags.direction, "s2v or v2s");
    train_cmd->add_option("--modalities", flags.modalities, "active modalities, e.g. W,C,I,T");
    train_cmd->add_option("--out", flags.out, "output directory for model.zslc and history.csv");

    auto* eval_cmd = app.add_subcommand("eval", "zero-shot evaluation of a checkpoint on the unseen classes");
    add_common(eval_cmd, flags);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file");
    eval_cmd->add_option("--data", flags.data, "dataset directory");
    eval_cmd->add_option("--metric", flags.metric, "euclidean, cosine or ec");
    eval_cmd->add_option("--eta", flags.eta, "EC weighting coefficient in [0, 1]");
    eval_cmd->add_option("--modalities", flags.modalities, "active modalities (default: those in the checkpoint)");
    eval_cmd->add_option("--out", flags.out, "directory for eval.csv, eval_per_class.csv, confusion.csv");

    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate the modality x direction x metric grid");
    add_common(ablate_cmd, flags);
    ablate_cmd->add_option("--data", flags.data, "dataset directory (default: synthetic dataset from synth.* keys)");
    ablate_cmd->add_option("--jobs", flags.jobs, "parallel training workers");
    ablate_cmd->add_option("--metric", flags.metric, "comma list of metrics (euclidean, cosine, ec)");
    ablate_cmd->add_option("--eta", flags.eta, "EC weighting coefficient in [0, 1]");
    ablate_cmd->add_option("--direction", flags.direction, "comma list of directions (s2v, v2s)");
    ablate_cmd->add_option("--modalities", flags.modalities, "';'-separated subsets, or 'all'");
    ablate_cmd->add_option("--out", flags.out, "output directory for report.csv and report.md");

    auto* distance_cmd = app.add_subcommand("distance", "distance between two vectors");
    add_common(distance_cmd, flags);
    distance_cmd->add_option("--metric", flags.metric, "euclidean, cosine or ec");
    distance_cmd->add_option("--eta", flags.eta, "EC weighting coefficient in [0, 1]");
    distance_cmd->add_option("--a", vec_a, "first vector, comma separated");
    distance_cmd->add_option("--b", vec_b, "second vector, comma separated");

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
    add_common(gradcheck_cmd, flags);
    gradcheck_cmd->add_option("--instances", instances, "random draws per direction");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        configure_logging();
        if (ablate_cmd->parsed()) {
            // The shared flags mean lists here.
            std::string metric = flags.metric;
            std::string direction = flags.direction;
            std::string subsets = flags.modalities;
            flags.metric.clear();
            flags.direction.clear();
            flags.modalities.clear();
            RunConfig cfg = build_config(flags);
            if (!metric.empty()) cfg.set("ablate.metrics", metric);
            if (!direction.empty()) cfg.set("ablate.directions", direction);
            if (!subsets.empty()) cfg.set("ablate.subsets", subsets);
            return run_ablate(cfg, out);
        }
        RunConfig cfg = build_config(flags);
        if (synth->parsed()) return run_synth(cfg, out);
        if (train_cmd->parsed()) return run_train(cfg, out);
        if (eval_cmd->parsed()) return run_eval(cfg, checkpoint, out);
        if (distance_cmd->parsed()) return run_distance(cfg, vec_a, vec_b, out);
        if (gradcheck_cmd->parsed()) return run_gradcheck(cfg, instances, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace zsl
