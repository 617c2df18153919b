#include "zsl/run_config.hpp"

#include <charconv>
#include <sstream>

#include "binary_io.hpp"
#include "zsl/error.hpp"

namespace zsl {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("invalid number '" + v + "' for " + key);
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("invalid count '" + v + "' for " + key);
    return out;
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::known_keys() {
    static const std::map<std::string, std::string> keys = {
        {"seed", "base seed for every random choice"},
        {"jobs", "worker threads for ablate"},
        {"out", "output directory"},
        {"data.dir", "dataset directory (train/test/split/semantic_* files)"},
        {"data.normalize_visual", "L2-normalize visual feature rows (true/false)"},
        {"data.normalize_semantics", "L2-normalize semantic vectors (true/false)"},
        {"net.head_hidden", "first head layer width"},
        {"net.head_out", "fused vector width"},
        {"net.embed_dim", "embedding width; defaults to the visual feature dim"},
        {"net.lambda", "L2 weight of the regularizer"},
        {"net.direction", "s2v or v2s"},
        {"train.optimizer", "adam or sgd"},
        {"train.lr", "initial learning rate"},
        {"train.momentum", "SGD momentum"},
        {"train.beta1", "Adam beta1"},
        {"train.beta2", "Adam beta2"},
        {"train.epsilon", "Adam epsilon"},
        {"train.batch_size", "mini-batch size (clamped to the training set size)"},
        {"train.epochs", "number of epochs"},
        {"train.lr_decay", "learning-rate multiplier applied after each epoch"},
        {"train.shuffle", "shuffle samples every epoch (true/false)"},
        {"synth.n_classes", "number of classes"},
        {"synth.n_seen", "number of seen classes"},
        {"synth.samples_per_class", "visual samples per class"},
        {"synth.latent_dim", "latent anchor dimension"},
        {"synth.embed_dim", "visual feature dimension"},
        {"synth.visual_noise", "Gaussian noise on visual features"},
        {"synth.modalities", "tag:dim:fraction:noise list, comma separated"},
        {"synth.format", "binary or csv files for the synth subcommand"},
        {"eval.metric", "euclidean, cosine or ec"},
        {"eval.eta", "EC weighting coefficient in [0, 1]"},
        {"eval.modalities", "active modalities, e.g. W,C,I,T"},
        {"eval.hubness_k", "k of the k-occurrence hubness statistic"},
        {"ablate.subsets", "'all' or ';'-separated subsets such as W;C;W+C"},
        {"ablate.directions", "comma list of s2v, v2s"},
        {"ablate.metrics", "comma list of euclidean, cosine, ec"},
    };
    return keys;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        try {
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path.string());
    return parse(detail::read_text_file(path), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
}

std::uint64_t RunConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_uint(key, it->second);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("invalid boolean '" + it->second + "' for " + key);
}

NetConfig RunConfig::net_config(std::optional<std::size_t> visual_dim) const {
    NetConfig c;
    c.head_hidden = get_uint("net.head_hidden", c.head_hidden);
    c.head_out = get_uint("net.head_out", c.head_out);
    c.embed_dim = get_uint("net.embed_dim", visual_dim.value_or(c.embed_dim));
    c.lambda = get_double("net.lambda", c.lambda);
    c.direction = parse_direction(get("net.direction", "s2v"));
    return c;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    const std::string opt = get("train.optimizer", "adam");
    if (opt == "adam") {
        Adam a;
        a.lr = get_double("train.lr", a.lr);
        a.beta1 = get_double("train.beta1", a.beta1);
        a.beta2 = get_double("train.beta2", a.beta2);
        a.epsilon = get_double("train.epsilon", a.epsilon);
        t.optimizer = a;
    } else if (opt == "sgd") {
        SgdMomentum s;
        s.lr = get_double("train.lr", s.lr);
        s.momentum = get_double("train.momentum", s.momentum);
        t.optimizer = s;
    } else {
        throw ConfigError("unknown optimizer '" + opt + "' (expected adam or sgd)");
    }
    t.batch_size = get_uint("train.batch_size", t.batch_size);
    t.epochs = get_uint("train.epochs", t.epochs);
    t.lr_decay = get_double("train.lr_decay", t.lr_decay);
    t.shuffle = get_bool("train.shuffle", t.shuffle);
    t.seed = seed();
    t.validate();
    return t;
}

SynthConfig RunConfig::synth_config() const {
    SynthConfig s;
    s.n_classes = get_uint("synth.n_classes", s.n_classes);
    s.n_seen = get_uint("synth.n_seen", s.n_seen);
    s.samples_per_class = get_uint("synth.samples_per_class", s.samples_per_class);
    s.latent_dim = get_uint("synth.latent_dim", s.latent_dim);
    s.embed_dim = get_uint("synth.embed_dim", s.embed_dim);
    s.visual_noise_sigma = get_double("synth.visual_noise", s.visual_noise_sigma);
    if (has("synth.modalities")) s.modalities = parse_modality_specs(get("synth.modalities", ""));
    s.seed = seed();
    s.validate();
    return s;
}

MetricKind RunConfig::metric() const {
    return parse_metric(get("eval.metric", "ec"), get_double("eval.eta", 0.9));
}

AblationGrid RunConfig::ablation_grid(const ModalitySet& available) const {
    AblationGrid g;
    const std::string subsets = get("ablate.subsets", "all");
    if (subsets == "all") {
        g.subsets = all_subsets(available);
    } else {
        for (const auto& s : split(subsets, ';')) g.subsets.push_back(parse_modality_set(s));
    }
    for (const auto& d : split(get("ablate.directions", "s2v,v2s"), ',')) g.directions.push_back(parse_direction(d));
    const double eta = get_double("eval.eta", 0.9);
    for (const auto& m : split(get("ablate.metrics", "ec,euclidean"), ',')) g.metrics.push_back(parse_metric(m, eta));
    g.jobs = get_uint("jobs", 1);
    g.hubness_k = get_uint("eval.hubness_k", 1);
    if (g.hubness_k == 0) throw ConfigError("eval.hubness_k must be >= 1");
    return g;
}

DatasetLoadOptions RunConfig::load_options() const {
    return {get_bool("data.normalize_visual", false), get_bool("data.normalize_semantics", false)};
}

std::vector<ModalitySpec> parse_modality_specs(const std::string& text) {
    std::vector<ModalitySpec> out;
    for (const auto& item : split(text, ',')) {
        auto parts = split(item, ':');
        if (parts.size() != 4) throw ConfigError("modality spec '" + item + "' must be tag:dim:fraction:noise");
        out.push_back({ModalityId(parts[0]), to_uint("synth.modalities", parts[1]), to_double("synth.modalities", parts[2]),
                       to_double("synth.modalities", parts[3])});
    }
    if (out.empty()) throw ConfigError("synth.modalities is empty");
    return out;
}

}  // namespace zsl
