#include "adcast/service/run_store.hpp"

#include "adcast/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace adcast::service {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (horizons.empty()) throw ValidationError("config: horizons must not be empty");
    for (auto h : horizons) {
        if (h == 0) throw ValidationError("config: horizons must be positive");
    }
    if (encoder_length < 2) throw ValidationError("config: encoder_length must be at least 2");
    if (parallelism == 0) throw ValidationError("config: parallelism must be positive");
    if (clustering.k_min < 2 || clustering.k_max < clustering.k_min) {
        throw ValidationError("config: clustering needs 2 <= k_min <= k_max");
    }
    if (simulation) simulation->validate();
    robustness_model.validate();
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    nlohmann::json cl = {{"k_min", c.clustering.k_min},
                         {"k_max", c.clustering.k_max},
                         {"smooth", c.clustering.smooth},
                         {"smoothing_window", c.clustering.smoothing_window},
                         {"weighted", c.clustering.weighted},
                         {"dtw_window", nullptr},
                         {"k", nullptr}};
    if (c.clustering.dtw_window) cl["dtw_window"] = *c.clustering.dtw_window;
    if (c.clustering.k) cl["k"] = *c.clustering.k;
    j = {{"seed", c.seed},
         {"horizons", c.horizons},
         {"encoder_length", c.encoder_length},
         {"origin", nullptr},
         {"parallelism", c.parallelism},
         {"clustering", cl},
         {"robustness_model", c.robustness_model}};
    if (c.origin) j["origin"] = format_date(*c.origin);
    if (c.simulation) j["simulation"] = *c.simulation;
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    static const std::vector<std::string> known{"seed",        "horizons",   "encoder_length",  "origin",
                                                "parallelism", "clustering", "robustness_model", "simulation"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("config: unknown key \"" + key + "\"");
        }
    }
    try {
        c = RunConfig{};
        c.seed = j.value("seed", c.seed);
        c.horizons = j.value("horizons", c.horizons);
        c.encoder_length = j.value("encoder_length", c.encoder_length);
        if (j.contains("origin") && !j.at("origin").is_null()) c.origin = parse_date(j.at("origin").get<std::string>());
        c.parallelism = j.value("parallelism", c.parallelism);
        if (j.contains("clustering")) {
            const auto& cl = j.at("clustering");
            auto& o = c.clustering;
            o.k_min = cl.value("k_min", o.k_min);
            o.k_max = cl.value("k_max", o.k_max);
            o.smooth = cl.value("smooth", o.smooth);
            o.smoothing_window = cl.value("smoothing_window", o.smoothing_window);
            o.weighted = cl.value("weighted", o.weighted);
            if (cl.contains("dtw_window")) {
                o.dtw_window = cl.at("dtw_window").is_null() ? std::nullopt
                                                             : std::optional(cl.at("dtw_window").get<std::size_t>());
            }
            if (cl.contains("k") && !cl.at("k").is_null()) o.k = cl.at("k").get<std::size_t>();
        }
        c.clustering.seed = c.seed;
        if (j.contains("simulation")) c.simulation = j.at("simulation").get<sim::MarketConfig>();
        if (j.contains("robustness_model")) c.robustness_model = j.at("robustness_model").get<models::ModelConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
}

std::string fingerprint(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const models::TrainedModel& ModelBundle::at(std::size_t horizon) const {
    const auto it = models.find(horizon);
    if (it == models.end()) {
        throw NotFoundError("no model for " + advertiser_id + " / " + config_tag + " at horizon " +
                            std::to_string(horizon));
    }
    return it->second;
}

void to_json(nlohmann::json& j, const ModelBundle& b) {
    auto ms = nlohmann::json::object();
    for (const auto& [h, m] : b.models) ms[std::to_string(h)] = m;
    j = {{"advertiser_id", b.advertiser_id},
         {"config_tag", b.config_tag},
         {"composition", pipeline::to_string(b.composition.tag)},
         {"peer_limit", b.composition.peer_limit},
         {"cluster_mean", b.composition.cluster_mean},
         {"origin", format_date(b.origin)},
         {"models", ms}};
}

void from_json(const nlohmann::json& j, ModelBundle& b) {
    b.advertiser_id = j.at("advertiser_id").get<std::string>();
    b.config_tag = j.at("config_tag").get<std::string>();
    b.composition.tag = pipeline::parse_composition(j.at("composition").get<std::string>());
    b.composition.peer_limit = j.at("peer_limit").get<std::size_t>();
    b.composition.cluster_mean = j.at("cluster_mean").get<bool>();
    b.origin = parse_date(j.at("origin").get<std::string>());
    b.models.clear();
    for (const auto& [h, m] : j.at("models").items()) b.models[std::stoul(h)] = m.get<models::TrainedModel>();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::string now_iso8601() {
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    const auto day = std::chrono::floor<std::chrono::days>(now);
    const std::chrono::hh_mm_ss hms(now - day);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(Date{day}).c_str(),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

void check_component(const std::string& s, const char* what) {
    if (s.empty() || s.find_first_of("/\\") != std::string::npos || s == "." || s == "..") {
        throw ValidationError(std::string("invalid ") + what + " \"" + s + "\"");
    }
}

} // namespace

RunStore RunStore::create(const fs::path& root, const RunConfig& config, const PanelDataset& panel,
                          const std::optional<sim::GroundTruth>& truth) {
    config.validate();
    if (panel.empty()) throw ValidationError("cannot create a run from an empty panel");
    if (fs::exists(root) && !fs::is_empty(root)) {
        throw ValidationError("run directory " + root.string() + " already exists and is not empty");
    }
    fs::create_directories(root / "models");
    fs::create_directories(root / "reports");

    const std::string config_text = nlohmann::json(config).dump(2) + "\n";
    std::ostringstream csv;
    write_csv(csv, panel);
    const std::string dataset_text = csv.str();
    write_file(root / "config.json", config_text);
    write_file(root / "dataset.csv", dataset_text);
    if (truth) write_file(root / "ground_truth.json", nlohmann::json(*truth).dump(2) + "\n");

    const std::string run_id = fs::absolute(root).lexically_normal().filename().string();
    const nlohmann::json manifest = {{"run_id", run_id.empty() ? "run" : run_id},
                                     {"config_hash", fingerprint(config_text)},
                                     {"dataset_fingerprint", fingerprint(dataset_text)},
                                     {"created_at", now_iso8601()}};
    write_file(root / "manifest.json", manifest.dump(2) + "\n");
    return open(root);
}

RunStore RunStore::open(const fs::path& root) {
    if (!fs::is_directory(root)) throw NotFoundError("run directory " + root.string() + " does not exist");
    if (!fs::exists(root / "manifest.json")) throw ValidationError(root.string() + " is not a run (no manifest.json)");
    const auto manifest = read_json(root / "manifest.json");
    const std::string config_text = read_file(root / "config.json");
    const std::string dataset_text = read_file(root / "dataset.csv");
    if (manifest.value("config_hash", "") != fingerprint(config_text)) {
        throw ValidationError("config.json does not match the run manifest");
    }
    if (manifest.value("dataset_fingerprint", "") != fingerprint(dataset_text)) {
        throw ValidationError("dataset.csv does not match the run manifest");
    }
    RunStore store;
    store.root_ = root;
    store.run_id_ = manifest.value("run_id", "run");
    try {
        store.config_ = nlohmann::json::parse(config_text).get<RunConfig>();
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed config.json: ") + e.what());
    }
    std::istringstream csv(dataset_text);
    // dataset.csv holds the raw channels; cpc and budget are re-derived.
    const PanelDataset raw = ingest_csv(csv);
    std::vector<AdvertiserSeries> series;
    for (const auto& s : raw.advertisers()) series.push_back(extract_budget(derive_cpc(s)));
    store.panel_ = PanelDataset(std::move(series));
    if (fs::exists(root / "ground_truth.json")) {
        store.truth_ = read_json(root / "ground_truth.json").get<sim::GroundTruth>();
    }
    return store;
}

Date RunStore::origin() const {
    return config_.origin ? *config_.origin : pipeline::default_origin(panel_, config_.horizons);
}

DateRange RunStore::training_window() const { return {panel_.start(), origin()}; }

pipeline::ClusterSet RunStore::clusters() const {
    pipeline::ClusterSet out;
    const fs::path path = root_ / "clusters.json";
    if (!fs::exists(path)) return out;
    const auto j = read_json(path);
    for (const auto& [method, a] : j.items()) {
        out[clustering::parse_cluster_method(method)] = a.get<clustering::ClusterAssignment>();
    }
    return out;
}

void RunStore::save_clusters(const clustering::ClusterAssignment& assignment) const {
    auto all = clusters();
    all[assignment.method] = assignment;
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [method, a] : all) j[clustering::to_string(method)] = a;
    write_file(root_ / "clusters.json", j.dump(2) + "\n");
}

fs::path RunStore::model_path(const std::string& advertiser_id, const std::string& config_tag) const {
    check_component(advertiser_id, "advertiser id");
    check_component(config_tag, "config tag");
    return root_ / "models" / advertiser_id / (config_tag + ".json");
}

void RunStore::save_bundle(const ModelBundle& bundle) const {
    if (!panel_.find(bundle.advertiser_id)) throw NotFoundError("unknown advertiser " + bundle.advertiser_id);
    write_file(model_path(bundle.advertiser_id, bundle.config_tag), nlohmann::json(bundle).dump() + "\n");
}

ModelBundle RunStore::load_bundle(const std::string& advertiser_id, const std::string& config_tag) const {
    const fs::path path = model_path(advertiser_id, config_tag);
    if (!fs::exists(path)) throw NotFoundError("no trained model " + config_tag + " for " + advertiser_id);
    try {
        return read_json(path).get<ModelBundle>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed model file " + path.string() + ": " + e.what());
    }
}

std::map<std::string, std::vector<std::string>> RunStore::model_index() const {
    std::map<std::string, std::vector<std::string>> out;
    const fs::path dir = root_ / "models";
    if (!fs::is_directory(dir)) return out;
    for (const auto& adv : fs::directory_iterator(dir)) {
        if (!adv.is_directory()) continue;
        std::vector<std::string> tags;
        for (const auto& f : fs::directory_iterator(adv.path())) {
            if (f.path().extension() == ".json") tags.push_back(f.path().stem().string());
        }
        std::sort(tags.begin(), tags.end());
        if (!tags.empty()) out[adv.path().filename().string()] = std::move(tags);
    }
    return out;
}

void RunStore::save_grid(const std::vector<pipeline::GridEntry>& grid) const {
    write_file(root_ / "models" / "grid.json", pipeline::grid_to_json(grid).dump(2) + "\n");
}

std::vector<pipeline::GridEntry> RunStore::grid() const {
    const fs::path path = root_ / "models" / "grid.json";
    if (!fs::exists(path)) throw ValidationError("no trained models");
    return pipeline::grid_from_json(read_json(path));
}

fs::path RunStore::reports_dir() const { return root_ / "reports"; }

} // namespace adcast::service
