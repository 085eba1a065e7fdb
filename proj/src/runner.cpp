#include "ucc/runner.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ucc/agent.hpp"

namespace ucc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

AgentKind agent_kind_from_name(const std::string& name) {
    if (name == "scripted") return AgentKind::scripted;
    if (name == "live") return AgentKind::live;
    throw ConfigError("unknown agent backend '" + name + "'");
}

const char* agent_kind_name(AgentKind k) {
    return k == AgentKind::scripted ? "scripted" : "live";
}

MechanismFilter mechanism_filter_from_name(const std::string& name) {
    if (name == "both") return MechanismFilter::both;
    if (name == "memory_bank") return MechanismFilter::memory_bank;
    if (name == "shared_context") return MechanismFilter::shared_context;
    throw ConfigError("unknown mechanism filter '" + name + "'");
}

const char* mechanism_filter_name(MechanismFilter f) {
    switch (f) {
        case MechanismFilter::both: return "both";
        case MechanismFilter::memory_bank: return "memory_bank";
        case MechanismFilter::shared_context: return "shared_context";
    }
    return "both";
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    RunConfig c;
    if (j.contains("corpus")) c.corpus_path = j["corpus"].get<std::string>();
    if (j.contains("mechanism")) c.mechanism = mechanism_filter_from_name(j["mechanism"]);
    if (j.contains("agent")) c.agent = agent_kind_from_name(j["agent"]);
    if (j.contains("sanitizer")) c.sanitizer = sanitizer_mode_from_name(j["sanitizer"]);
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("k")) c.k = j["k"].get<int>();
    if (j.contains("dim")) c.dim = j["dim"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
    if (j.contains("client")) c.client_mode = client_mode_from_name(j["client"]);
    if (j.contains("endpoint")) c.endpoint = j["endpoint"].get<std::string>();
    if (j.contains("model")) c.model = j["model"].get<std::string>();
    if (j.contains("cache")) c.cache_dir = j["cache"].get<std::string>();
    if (j.contains("inflight")) c.inflight = j["inflight"].get<int>();
    if (j.contains("embedder")) c.embedder = j["embedder"].get<std::string>();
    if (j.contains("assets")) c.assets_dir = j["assets"].get<std::string>();
    return c;
}

namespace {

std::string read_asset(const std::string& assets_dir, const std::string& name) {
    const fs::path path = fs::path(assets_dir) / name;
    std::ifstream in(path);
    if (!in) throw ConfigError("asset not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Remote embedder over the shared client machinery; hashing stays the
/// default so the oracle path never leaves the process.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::shared_ptr<LlmClient> client, ClientMode mode, int dim)
        : client_(std::move(client)), mode_(mode), dim_(dim) {}

    int dim() const override { return dim_; }

    Embedding embed_text(const std::string& text) const override {
        const std::vector<double> values = client_->embed_remote(text, mode_);
        Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
        for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
        return Embedding{std::move(v)};
    }

private:
    std::shared_ptr<LlmClient> client_;
    ClientMode mode_;
    int dim_;
};

std::optional<Classification> classification_from_name(const std::string& name) {
    if (name == "clean") return Classification::clean;
    if (name == "wrong_answer") return Classification::wrong_answer;
    if (name == "no_answer") return Classification::no_answer;
    if (name == "indeterminate") return std::nullopt;
    throw SchemaError("unknown classification '" + name + "'");
}

std::string percent(double fraction) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(1) << fraction * 100.0;
    return out.str();
}

json cell_to_json(const MetricsCell& cell) {
    json j;
    j["pairs"] = cell.pairs;
    j["trials"] = cell.trials;
    j["wrong_answer"] = cell.wrong_answer;
    j["no_answer"] = cell.no_answer;
    j["indeterminate"] = cell.indeterminate;
    j["contamination_rate"] = cell.rate();
    j["wrong_answer_share"] = cell.wrong_share();
    j["no_answer_share"] = cell.no_answer_share();
    return j;
}

} // namespace

RunResult run_experiment(const RunConfig& config, std::unique_ptr<HttpTransport> transport) {
    auto corpus = std::make_shared<const Corpus>(load_corpus(config.corpus_path));

    EvalSettings settings;
    settings.trials = config.trials;
    settings.retrieval.k = config.k;
    settings.retrieval.dim = config.dim;
    settings.skip_source_write = config.skip_source_write;
    if (config.agent == AgentKind::live) settings.context_prefilter = ContextPrefilter::judge;

    std::shared_ptr<LlmClient> client;
    auto need_client = [&]() -> std::shared_ptr<LlmClient> {
        if (client == nullptr) {
            LlmClientConfig cc;
            cc.endpoint = config.endpoint;
            cc.model = config.model;
            cc.cache_dir = config.cache_dir;
            cc.max_inflight = config.inflight;
            client = std::make_shared<LlmClient>(cc, std::move(transport));
        }
        return client;
    };

    std::shared_ptr<const Embedder> embedder;
    if (config.embedder == "hashing") {
        embedder = std::make_shared<HashingEmbedder>(config.dim);
    } else if (config.embedder.rfind("remote:", 0) == 0) {
        // "remote:" reuses the chat endpoint; "remote:<endpoint>" overrides it
        const std::string endpoint = config.embedder.substr(7);
        std::shared_ptr<LlmClient> c;
        if (endpoint.empty() || endpoint == config.endpoint) {
            c = need_client();
        } else {
            LlmClientConfig cc;
            cc.endpoint = endpoint;
            cc.model = config.model;
            cc.cache_dir = config.cache_dir;
            cc.max_inflight = config.inflight;
            c = std::make_shared<LlmClient>(cc);
        }
        embedder = std::make_shared<RemoteEmbedder>(c, config.client_mode, config.dim);
    } else {
        throw ConfigError("unknown embedder '" + config.embedder + "'");
    }

    std::shared_ptr<const AgentBackend> agent;
    std::shared_ptr<const ContextJudge> judge;
    if (config.agent == AgentKind::scripted) {
        agent = std::make_shared<ScriptedAgent>(corpus);
        judge = std::make_shared<ScriptedJudge>();
    } else {
        auto c = need_client();
        agent = std::make_shared<LiveAgent>(make_completion_fn(c, config.client_mode), config.model);
        judge = std::make_shared<LlmJudge>(make_completion_fn(c, config.client_mode), config.model,
                                           read_asset(config.assets_dir, "judge_prompt_v1.txt"));
    }

    std::shared_ptr<const Sanitizer> sanitizer;
    if (config.sanitizer == SanitizerMode::rules) {
        sanitizer = std::make_shared<RuleSanitizer>();
    } else if (config.sanitizer == SanitizerMode::llm) {
        auto c = need_client();
        sanitizer = std::make_shared<LlmSanitizer>(
            make_completion_fn(c, config.client_mode), config.model,
            read_asset(config.assets_dir, "sanitizer_memory_prompt_v1.txt"),
            read_asset(config.assets_dir, "sanitizer_context_prompt_v1.txt"));
    }

    Evaluator evaluator(corpus, agent, embedder, settings, sanitizer, judge);

    std::vector<PairSpec> pairs = enumerate_pairs(*corpus, config.seed, config.trials);
    if (config.mechanism != MechanismFilter::both) {
        const Mechanism wanted = config.mechanism == MechanismFilter::memory_bank
                                     ? Mechanism::memory_bank
                                     : Mechanism::shared_context;
        std::vector<PairSpec> filtered;
        for (const auto& p : pairs)
            if (mechanism_of(corpus->find_convention(p.source_id)->dataset) == wanted)
                filtered.push_back(p);
        pairs = std::move(filtered);
    }

    RunResult result;
    result.records = evaluator.run_pairs(pairs, config.jobs);
    result.report = aggregate(result.records);

    if (sanitizer != nullptr) {
        Evaluator raw(corpus, agent, embedder, settings, nullptr, judge);
        result.baseline_records = raw.run_pairs(pairs, config.jobs);
        result.baseline_report = aggregate(*result.baseline_records);
    }

    if (!config.out_dir.empty()) write_artifacts(config, result);
    return result;
}

std::string records_to_jsonl(const std::vector<TrialRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        json j;
        j["dataset"] = dataset_name(rec.dataset);
        j["type"] = type_name(rec.type);
        j["mechanism"] = mechanism_name(rec.mechanism);
        j["source_id"] = rec.source_id;
        j["victim_id"] = rec.victim_id;
        j["trial"] = rec.trial_index;
        j["classification"] =
            rec.classification ? classification_name(*rec.classification) : "indeterminate";
        j["clean_output"] = rec.clean_output ? json(*rec.clean_output) : json(nullptr);
        j["contaminated_output"] =
            rec.contaminated_output ? json(*rec.contaminated_output) : json(nullptr);
        j["code_borne"] = rec.code_borne;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<TrialRecord> load_run_records(const std::string& run_dir,
                                          const std::string& filename) {
    const fs::path path = fs::path(run_dir) / filename;
    std::ifstream in(path);
    if (!in) throw MissingRunData("no trial records at " + path.string());
    std::vector<TrialRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        TrialRecord rec;
        rec.dataset = dataset_from_name(j.at("dataset").get<std::string>());
        rec.type = type_from_name(j.at("type").get<std::string>());
        rec.mechanism = j.at("mechanism").get<std::string>() == "memory_bank"
                            ? Mechanism::memory_bank
                            : Mechanism::shared_context;
        rec.source_id = j.at("source_id").get<std::string>();
        rec.victim_id = j.at("victim_id").get<std::string>();
        rec.trial_index = j.at("trial").get<int>();
        rec.classification = classification_from_name(j.at("classification").get<std::string>());
        if (!j.at("clean_output").is_null()) rec.clean_output = j["clean_output"].get<std::string>();
        if (!j.at("contaminated_output").is_null())
            rec.contaminated_output = j["contaminated_output"].get<std::string>();
        rec.code_borne = j.value("code_borne", false);
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw MissingRunData("empty trial log at " + path.string());
    return records;
}

RunConfig load_config_echo(const std::string& run_dir) {
    RunConfig config;
    std::ifstream in(fs::path(run_dir) / "metrics.json");
    if (!in) return config;
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception&) {
        return config;
    }
    if (!j.contains("config")) return config;
    const json& c = j["config"];
    if (c.contains("corpus")) config.corpus_path = c["corpus"].get<std::string>();
    if (c.contains("mechanism")) config.mechanism = mechanism_filter_from_name(c["mechanism"]);
    if (c.contains("agent")) config.agent = agent_kind_from_name(c["agent"]);
    if (c.contains("sanitizer")) config.sanitizer = sanitizer_mode_from_name(c["sanitizer"]);
    if (c.contains("trials")) config.trials = c["trials"].get<int>();
    if (c.contains("k")) config.k = c["k"].get<int>();
    if (c.contains("dim")) config.dim = c["dim"].get<int>();
    if (c.contains("seed")) config.seed = c["seed"].get<std::uint64_t>();
    if (c.contains("client")) config.client_mode = client_mode_from_name(c["client"]);
    if (c.contains("model")) config.model = c["model"].get<std::string>();
    if (c.contains("embedder")) config.embedder = c["embedder"].get<std::string>();
    if (c.contains("jobs")) config.jobs = c["jobs"].get<int>();
    return config;
}

std::string render_report(const MetricsReport& report, const RunConfig& config,
                          const MetricsReport* baseline) {
    std::ostringstream out;
    out << "run configuration\n";
    out << "  corpus=" << config.corpus_path << " mechanism=" << mechanism_filter_name(config.mechanism)
        << " agent=" << agent_kind_name(config.agent)
        << " sanitizer=" << sanitizer_mode_name(config.sanitizer) << "\n";
    out << "  trials=" << config.trials << " k=" << config.k << " dim=" << config.dim
        << " seed=" << config.seed << " client=" << client_mode_name(config.client_mode)
        << " embedder=" << config.embedder << " model=" << config.model << "\n\n";

    const Dataset datasets[] = {Dataset::mimic3, Dataset::eicu, Dataset::slack};
    const ContaminationType types[] = {ContaminationType::SC, ContaminationType::TC,
                                       ContaminationType::PC};
    const int width = baseline == nullptr ? 8 : 14;

    // rate(cell) or "raw / sanitized" when the raw arm is present
    auto rate_text = [&](Dataset d, const ContaminationType* t) {
        auto lookup = [&](const MetricsReport& r) -> const MetricsCell* {
            if (t == nullptr) {
                const auto it = r.per_dataset.find(d);
                return it == r.per_dataset.end() ? nullptr : &it->second;
            }
            const auto it = r.cells.find({d, *t});
            return it == r.cells.end() ? nullptr : &it->second;
        };
        const MetricsCell* cell = lookup(report);
        if (cell == nullptr) return std::string("-");
        if (baseline == nullptr) return percent(cell->rate());
        const MetricsCell* raw = lookup(*baseline);
        return (raw == nullptr ? std::string("-") : percent(raw->rate())) + "/" +
               percent(cell->rate());
    };

    out << "contamination rate (%) by dataset and type";
    if (baseline != nullptr) out << " (raw/sanitized)";
    out << "\n\n";
    out << std::left << std::setw(10) << "dataset" << std::right << std::setw(width) << "SC"
        << std::setw(width) << "TC" << std::setw(width) << "PC" << std::setw(width + 2) << "overall"
        << "\n";
    for (Dataset d : datasets) {
        if (report.per_dataset.find(d) == report.per_dataset.end()) continue;
        out << std::left << std::setw(10) << dataset_name(d) << std::right;
        for (ContaminationType t : types) out << std::setw(width) << rate_text(d, &t);
        out << std::setw(width + 2) << rate_text(d, nullptr) << "\n";
    }
    out << std::left << std::setw(10) << "overall" << std::right << std::setw(width) << ""
        << std::setw(width) << "" << std::setw(width) << "" << std::setw(width + 2)
        << (baseline == nullptr
                ? percent(report.overall.rate())
                : percent(baseline->overall.rate()) + "/" + percent(report.overall.rate()))
        << "\n\n";

    out << "failure-mode split (% of trials)\n\n";
    out << std::left << std::setw(10) << "dataset" << std::right << std::setw(14) << "wrong_answer"
        << std::setw(12) << "no_answer" << std::setw(15) << "indeterminate" << "\n";
    for (Dataset d : datasets) {
        const auto it = report.per_dataset.find(d);
        if (it == report.per_dataset.end()) continue;
        const MetricsCell& cell = it->second;
        out << std::left << std::setw(10) << dataset_name(d) << std::right << std::setw(14)
            << percent(cell.wrong_share()) << std::setw(12) << percent(cell.no_answer_share())
            << std::setw(15) << cell.indeterminate << "\n";
    }
    out << "\npairs=" << report.overall.pairs << " trials=" << report.overall.trials
        << " contaminated=" << report.overall.contaminated()
        << " rate=" << percent(report.overall.rate()) << "%\n";
    return out.str();
}

std::string render_rates_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "dataset,type,pairs,trials,wrong_answer,no_answer,indeterminate,contamination_rate\n";
    for (const auto& [key, cell] : report.cells) {
        out << dataset_name(key.first) << "," << type_name(key.second) << "," << cell.pairs << ","
            << cell.trials << "," << cell.wrong_answer << "," << cell.no_answer << ","
            << cell.indeterminate << "," << percent(cell.rate()) << "\n";
    }
    for (const auto& [dataset, cell] : report.per_dataset) {
        out << dataset_name(dataset) << ",overall," << cell.pairs << "," << cell.trials << ","
            << cell.wrong_answer << "," << cell.no_answer << "," << cell.indeterminate << ","
            << percent(cell.rate()) << "\n";
    }
    out << "all,overall," << report.overall.pairs << "," << report.overall.trials << ","
        << report.overall.wrong_answer << "," << report.overall.no_answer << ","
        << report.overall.indeterminate << "," << percent(report.overall.rate()) << "\n";
    return out.str();
}

std::string render_failure_modes_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "dataset,trials,wrong_answer_share,no_answer_share\n";
    for (const auto& [dataset, cell] : report.per_dataset) {
        out << dataset_name(dataset) << "," << cell.trials << "," << percent(cell.wrong_share())
            << "," << percent(cell.no_answer_share()) << "\n";
    }
    return out.str();
}

std::string render_comparison_csv(const MetricsReport& raw, const MetricsReport& sanitized) {
    std::ostringstream out;
    out << "dataset,type,raw_rate,sanitized_rate\n";
    for (const auto& [key, cell] : sanitized.cells) {
        const auto rit = raw.cells.find(key);
        out << dataset_name(key.first) << "," << type_name(key.second) << ","
            << (rit == raw.cells.end() ? "-" : percent(rit->second.rate())) << ","
            << percent(cell.rate()) << "\n";
    }
    for (const auto& [dataset, cell] : sanitized.per_dataset) {
        const auto rit = raw.per_dataset.find(dataset);
        out << dataset_name(dataset) << ",overall,"
            << (rit == raw.per_dataset.end() ? "-" : percent(rit->second.rate())) << ","
            << percent(cell.rate()) << "\n";
    }
    out << "all,overall," << percent(raw.overall.rate()) << "," << percent(sanitized.overall.rate())
        << "\n";
    return out.str();
}

std::string metrics_to_json(const MetricsReport& report, const RunConfig& config) {
    json j;
    json cfg;
    cfg["corpus"] = config.corpus_path;
    cfg["mechanism"] = mechanism_filter_name(config.mechanism);
    cfg["agent"] = agent_kind_name(config.agent);
    cfg["sanitizer"] = sanitizer_mode_name(config.sanitizer);
    cfg["trials"] = config.trials;
    cfg["k"] = config.k;
    cfg["dim"] = config.dim;
    cfg["seed"] = config.seed;
    cfg["client"] = client_mode_name(config.client_mode);
    cfg["model"] = config.model;
    cfg["embedder"] = config.embedder;
    cfg["jobs"] = config.jobs;
    j["config"] = std::move(cfg);

    json cells = json::array();
    for (const auto& [key, cell] : report.cells) {
        json c = cell_to_json(cell);
        c["dataset"] = dataset_name(key.first);
        c["type"] = type_name(key.second);
        cells.push_back(std::move(c));
    }
    j["cells"] = std::move(cells);

    json per_dataset = json::array();
    for (const auto& [dataset, cell] : report.per_dataset) {
        json c = cell_to_json(cell);
        c["dataset"] = dataset_name(dataset);
        per_dataset.push_back(std::move(c));
    }
    j["per_dataset"] = std::move(per_dataset);
    j["overall"] = cell_to_json(report.overall);
    return j.dump(2) + "\n";
}

void write_artifacts(const RunConfig& config, const RunResult& result) {
    fs::create_directories(config.out_dir);
    auto put = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(config.out_dir) / name, std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + name + " under " + config.out_dir);
        out << content;
    };
    put("trials.jsonl", records_to_jsonl(result.records));
    put("metrics.json", metrics_to_json(result.report, config));
    const MetricsReport* baseline =
        result.baseline_report.has_value() ? &*result.baseline_report : nullptr;
    put("report.txt", render_report(result.report, config, baseline));
    put("rates.csv", render_rates_csv(result.report));
    put("failure_modes.csv", render_failure_modes_csv(result.report));
    if (baseline != nullptr) {
        put("baseline_trials.jsonl", records_to_jsonl(*result.baseline_records));
        put("comparison.csv", render_comparison_csv(*baseline, result.report));
    }
}

} // namespace ucc
