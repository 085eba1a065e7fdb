#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ucc/agent.hpp"
#include "ucc/corpus.hpp"
#include "ucc/runner.hpp"
#include "ucc/sanitizer.hpp"

namespace {

using namespace ucc;

int cmd_validate(const std::string& corpus_path, int k, int dim) {
    const Corpus corpus = load_corpus(corpus_path);
    RetrievalConfig config;
    config.k = k;
    config.dim = dim;
    const ValidationReport report = validate_corpus(corpus, config);
    std::cout << "corpus: " << corpus.conventions.size() << " conventions, "
              << corpus.victims.size() << " victims\n";
    if (report.ok()) {
        std::cout << "validation: OK\n";
        return 0;
    }
    for (const auto& violation : report.violations) std::cout << "violation: " << violation << "\n";
    std::cout << "validation: " << report.violations.size() << " violation(s)\n";
    return 1;
}

int cmd_run(const RunConfig& config) {
    const RunResult result = run_experiment(config);
    std::cout << render_report(result.report, config,
                               result.baseline_report ? &*result.baseline_report : nullptr);
    if (!config.out_dir.empty()) std::cout << "\nartifacts written to " << config.out_dir << "\n";
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const std::vector<TrialRecord> records = load_run_records(run_dir);
    const MetricsReport report = aggregate(records);

    // runs made with a sanitizer also logged their raw arm
    std::optional<MetricsReport> baseline;
    if (std::filesystem::exists(std::filesystem::path(run_dir) / "baseline_trials.jsonl"))
        baseline = aggregate(load_run_records(run_dir, "baseline_trials.jsonl"));

    std::cout << render_report(report, load_config_echo(run_dir),
                               baseline ? &*baseline : nullptr);
    std::cout << "\n" << render_rates_csv(report);
    std::cout << "\n" << render_failure_modes_csv(report);
    if (baseline) std::cout << "\n" << render_comparison_csv(*baseline, report);
    return 0;
}

int cmd_dump(const std::string& corpus_path, const std::string& dataset_name_arg,
             const std::string& source_id, const std::string& sanitizer_mode, int k, int dim) {
    auto corpus = std::make_shared<const Corpus>(load_corpus(corpus_path));
    EvalSettings settings;
    settings.retrieval.k = k;
    settings.retrieval.dim = dim;

    std::shared_ptr<const Sanitizer> sanitizer;
    const SanitizerMode mode = sanitizer_mode_from_name(sanitizer_mode);
    if (mode == SanitizerMode::rules) sanitizer = std::make_shared<RuleSanitizer>();
    if (mode == SanitizerMode::llm)
        throw ConfigError("dump supports sanitizer off|rules (llm needs a live client)");

    Evaluator evaluator(corpus, std::make_shared<ScriptedAgent>(corpus),
                        std::make_shared<HashingEmbedder>(dim), settings, sanitizer);

    const Dataset dataset = dataset_from_name(dataset_name_arg);
    SharedState state = evaluator.build_base_state(dataset);
    if (!source_id.empty()) {
        const SourceConvention* convention = corpus->find_convention(source_id);
        if (convention == nullptr) throw ReferenceError("unknown convention '" + source_id + "'");
        if (convention->dataset != dataset)
            throw ReferenceError("convention '" + source_id + "' belongs to another dataset");
        state = evaluator.build_contaminated_state(state, *convention);
    }
    std::cout << serialize_state(state);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-user contamination evaluation harness for shared-state agents"};
    app.require_subcommand(1);

    std::string config_path;

    // validate
    auto* validate = app.add_subcommand("validate", "load the corpus and check its invariants");
    std::string v_corpus = "corpus/ucc_corpus.json";
    int v_k = 4, v_dim = 384;
    validate->add_option("--corpus", v_corpus, "corpus file");
    validate->add_option("--k", v_k, "retrieval top-k");
    validate->add_option("--dim", v_dim, "embedding dimension");

    // run
    auto* run = app.add_subcommand("run", "run the paired clean-vs-contaminated protocol");
    RunConfig rc;
    std::string r_mechanism = "both", r_agent = "scripted", r_sanitizer = "off", r_client = "replay";
    run->add_option("--config", config_path, "JSON config file (flags override it)");
    auto* o_corpus = run->add_option("--corpus", rc.corpus_path, "corpus file");
    auto* o_mech = run->add_option("--mechanism", r_mechanism, "both|memory_bank|shared_context");
    auto* o_agent = run->add_option("--agent", r_agent, "scripted|live");
    auto* o_san = run->add_option("--sanitizer", r_sanitizer, "off|rules|llm");
    auto* o_trials = run->add_option("--trials", rc.trials, "trials per pair");
    auto* o_k = run->add_option("--k", rc.k, "retrieval top-k");
    auto* o_dim = run->add_option("--dim", rc.dim, "embedding dimension");
    auto* o_seed = run->add_option("--seed", rc.seed, "victim sampling seed");
    auto* o_out = run->add_option("--out", rc.out_dir, "output directory for run artifacts");
    auto* o_jobs = run->add_option("--jobs", rc.jobs, "parallel pair evaluation threads");
    auto* o_client = run->add_option("--client", r_client, "live|record|replay");
    auto* o_endpoint = run->add_option("--endpoint", rc.endpoint, "chat endpoint, scheme://host[:port]");
    auto* o_model = run->add_option("--model", rc.model, "model name");
    auto* o_cache = run->add_option("--cache", rc.cache_dir, "record/replay cache directory");
    auto* o_inflight = run->add_option("--inflight", rc.inflight, "max concurrent live requests");
    auto* o_embedder = run->add_option("--embedder", rc.embedder, "hashing or remote:<endpoint>");
    auto* o_assets = run->add_option("--assets", rc.assets_dir, "prompt asset directory");

    // report
    auto* report = app.add_subcommand("report", "re-render tables from a run directory");
    std::string rep_dir;
    report->add_option("run_dir", rep_dir, "run directory with trials.jsonl")->required();

    // dump
    auto* dump = app.add_subcommand("dump", "serialize a shared state to stdout");
    std::string d_corpus = "corpus/ucc_corpus.json", d_dataset = "mimic3", d_source, d_sanitizer = "off";
    int d_k = 4, d_dim = 384;
    dump->add_option("--corpus", d_corpus, "corpus file");
    dump->add_option("--dataset", d_dataset, "mimic3|eicu|slack");
    dump->add_option("--source", d_source, "write this convention into the dumped state");
    dump->add_option("--sanitizer", d_sanitizer, "off|rules");
    dump->add_option("--k", d_k, "retrieval top-k");
    dump->add_option("--dim", d_dim, "embedding dimension");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(v_corpus, v_k, v_dim);
        if (run->parsed()) {
            if (!config_path.empty()) {
                RunConfig from_file = load_run_config(config_path);
                // flags override the config file, which overrides defaults
                if (!*o_corpus) rc.corpus_path = from_file.corpus_path;
                if (!*o_mech) r_mechanism = mechanism_filter_name(from_file.mechanism);
                if (!*o_agent) r_agent = agent_kind_name(from_file.agent);
                if (!*o_san) r_sanitizer = sanitizer_mode_name(from_file.sanitizer);
                if (!*o_trials) rc.trials = from_file.trials;
                if (!*o_k) rc.k = from_file.k;
                if (!*o_dim) rc.dim = from_file.dim;
                if (!*o_seed) rc.seed = from_file.seed;
                if (!*o_out) rc.out_dir = from_file.out_dir;
                if (!*o_jobs) rc.jobs = from_file.jobs;
                if (!*o_client) r_client = client_mode_name(from_file.client_mode);
                if (!*o_endpoint) rc.endpoint = from_file.endpoint;
                if (!*o_model) rc.model = from_file.model;
                if (!*o_cache) rc.cache_dir = from_file.cache_dir;
                if (!*o_inflight) rc.inflight = from_file.inflight;
                if (!*o_embedder) rc.embedder = from_file.embedder;
                if (!*o_assets) rc.assets_dir = from_file.assets_dir;
            }
            rc.mechanism = mechanism_filter_from_name(r_mechanism);
            rc.agent = agent_kind_from_name(r_agent);
            rc.sanitizer = sanitizer_mode_from_name(r_sanitizer);
            rc.client_mode = client_mode_from_name(r_client);
            return cmd_run(rc);
        }
        if (report->parsed()) return cmd_report(rep_dir);
        if (dump->parsed()) return cmd_dump(d_corpus, d_dataset, d_source, d_sanitizer, d_k, d_dim);
    } catch (const PrefilterViolation& e) {
        std::cerr << "prefilter violation: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
