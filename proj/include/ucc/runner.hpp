#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ucc/llm_client.hpp"
#include "ucc/protocol.hpp"
#include "ucc/sanitizer.hpp"

namespace ucc {

enum class AgentKind { scripted, live };

AgentKind agent_kind_from_name(const std::string& name);
const char* agent_kind_name(AgentKind k);

/// Which datasets to run: all, or only those of one mechanism.
enum class MechanismFilter { both, memory_bank, shared_context };

MechanismFilter mechanism_filter_from_name(const std::string& name);
const char* mechanism_filter_name(MechanismFilter f);

/// Resolved configuration of one experiment run. Defaults reproduce the
/// reference settings: 3 trials per pair, top-4 retrieval, temperature 0.
struct RunConfig {
    std::string corpus_path = "corpus/ucc_corpus.json";
    MechanismFilter mechanism = MechanismFilter::both;
    AgentKind agent = AgentKind::scripted;
    SanitizerMode sanitizer = SanitizerMode::off;
    int trials = 3;
    int k = 4;
    int dim = 384;
    std::uint64_t seed = 7;
    std::string out_dir;
    int jobs = 1;

    // live-path settings
    ClientMode client_mode = ClientMode::replay;
    std::string endpoint;
    std::string model = "gpt-4o";
    std::string cache_dir;
    int inflight = 4; // cap on concurrent live requests
    std::string embedder = "hashing"; // "hashing" or "remote:<endpoint>"
    std::string assets_dir = "assets";

    bool skip_source_write = false;
};

RunConfig load_run_config(const std::string& path); // JSON config file

struct RunResult {
    std::vector<TrialRecord> records;
    MetricsReport report;
    // raw (sanitizer-off) arm of the same grid, evaluated whenever a
    // sanitizer is active so reports can show the with/without comparison
    std::optional<std::vector<TrialRecord>> baseline_records;
    std::optional<MetricsReport> baseline_report;
};

/// Run the full protocol over the corpus under `config`. When out_dir is set,
/// writes trials.jsonl, metrics.json, report.txt, rates.csv and
/// failure_modes.csv (plus baseline_trials.jsonl and comparison.csv when a
/// sanitizer is active). An injected transport (tests) replaces the default
/// HTTP transport for all live-path requests.
RunResult run_experiment(const RunConfig& config,
                         std::unique_ptr<HttpTransport> transport = nullptr);

/// Deterministic renderings: same records, byte-identical output.
/// `baseline` adds the raw arm to the rates table as "raw / sanitized".
std::string render_report(const MetricsReport& report, const RunConfig& config,
                          const MetricsReport* baseline = nullptr);
std::string render_comparison_csv(const MetricsReport& raw, const MetricsReport& sanitized);
std::string render_rates_csv(const MetricsReport& report);
std::string render_failure_modes_csv(const MetricsReport& report);
std::string records_to_jsonl(const std::vector<TrialRecord>& records);
std::string metrics_to_json(const MetricsReport& report, const RunConfig& config);

/// Re-render reports from a run directory's trials.jsonl.
/// Throws MissingRunData when the directory has no trial records.
std::vector<TrialRecord> load_run_records(const std::string& run_dir,
                                          const std::string& filename = "trials.jsonl");

/// The config echo a run left in its metrics.json; defaults when absent.
RunConfig load_config_echo(const std::string& run_dir);

void write_artifacts(const RunConfig& config, const RunResult& result);

} // namespace ucc
