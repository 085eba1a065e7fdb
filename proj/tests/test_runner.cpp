#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "ucc/runner.hpp"

using namespace ucc;
namespace fs = std::filesystem;

namespace {

const std::string kCorpusPath = std::string(UCC_REPO_DIR) + "/corpus/ucc_corpus.json";

RunConfig scripted_config() {
    RunConfig config;
    config.corpus_path = kCorpusPath;
    config.assets_dir = std::string(UCC_REPO_DIR) + "/assets";
    return config;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("scripted raw run contaminates everything and renders deterministically") {
    RunConfig config = scripted_config();
    const RunResult once = run_experiment(config);
    CHECK(once.report.overall.rate() == 1.0);

    const RunResult twice = run_experiment(config);
    CHECK(records_to_jsonl(once.records) == records_to_jsonl(twice.records));
    CHECK(render_report(once.report, config) == render_report(twice.report, config));
    CHECK(render_rates_csv(once.report) == render_rates_csv(twice.report));
    CHECK(metrics_to_json(once.report, config) == metrics_to_json(twice.report, config));
}

TEST_CASE("mechanism filter restricts the run to one shared-state mechanism") {
    RunConfig config = scripted_config();
    config.mechanism = MechanismFilter::shared_context;
    const RunResult result = run_experiment(config);
    for (const auto& rec : result.records) CHECK(rec.dataset == Dataset::slack);
    CHECK(result.report.per_dataset.count(Dataset::mimic3) == 0);
}

TEST_CASE("artifacts round-trip through a run directory") {
    RunConfig config = scripted_config();
    const fs::path out = fs::temp_directory_path() / "ucc-run-roundtrip";
    fs::remove_all(out);
    config.out_dir = out.string();
    const RunResult result = run_experiment(config);

    for (const char* name :
         {"trials.jsonl", "metrics.json", "report.txt", "rates.csv", "failure_modes.csv"})
        CHECK(fs::exists(out / name));

    const auto loaded = load_run_records(out.string());
    REQUIRE(loaded.size() == result.records.size());
    const MetricsReport re_aggregated = aggregate(loaded);
    CHECK(re_aggregated.overall.trials == result.report.overall.trials);
    CHECK(re_aggregated.overall.contaminated() == result.report.overall.contaminated());
    CHECK(render_rates_csv(re_aggregated) == render_rates_csv(result.report));

    // the rendered report embeds the resolved configuration
    const std::string report_text = slurp(out / "report.txt");
    CHECK(report_text.find("sanitizer=off") != std::string::npos);
    CHECK(report_text.find("agent=scripted") != std::string::npos);
    CHECK(report_text.find("seed=7") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("report from an empty or missing run directory is MissingRunData") {
    const fs::path out = fs::temp_directory_path() / "ucc-run-empty";
    fs::remove_all(out);
    CHECK_THROWS_AS(load_run_records(out.string()), MissingRunData);
    fs::create_directories(out);
    std::ofstream(out / "trials.jsonl").close();
    CHECK_THROWS_AS(load_run_records(out.string()), MissingRunData);
    fs::remove_all(out);
}

TEST_CASE("a one-trial run quantizes every cell rate to 0 or 1") {
    RunConfig config = scripted_config();
    config.trials = 1;
    config.sanitizer = SanitizerMode::rules;
    const RunResult result = run_experiment(config);
    for (const auto& [key, cell] : result.report.cells) {
        const double rate = cell.rate();
        const bool quantized = rate == 0.0 || rate == 1.0 ||
                               std::abs(rate * cell.trials - std::round(rate * cell.trials)) < 1e-9;
        CHECK(quantized); // every pair contributes 0 or 1 contaminated trial
    }
    // per-pair quantization exactly: trials == pairs when trials-per-pair is 1
    for (const auto& [key, cell] : result.report.cells) CHECK(cell.trials == cell.pairs);
}

TEST_CASE("run config files load and flags keep the documented defaults") {
    const fs::path path = fs::temp_directory_path() / "ucc-config.json";
    {
        std::ofstream out(path, std::ios::trunc);
        out << R"({"sanitizer":"rules","trials":5,"k":2,"mechanism":"memory_bank","seed":99})";
    }
    const RunConfig config = load_run_config(path.string());
    CHECK(config.sanitizer == SanitizerMode::rules);
    CHECK(config.trials == 5);
    CHECK(config.k == 2);
    CHECK(config.mechanism == MechanismFilter::memory_bank);
    CHECK(config.seed == 99);
    // untouched fields keep the reference defaults
    CHECK(config.agent == AgentKind::scripted);
    CHECK(config.model == "gpt-4o");
    CHECK(config.dim == 384);
    fs::remove(path.c_str());

    CHECK_THROWS_AS(load_run_config("/nonexistent/ucc.json"), ConfigError);
}

TEST_CASE("sanitizer runs carry the raw arm and render the comparison") {
    RunConfig config = scripted_config();
    config.sanitizer = SanitizerMode::rules;
    const fs::path out = fs::temp_directory_path() / "ucc-run-comparison";
    fs::remove_all(out);
    config.out_dir = out.string();
    const RunResult result = run_experiment(config);

    REQUIRE(result.baseline_report.has_value());
    CHECK(result.baseline_report->overall.rate() == 1.0); // the raw arm by construction
    CHECK(result.report.overall.rate() < 1.0);

    const std::string report_text =
        render_report(result.report, config, &*result.baseline_report);
    CHECK(report_text.find("(raw/sanitized)") != std::string::npos);
    CHECK(report_text.find("100.0/0.0") != std::string::npos); // slack row

    CHECK(fs::exists(out / "baseline_trials.jsonl"));
    CHECK(fs::exists(out / "comparison.csv"));
    const std::string comparison = slurp(out / "comparison.csv");
    CHECK(comparison.find("dataset,type,raw_rate,sanitized_rate") == 0);
    CHECK(comparison.find("slack,overall,100.0,0.0") != std::string::npos);

    const auto raw_records = load_run_records(out.string(), "baseline_trials.jsonl");
    CHECK(aggregate(raw_records).overall.rate() == 1.0);
    fs::remove_all(out);

    // raw runs have no baseline arm
    RunConfig off = scripted_config();
    CHECK_FALSE(run_experiment(off).baseline_report.has_value());
}

namespace {

// stands in for the rewriter model: echoes memory records back unchanged
// (a pass-through rewrite), abstains on naproxen ones, and returns a fixed
// cleaned line for transcript messages
class RewriterStub final : public HttpTransport {
public:
    HttpResponse post(const std::string&, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>&) override {
        const auto request = nlohmann::json::parse(body);
        const std::string system = request["messages"][0]["content"].get<std::string>();
        const std::string payload = request["messages"][1]["content"].get<std::string>();
        std::string content;
        if (system.find("shared conversational context") != std::string::npos)
            content = "a cleaned transcript line.";
        else if (payload.find("naproxen") != std::string::npos)
            content = "NONE";
        else
            content = payload;
        nlohmann::json res;
        res["choices"] = {{{"message", {{"content", content}}}}};
        return HttpResponse{200, res.dump()};
    }
};

} // namespace

TEST_CASE("the llm sanitizer path wires through run_experiment") {
    setenv("UCC_API_KEY", "test-key", 1);
    const fs::path cache = fs::temp_directory_path() / "ucc-llm-sanitizer-cache";
    fs::remove_all(cache);

    RunConfig config = scripted_config();
    config.sanitizer = SanitizerMode::llm;
    config.client_mode = ClientMode::record;
    config.endpoint = "http://rewriter-stub";
    config.cache_dir = cache.string();
    const RunResult result = run_experiment(config, std::make_unique<RewriterStub>());

    // pass-through rewrites keep the sanitized flag semantics: text-borne
    // pairs come out clean, code-borne ones stay wrong — except the naproxen
    // convention, whose abstention leaves the state untouched
    for (const auto& rec : result.records) {
        if (rec.source_id == "mimic3-pc-03") {
            CHECK(rec.classification == Classification::clean);
        } else if (rec.code_borne) {
            CHECK(rec.classification == Classification::wrong_answer);
        } else {
            CHECK(rec.classification == Classification::clean);
        }
    }

    // the recorded cache replays hermetically through the same config
    config.client_mode = ClientMode::replay;
    int uses = 0;
    class Tripwire final : public HttpTransport {
    public:
        explicit Tripwire(int& uses) : uses_(uses) {}
        HttpResponse post(const std::string&, const std::string&,
                          const std::vector<std::pair<std::string, std::string>>&) override {
            ++uses_;
            throw TransportError("replay touched the network");
        }

    private:
        int& uses_;
    };
    const RunResult replayed = run_experiment(config, std::make_unique<Tripwire>(uses));
    CHECK(uses == 0);
    CHECK(records_to_jsonl(replayed.records) == records_to_jsonl(result.records));
    fs::remove_all(cache);
    unsetenv("UCC_API_KEY");
}

TEST_CASE("skip_source_write drives the whole corpus to rate zero") {
    RunConfig config = scripted_config();
    config.skip_source_write = true;
    const RunResult result = run_experiment(config);
    CHECK(result.report.overall.rate() == 0.0);
    CHECK(result.report.overall.contaminated() == 0);
}
