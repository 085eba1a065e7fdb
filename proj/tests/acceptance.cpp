// Acceptance suite: one check per release criterion, one pass/fail line each.
// Everything here runs desk-scale against the scripted oracle; the only
// skipped criterion needs a recorded gpt-4o cache or live credentials.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "ucc/agent.hpp"
#include "ucc/corpus.hpp"
#include "ucc/llm_client.hpp"
#include "ucc/protocol.hpp"
#include "ucc/runner.hpp"
#include "ucc/sanitizer.hpp"

using namespace ucc;
namespace fs = std::filesystem;

namespace {

const std::string kRepo = UCC_REPO_DIR;
const std::string kCorpusPath = kRepo + "/corpus/ucc_corpus.json";

int failures = 0;
int passes = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " — " << detail << "\n";
    if (ok)
        ++passes;
    else
        ++failures;
}

void skip(const std::string& name, const std::string& why) {
    std::cout << "[SKIP] " << name << " — " << why << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(3);
    out << v;
    return out.str();
}

struct AbstainSanitizer final : Sanitizer {
    SanitizeOutcome sanitize_trace(const RawTrace&) const override {
        return SanitizeOutcome::abstain();
    }
};

Evaluator make_evaluator(std::shared_ptr<const Corpus> corpus,
                         std::shared_ptr<const Sanitizer> sanitizer, EvalSettings settings = {}) {
    return Evaluator(corpus, std::make_shared<ScriptedAgent>(corpus),
                     std::make_shared<HashingEmbedder>(), settings, std::move(sanitizer));
}

// ---- criteria ----

void oracle_raw_rates(std::shared_ptr<const Corpus> corpus) {
    const auto start = std::chrono::steady_clock::now();
    const auto pairs = enumerate_pairs(*corpus, 7);

    Evaluator raw = make_evaluator(corpus, nullptr);
    const auto records = raw.run_pairs(pairs);
    std::set<std::string> clean_pairs;
    for (const auto& rec : records)
        if (rec.classification == Classification::clean)
            clean_pairs.insert(rec.source_id + "/" + rec.victim_id);
    const double rate = aggregate(records).overall.rate();

    EvalSettings skip_settings;
    skip_settings.skip_source_write = true;
    Evaluator baseline = make_evaluator(corpus, nullptr, skip_settings);
    const double baseline_rate = aggregate(baseline.run_pairs(pairs)).overall.rate();

    const double elapsed = seconds_since(start);
    const bool ok =
        rate == 1.0 && clean_pairs.empty() && baseline_rate == 0.0 && elapsed < 5.0;
    report("oracle raw-state rates", ok,
           "rate=" + fmt(rate) + " on " + std::to_string(pairs.size()) +
               " pairs, rate=" + fmt(baseline_rate) + " with the source write skipped, " +
               fmt(elapsed) + "s");
}

void text_borne_elimination(std::shared_ptr<const Corpus> corpus) {
    Evaluator rules = make_evaluator(corpus, std::make_shared<RuleSanitizer>());
    const auto records = rules.run_pairs(enumerate_pairs(*corpus, 7));
    int text_borne = 0, not_clean = 0;
    for (const auto& rec : records) {
        if (rec.code_borne) continue;
        ++text_borne;
        if (rec.classification != Classification::clean) ++not_clean;
    }
    report("text-borne sanitizer elimination", text_borne > 0 && not_clean == 0,
           std::to_string(text_borne) + " non-code-borne trials, " + std::to_string(not_clean) +
               " still contaminated");
}

void code_borne_residual(std::shared_ptr<const Corpus> corpus) {
    Evaluator rules = make_evaluator(corpus, std::make_shared<RuleSanitizer>());
    const auto records = rules.run_pairs(enumerate_pairs(*corpus, 7));
    int code_borne = 0, not_wrong = 0;
    for (const auto& rec : records) {
        if (!rec.code_borne) continue;
        ++code_borne;
        if (rec.classification != Classification::wrong_answer) ++not_wrong;
    }
    report("code-borne residual risk", code_borne > 0 && not_wrong == 0,
           std::to_string(code_borne) + " code-borne trials, " + std::to_string(not_wrong) +
               " not classified wrong_answer");
}

void abstention_identity(std::shared_ptr<const Corpus> corpus) {
    auto abstain = std::make_shared<AbstainSanitizer>();
    Evaluator evaluator = make_evaluator(corpus, abstain);

    bool identical = true;
    for (const auto& convention : corpus->conventions) {
        const SharedState base = evaluator.build_base_state(convention.dataset);
        const SharedState after = evaluator.build_contaminated_state(base, convention);
        if (serialize_state(after) != serialize_state(base)) identical = false;
    }

    const auto records = evaluator.run_pairs(enumerate_pairs(*corpus, 7));
    int contaminated = 0;
    for (const auto& rec : records)
        if (rec.classification != Classification::clean) ++contaminated;

    report("abstention identity", identical && contaminated == 0,
           std::string(identical ? "S+ byte-identical to S for all 34 conventions"
                                 : "serialization drift detected") +
               ", " + std::to_string(contaminated) + " contaminated trials");
}

void normalization_suite() {
    struct Case {
        const char* a;
        const char* b;
        bool match;
    };
    const Case cases[] = {
        {"1.50", "1.5", true},        {"TRUE", "true", true},
        {"Yes", "true", true},        {"Chloride, Creatinine", "creatinine, chloride", true},
        {"a, B, c", "C,b,a", true},   {"1.50, 2", "2, 1.5", true},
        {"nonzero", "1", false},      {"26", "-1", false},
        {"no", "yes", false},         {"2104-12-11", "2104-12-11 09:30:00", false},
    };
    int bad = 0;
    for (const auto& c : cases)
        if (answers_match(c.a, c.b) != c.match) ++bad;
    report("answer normalization suite", bad == 0,
           std::to_string(std::size(cases)) + " cases, " + std::to_string(bad) + " mismatches");
}

void retrieval_properties() {
    const auto start = std::chrono::steady_clock::now();
    HashingEmbedder embedder(96);
    std::mt19937 rng(2024);
    const char* words[] = {"count", "visits", "hospital", "cost",    "drug", "intake",
                           "method", "patient", "lab",      "test",   "rank", "channel",
                           "report", "summary", "average",  "glucose"};

    bool ok = true;
    std::string why = "1000 randomized banks";

    for (int round = 0; round < 1000 && ok; ++round) {
        SharedState bank{Mechanism::memory_bank, {}};
        const int n = 2 + static_cast<int>(rng() % 7);
        for (int i = 0; i < n; ++i) {
            std::string q;
            const int len = 1 + static_cast<int>(rng() % 6);
            for (int w = 0; w < len; ++w) {
                if (w) q += ' ';
                q += words[rng() % 16];
            }
            Interaction inter{UserId("u"), q, "", {}, i + 1};
            bank = write(bank, inter, {MemoryEntry{q, "k", "s"}});
        }
        std::string query = words[rng() % 16];
        query += ' ';
        query += words[rng() % 16];
        const Embedding q = embed(query, embedder);

        const int k = 1 + static_cast<int>(rng() % n);
        const auto hits = top_k(q, bank, k, embedder);
        const auto hits2 = top_k(q, bank, k, embedder);
        const auto wider = top_k(q, bank, k + 1, embedder);

        if (hits.size() != std::min<std::size_t>(k, n)) { ok = false; why = "size"; }
        for (std::size_t i = 0; ok && i < hits.size(); ++i) {
            if (hits[i].score < -1.0 || hits[i].score > 1.0) { ok = false; why = "bounds"; }
            if (hits[i].fragment_seq != hits2[i].fragment_seq || hits[i].score != hits2[i].score) {
                ok = false;
                why = "tie-break determinism";
            }
            if (hits[i].fragment_seq != wider[i].fragment_seq) { ok = false; why = "prefix"; }
            if (i > 0 && hits[i - 1].score == hits[i].score &&
                hits[i - 1].fragment_seq > hits[i].fragment_seq) {
                ok = false;
                why = "tie order";
            }
        }
    }

    // cosine laws on random vectors
    std::normal_distribution<double> normal;
    for (int i = 0; i < 200 && ok; ++i) {
        Eigen::VectorXd a(24), b(24);
        for (int j = 0; j < 24; ++j) {
            a[j] = normal(rng);
            b[j] = normal(rng);
        }
        if (a.norm() == 0.0 || b.norm() == 0.0) continue;
        const double ab = cosine(Embedding{a}, Embedding{b});
        const double ba = cosine(Embedding{b}, Embedding{a});
        if (std::abs(ab - ba) > 1e-12) { ok = false; why = "symmetry"; }
        if (ab < -1.0 || ab > 1.0) { ok = false; why = "bounds"; }
        if (std::abs(cosine(Embedding{a}, Embedding{a}) - 1.0) > 1e-9) {
            ok = false;
            why = "self-similarity";
        }
    }

    const double elapsed = seconds_since(start);
    if (elapsed >= 10.0) { ok = false; why = "runtime"; }
    report("retrieval properties", ok, why + ", " + fmt(elapsed) + "s");
}

void protocol_attribution(std::shared_ptr<const Corpus> corpus) {
    Evaluator evaluator = make_evaluator(corpus, nullptr);
    const auto pairs = enumerate_pairs(*corpus, 7);
    std::mt19937 rng(555);

    int checked = 0, broken = 0;
    for (int i = 0; i < 100; ++i) {
        const PairSpec& spec = pairs[rng() % pairs.size()];
        const SourceConvention* convention = corpus->find_convention(spec.source_id);
        const VictimTask* victim = corpus->find_victim(spec.victim_id);

        for (int trial = 0; trial < 3; ++trial) {
            const SharedState base = evaluator.build_base_state(victim->dataset);
            const SharedState contaminated = evaluator.build_contaminated_state(base, *convention);

            SharedState stripped{base.mechanism, {}};
            for (const auto& tagged : contaminated.fragments)
                if (tagged.provenance.instance_id != convention->id)
                    stripped.fragments.push_back(tagged);

            const AgentResult clean =
                evaluator.run_task(victim->question, evaluator.read_view(base, victim->question));
            const AgentResult restored = evaluator.run_task(
                victim->question, evaluator.read_view(stripped, victim->question));
            ++checked;
            if (!(clean == restored)) ++broken;
        }
    }
    report("protocol attribution", broken == 0,
           std::to_string(checked) + " stripped re-runs, " + std::to_string(broken) +
               " diverged from the clean run");
}

void corpus_conformance(std::shared_ptr<const Corpus> corpus) {
    auto count_dataset = [&](Dataset d) {
        int n = 0;
        for (const auto& c : corpus->conventions)
            if (c.dataset == d) ++n;
        return n;
    };
    auto count_type = [&](ContaminationType t) {
        int n = 0;
        for (const auto& c : corpus->conventions)
            if (c.type == t) ++n;
        return n;
    };
    const bool counts_ok = corpus->conventions.size() == 34 && count_dataset(Dataset::mimic3) == 11 &&
                           count_dataset(Dataset::eicu) == 14 && count_dataset(Dataset::slack) == 9 &&
                           count_type(ContaminationType::SC) == 9 &&
                           count_type(ContaminationType::TC) == 15 &&
                           count_type(ContaminationType::PC) == 10;
    const ValidationReport validation = validate_corpus(*corpus);
    for (const auto& v : validation.violations) std::cout << "    violation: " << v << "\n";
    report("corpus conformance", counts_ok && validation.ok(),
           "34 conventions (11/14/9 by dataset, 9/15/10 by type), " +
               std::to_string(validation.violations.size()) + " validator violations");
}

// deterministic stand-in for the chat endpoint: answers task prompts with the
// victim's ground truth and judge prompts with "no"
class ScriptedModelTransport final : public HttpTransport {
public:
    explicit ScriptedModelTransport(std::shared_ptr<const Corpus> corpus)
        : corpus_(std::move(corpus)) {}

    HttpResponse post(const std::string&, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>&) override {
        const auto request = nlohmann::json::parse(body);
        const std::string prompt = request["messages"].back()["content"].get<std::string>();
        std::string content = "unknown";
        if (prompt.rfind("You are judging", 0) == 0) {
            content = "no";
        } else {
            const auto task_pos = prompt.find("[task]\n");
            if (task_pos != std::string::npos) {
                const auto begin = task_pos + 7;
                const auto end = prompt.find('\n', begin);
                const VictimTask* victim =
                    corpus_->find_victim_by_question(prompt.substr(begin, end - begin));
                if (victim != nullptr) content = victim->ground_truth;
            }
        }
        nlohmann::json res;
        res["choices"] = {{{"message", {{"content", content}}}}};
        return HttpResponse{200, res.dump()};
    }

private:
    std::shared_ptr<const Corpus> corpus_;
};

class FailOnUseTransport final : public HttpTransport {
public:
    explicit FailOnUseTransport(int& uses) : uses_(uses) {}
    HttpResponse post(const std::string&, const std::string&,
                      const std::vector<std::pair<std::string, std::string>>&) override {
        ++uses_;
        throw TransportError("network touched in replay mode");
    }

private:
    int& uses_;
};

void replay_hermeticity(std::shared_ptr<const Corpus> corpus) {
    setenv("UCC_API_KEY", "acceptance-key", 1);
    const fs::path cache = fs::temp_directory_path() / "ucc-acceptance-cache";
    fs::remove_all(cache);

    RunConfig config;
    config.corpus_path = kCorpusPath;
    config.assets_dir = kRepo + "/assets";
    config.agent = AgentKind::live;
    config.endpoint = "http://scripted-stub";
    config.cache_dir = cache.string();
    config.model = "stub-model";

    // record once against the deterministic stand-in model
    config.client_mode = ClientMode::record;
    run_experiment(config, std::make_unique<ScriptedModelTransport>(corpus));

    // replay twice against a transport that fails on any use
    config.client_mode = ClientMode::replay;
    int uses = 0;
    const RunResult first = run_experiment(config, std::make_unique<FailOnUseTransport>(uses));
    const RunResult second = run_experiment(config, std::make_unique<FailOnUseTransport>(uses));

    const bool stable = records_to_jsonl(first.records) == records_to_jsonl(second.records) &&
                        metrics_to_json(first.report, config) == metrics_to_json(second.report, config);
    report("replay hermeticity", uses == 0 && stable,
           std::to_string(uses) + " network calls across two full replay runs, outputs byte-stable");
    fs::remove_all(cache);
}

} // namespace

int main() {
    std::cout << "acceptance suite (scripted oracle, shipped corpus)\n";
    try {
        auto corpus = std::make_shared<const Corpus>(load_corpus(kCorpusPath));

        oracle_raw_rates(corpus);
        text_borne_elimination(corpus);
        code_borne_residual(corpus);
        abstention_identity(corpus);
        normalization_suite();
        retrieval_properties();
        protocol_attribution(corpus);
        corpus_conformance(corpus);
        replay_hermeticity(corpus);
        skip("recorded-model rate reproduction",
             "needs a recorded gpt-4o response cache (or live credentials); run `ucc run "
             "--agent live --client replay --cache <dir>` with a distributed cache");
    } catch (const std::exception& e) {
        std::cout << "[FAIL] suite aborted — " << e.what() << "\n";
        ++failures;
    }

    std::cout << "result: " << passes << " passed, " << failures << " failed, 1 skipped\n";
    return failures == 0 ? 0 : 1;
}
