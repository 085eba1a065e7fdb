#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ucc/agent.hpp"
#include "ucc/corpus.hpp"
#include "ucc/sanitizer.hpp"

namespace ucc {

enum class Classification { clean, wrong_answer, no_answer };

const char* classification_name(Classification c);

/// Relaxed exact-match normalization: boolean coercion ("true"/"yes"),
/// numeric coercion with trailing-zero stripping ("1.50" -> 1.5), and
/// case/order-insensitive comparison of comma- or newline-separated lists.
/// Non-coercible text compares as a trimmed, case-folded string.
/// Returns a canonical form; two answers match iff their forms are equal.
std::string normalize_answer(const std::string& raw);

bool answers_match(const std::string& a, const std::string& b);

/// Classify one paired trial. Precondition (checked by the caller as the
/// pre-filter): the clean output matches ground truth. Absent contaminated
/// output is a visible no-answer failure; present-but-mismatching output is a
/// silent wrong answer.
Classification classify(const AgentResult& clean, const AgentResult& contaminated,
                        const std::string& truth);

enum class JudgeKind { scripted, llm };

/// Decides whether contaminated behavior reflects the source convention
/// (the shared-context analogue of answer matching).
class ContextJudge {
public:
    virtual ~ContextJudge() = default;
    virtual bool reflects(const AgentResult& clean, const AgentResult& contaminated,
                          const SourceConvention& convention, const VictimTask& victim) const = 0;
};

/// Exact oracle: true iff the contaminated output equals the corpus-listed
/// convention-altered behavior for this victim.
class ScriptedJudge final : public ContextJudge {
public:
    bool reflects(const AgentResult& clean, const AgentResult& contaminated,
                  const SourceConvention& convention, const VictimTask& victim) const override;
};

/// LLM-as-a-judge: fills the shipped judge prompt and parses a strict yes/no
/// verdict. Anything else throws MalformedJudgeOutput; the caller excludes
/// the trial as indeterminate.
class LlmJudge final : public ContextJudge {
public:
    LlmJudge(CompletionFn complete, std::string model, std::string prompt_template);
    bool reflects(const AgentResult& clean, const AgentResult& contaminated,
                  const SourceConvention& convention, const VictimTask& victim) const override;

private:
    CompletionFn complete_;
    std::string model_;
    std::string prompt_template_;
};

bool judge_context(const AgentResult& clean, const AgentResult& contaminated,
                   const SourceConvention& convention, const VictimTask& victim,
                   const ContextJudge& judge);

/// Per-trial record of one paired comparison. classification is absent when
/// the judge verdict was indeterminate (excluded from rate denominators).
struct TrialOutcome {
    AgentResult clean;
    AgentResult contaminated;
    std::optional<Classification> classification;
    int trial_index = 0;
};

/// Flat record for aggregation and the run log.
struct TrialRecord {
    Dataset dataset = Dataset::mimic3;
    ContaminationType type = ContaminationType::SC;
    Mechanism mechanism = Mechanism::memory_bank;
    std::string source_id;
    std::string victim_id;
    int trial_index = 0;
    std::optional<Classification> classification;
    std::optional<std::string> clean_output;
    std::optional<std::string> contaminated_output;
    bool code_borne = false;
};

/// How the clean run is admitted. Memory-mechanism answers always use exact
/// normalized matching; scripted shared-context runs do too. Live
/// shared-context runs have no exact behavior strings, so the judge checks
/// that the clean behavior does not already reflect the convention.
enum class ContextPrefilter { exact, judge };

struct EvalSettings {
    int trials = 3;
    RetrievalConfig retrieval;
    bool skip_source_write = false; // attribution baseline: S+ stays equal to S
    ContextPrefilter context_prefilter = ContextPrefilter::exact;
};

/// Runs the controlled clean-vs-contaminated comparison: per trial it builds
/// the base state from the dataset seeds, derives the contaminated state by
/// writing the source interaction (through the sanitizer when one is set),
/// runs the victim under both views with identical settings, and classifies.
/// State is rebuilt from scratch every trial (memory reset between trials).
class Evaluator {
public:
    Evaluator(std::shared_ptr<const Corpus> corpus, std::shared_ptr<const AgentBackend> agent,
              std::shared_ptr<const Embedder> embedder, EvalSettings settings,
              std::shared_ptr<const Sanitizer> sanitizer = nullptr,
              std::shared_ptr<const ContextJudge> judge = nullptr);

    /// Throws PrefilterViolation if any clean run fails to match ground truth.
    std::vector<TrialOutcome> run_pair(const PairSpec& spec) const;

    /// Evaluate pairs (optionally across threads); records are merged in a
    /// deterministic order (dataset, source, victim, trial) regardless of
    /// scheduling.
    std::vector<TrialRecord> run_pairs(const std::vector<PairSpec>& pairs, int jobs = 1) const;

    // building blocks, exposed for tests and the dump command
    SharedState build_base_state(Dataset dataset) const;
    SharedState build_contaminated_state(const SharedState& base,
                                         const SourceConvention& convention) const;
    StateView read_view(const SharedState& state, const std::string& query) const;
    AgentResult run_task(const std::string& question, const StateView& view) const;

    const Corpus& corpus() const { return *corpus_; }

private:
    TrialOutcome run_trial(const SourceConvention& convention, const VictimTask& victim,
                           int trial_index) const;

    std::shared_ptr<const Corpus> corpus_;
    std::shared_ptr<const AgentBackend> agent_;
    std::shared_ptr<const Embedder> embedder_;
    EvalSettings settings_;
    std::shared_ptr<const Sanitizer> sanitizer_; // null = raw write path
    std::shared_ptr<const ContextJudge> judge_;
};

struct MetricsCell {
    int pairs = 0;
    int trials = 0;
    int wrong_answer = 0;
    int no_answer = 0;
    int indeterminate = 0;

    int contaminated() const { return wrong_answer + no_answer; }
    int determinate() const { return trials - indeterminate; }
    double rate() const { return determinate() == 0 ? 0.0 : double(contaminated()) / determinate(); }
    double wrong_share() const { return determinate() == 0 ? 0.0 : double(wrong_answer) / determinate(); }
    double no_answer_share() const { return determinate() == 0 ? 0.0 : double(no_answer) / determinate(); }
};

/// Contamination rate = (wrong answers + no answers) / determinate trials,
/// per (dataset, type) cell, per dataset, and overall; plus the failure-mode
/// decomposition. Throws EmptyRun on an empty record set.
struct MetricsReport {
    std::map<std::pair<Dataset, ContaminationType>, MetricsCell> cells;
    std::map<Dataset, MetricsCell> per_dataset;
    MetricsCell overall;
};

MetricsReport aggregate(const std::vector<TrialRecord>& records);

} // namespace ucc
