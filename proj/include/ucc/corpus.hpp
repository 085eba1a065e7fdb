#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ucc/retrieval.hpp"
#include "ucc/state.hpp"

namespace ucc {

enum class Dataset { mimic3, eicu, slack };
enum class ContaminationType { SC, TC, PC };

const char* dataset_name(Dataset d);
const char* type_name(ContaminationType t);
Dataset dataset_from_name(const std::string& name);
ContaminationType type_from_name(const std::string& name);

/// Each dataset runs one shared-state mechanism: the EHR datasets share a
/// memory bank, the Slack dataset shares a conversational context.
Mechanism mechanism_of(Dataset d);

/// A benign, locally valid convention introduced by a source interaction.
/// Memory-mechanism conventions carry a query/knowledge/solution record;
/// context-mechanism conventions carry a 4-turn dialogue plus the
/// instruction template it introduces.
struct SourceConvention {
    std::string id;
    Dataset dataset = Dataset::mimic3;
    ContaminationType type = ContaminationType::SC;
    std::string origin; // "published" or "authored"
    bool code_borne = false; // convention survives in the stored solution code

    // memory-bank payload
    std::string query_text;
    std::string knowledge;
    std::string solution;

    // shared-context payload
    std::string instruction_template;
    std::vector<ContextMessage> dialogue;
};

/// A later task harmed when a convention is reused outside its scope.
/// susceptibilities maps convention id -> altered answer; a disengaged value
/// (nullopt) means the contaminated run produces no answer at all.
struct VictimTask {
    std::string id;
    Dataset dataset = Dataset::mimic3;
    std::string origin;
    std::string question;
    std::string ground_truth;
    std::map<std::string, std::optional<std::string>> susceptibilities;
};

struct CorpusManifest {
    int total = 0;
    std::map<Dataset, int> per_dataset;
    std::map<ContaminationType, int> per_type;
    std::map<Dataset, int> pairs_per_dataset; // fixed once victims are authored
};

/// One source-victim evaluation pair.
struct PairSpec {
    std::string source_id;
    std::string victim_id;
    int trials = 3;
};

struct Corpus {
    int version = 0;
    CorpusManifest manifest;
    std::map<Dataset, std::vector<StateFragment>> seeds;
    std::vector<SourceConvention> conventions;
    std::vector<VictimTask> victims;

    const SourceConvention* find_convention(const std::string& id) const;
    const VictimTask* find_victim(const std::string& id) const;
    const VictimTask* find_victim_by_question(const std::string& question) const;
};

/// Load and cross-reference a corpus file. Throws SchemaError (with record
/// location) on malformed records or manifest/count mismatch, ReferenceError
/// on dangling or cross-dataset susceptibility references.
Corpus load_corpus(const std::string& path);

/// For each convention, up to three susceptible victims sampled with the
/// given seed; deterministic for a fixed seed, stable ordering.
std::vector<PairSpec> enumerate_pairs(const Corpus& corpus, std::uint64_t seed,
                                      int trials = 3);

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Check the corpus against the scripted oracle: every victim's clean run
/// matches ground truth, every susceptibility is observable (altered answer
/// differs from ground truth under normalization), code-borne conventions
/// carry concrete altered answers, and every memory-mechanism source entry is
/// actually retrieved into the contaminated view.
ValidationReport validate_corpus(const Corpus& corpus, const RetrievalConfig& config = {});

} // namespace ucc
