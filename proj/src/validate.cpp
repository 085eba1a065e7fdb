#include <map>
#include <memory>
#include <sstream>

#include "ucc/agent.hpp"
#include "ucc/corpus.hpp"
#include "ucc/protocol.hpp"

namespace ucc {

// Corpus-level sanity gate, run by CI and the `validate` subcommand before
// any corpus data is trusted: pre-filter, observability, code-borne answer
// shape, and retrieval closure for the memory mechanism.
ValidationReport validate_corpus(const Corpus& corpus, const RetrievalConfig& config) {
    ValidationReport report;
    auto flag = [&report](const std::string& message) { report.violations.push_back(message); };

    auto shared = std::make_shared<const Corpus>(corpus);
    EvalSettings settings;
    settings.retrieval = config;
    Evaluator evaluator(shared, std::make_shared<ScriptedAgent>(shared),
                        std::make_shared<HashingEmbedder>(config.dim), settings);

    // pre-filter: every victim's clean scripted run matches ground truth
    for (const auto& victim : corpus.victims) {
        const SharedState base = evaluator.build_base_state(victim.dataset);
        const AgentResult clean =
            evaluator.run_task(victim.question, evaluator.read_view(base, victim.question));
        if (!clean.output.has_value() || !answers_match(*clean.output, victim.ground_truth))
            flag("victim '" + victim.id + "': clean run '" + clean.output.value_or("<none>") +
                 "' does not match ground truth '" + victim.ground_truth + "'");
    }

    // pair counts are seed-independent (min(3, susceptible victims) per
    // convention), so the manifest can pin them
    if (!corpus.manifest.pairs_per_dataset.empty()) {
        std::map<Dataset, int> pair_counts;
        for (const auto& pair : enumerate_pairs(corpus, 0))
            pair_counts[corpus.find_convention(pair.source_id)->dataset]++;
        for (const auto& [dataset, expected] : corpus.manifest.pairs_per_dataset)
            if (pair_counts[dataset] != expected)
                flag(std::string("manifest pair count for ") + dataset_name(dataset) + " is " +
                     std::to_string(expected) + " but enumeration yields " +
                     std::to_string(pair_counts[dataset]));
    }

    for (const auto& victim : corpus.victims) {
        for (const auto& [cid, altered] : victim.susceptibilities) {
            const SourceConvention* convention = corpus.find_convention(cid);
            if (convention == nullptr) continue; // load_corpus already rejects these

            // observability: an altered answer equal to ground truth could
            // never register as contamination
            if (altered.has_value() && answers_match(*altered, victim.ground_truth))
                flag("victim '" + victim.id + "': altered answer for '" + cid +
                     "' equals ground truth and is unobservable");

            // code-borne conventions manifest through executed solution code,
            // which produces a concrete wrong result rather than silence
            if (convention->code_borne && !altered.has_value())
                flag("victim '" + victim.id + "': code_borne convention '" + cid +
                     "' must carry a concrete altered answer, not NO_ANSWER");

            // retrieval closure: the source entry must reach the victim's view
            if (mechanism_of(victim.dataset) == Mechanism::memory_bank) {
                const SharedState base = evaluator.build_base_state(victim.dataset);
                const SharedState contaminated =
                    evaluator.build_contaminated_state(base, *convention);
                const StateView view = evaluator.read_view(contaminated, victim.question);
                bool visible = false;
                for (const auto& tagged : view.visible)
                    if (tagged.provenance.instance_id == cid) visible = true;
                if (!visible)
                    flag("pair " + cid + "/" + victim.id +
                         ": source entry not retrieved into the top-" +
                         std::to_string(config.k) + " view");
            }
        }
    }
    return report;
}

} // namespace ucc
