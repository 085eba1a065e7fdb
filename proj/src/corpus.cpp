#include "ucc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ucc {

using json = nlohmann::json;

const char* dataset_name(Dataset d) {
    switch (d) {
        case Dataset::mimic3: return "mimic3";
        case Dataset::eicu: return "eicu";
        case Dataset::slack: return "slack";
    }
    return "mimic3";
}

const char* type_name(ContaminationType t) {
    switch (t) {
        case ContaminationType::SC: return "SC";
        case ContaminationType::TC: return "TC";
        case ContaminationType::PC: return "PC";
    }
    return "SC";
}

Dataset dataset_from_name(const std::string& name) {
    if (name == "mimic3") return Dataset::mimic3;
    if (name == "eicu") return Dataset::eicu;
    if (name == "slack") return Dataset::slack;
    throw SchemaError("unknown dataset '" + name + "'");
}

ContaminationType type_from_name(const std::string& name) {
    if (name == "SC") return ContaminationType::SC;
    if (name == "TC") return ContaminationType::TC;
    if (name == "PC") return ContaminationType::PC;
    throw SchemaError("unknown contamination type '" + name + "'");
}

Mechanism mechanism_of(Dataset d) {
    return d == Dataset::slack ? Mechanism::shared_context : Mechanism::memory_bank;
}

const SourceConvention* Corpus::find_convention(const std::string& id) const {
    for (const auto& c : conventions)
        if (c.id == id) return &c;
    return nullptr;
}

const VictimTask* Corpus::find_victim(const std::string& id) const {
    for (const auto& v : victims)
        if (v.id == id) return &v;
    return nullptr;
}

const VictimTask* Corpus::find_victim_by_question(const std::string& question) const {
    for (const auto& v : victims)
        if (v.question == question) return &v;
    return nullptr;
}

namespace {

std::string require_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
        throw SchemaError(where + ": missing or empty string field '" + key + "'");
    return j[key].get<std::string>();
}

Role role_from_name(const std::string& name, const std::string& where) {
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    throw SchemaError(where + ": unknown role '" + name + "'");
}

SourceConvention parse_convention(const json& j, std::size_t index) {
    const std::string where = "conventions[" + std::to_string(index) + "]";
    SourceConvention c;
    c.id = require_string(j, "id", where);
    c.dataset = dataset_from_name(require_string(j, "dataset", where));
    c.type = type_from_name(require_string(j, "type", where));
    c.origin = require_string(j, "origin", where);
    if (!j.contains("code_borne") || !j["code_borne"].is_boolean())
        throw SchemaError(where + ": missing boolean field 'code_borne'");
    c.code_borne = j["code_borne"].get<bool>();

    if (mechanism_of(c.dataset) == Mechanism::memory_bank) {
        c.query_text = require_string(j, "query_text", where);
        c.knowledge = require_string(j, "knowledge", where);
        c.solution = require_string(j, "solution", where);
        if (j.contains("dialogue"))
            throw SchemaError(where + ": memory-mechanism convention must not carry a dialogue");
    } else {
        c.instruction_template = require_string(j, "instruction_template", where);
        if (!j.contains("dialogue") || !j["dialogue"].is_array() || j["dialogue"].size() != 4)
            throw SchemaError(where + ": context-mechanism convention requires a 4-turn dialogue");
        if (c.code_borne)
            throw SchemaError(where + ": context-mechanism conventions are never code_borne");
        std::size_t turn = 0;
        for (const auto& msg : j["dialogue"]) {
            const std::string mwhere = where + ".dialogue[" + std::to_string(turn++) + "]";
            c.dialogue.push_back(ContextMessage{role_from_name(require_string(msg, "role", mwhere), mwhere),
                                                require_string(msg, "text", mwhere)});
        }
    }
    return c;
}

VictimTask parse_victim(const json& j, std::size_t index) {
    const std::string where = "victims[" + std::to_string(index) + "]";
    VictimTask v;
    v.id = require_string(j, "id", where);
    v.dataset = dataset_from_name(require_string(j, "dataset", where));
    v.origin = require_string(j, "origin", where);
    v.question = require_string(j, "question", where);
    v.ground_truth = require_string(j, "ground_truth", where);
    if (!j.contains("susceptibilities") || !j["susceptibilities"].is_object() ||
        j["susceptibilities"].empty())
        throw SchemaError(where + ": missing non-empty object field 'susceptibilities'");
    for (const auto& [cid, altered] : j["susceptibilities"].items()) {
        if (altered.is_null())
            v.susceptibilities[cid] = std::nullopt; // contaminated run yields no answer
        else if (altered.is_string())
            v.susceptibilities[cid] = altered.get<std::string>();
        else
            throw SchemaError(where + ": susceptibility '" + cid + "' must be a string or null");
    }
    return v;
}

std::vector<StateFragment> parse_seeds(const json& j, Dataset dataset) {
    const std::string where = std::string("seeds.") + dataset_name(dataset);
    std::vector<StateFragment> out;
    std::size_t i = 0;
    for (const auto& rec : j) {
        const std::string swhere = where + "[" + std::to_string(i++) + "]";
        if (mechanism_of(dataset) == Mechanism::memory_bank) {
            out.push_back(MemoryEntry{require_string(rec, "question", swhere),
                                      require_string(rec, "knowledge", swhere),
                                      require_string(rec, "solution", swhere)});
        } else {
            out.push_back(ContextMessage{role_from_name(require_string(rec, "role", swhere), swhere),
                                         require_string(rec, "text", swhere)});
        }
    }
    return out;
}

} // namespace

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("corpus file not found: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw SchemaError("corpus parse error in " + path + ": " + e.what());
    }

    Corpus corpus;
    if (!root.contains("version") || !root["version"].is_number_integer())
        throw SchemaError("corpus: missing integer field 'version'");
    corpus.version = root["version"].get<int>();

    if (!root.contains("conventions") || !root["conventions"].is_array())
        throw SchemaError("corpus: missing array field 'conventions'");
    std::size_t index = 0;
    for (const auto& j : root["conventions"])
        corpus.conventions.push_back(parse_convention(j, index++));

    if (!root.contains("victims") || !root["victims"].is_array())
        throw SchemaError("corpus: missing array field 'victims'");
    index = 0;
    for (const auto& j : root["victims"])
        corpus.victims.push_back(parse_victim(j, index++));

    if (root.contains("seeds")) {
        for (const auto& [name, arr] : root["seeds"].items())
            corpus.seeds[dataset_from_name(name)] = parse_seeds(arr, dataset_from_name(name));
    }

    // duplicate ids / questions break the scripted oracle's lookups
    std::set<std::string> ids;
    for (const auto& c : corpus.conventions)
        if (!ids.insert(c.id).second)
            throw SchemaError("corpus: duplicate convention id '" + c.id + "'");
    ids.clear();
    std::set<std::string> questions;
    for (const auto& v : corpus.victims) {
        if (!ids.insert(v.id).second)
            throw SchemaError("corpus: duplicate victim id '" + v.id + "'");
        if (!questions.insert(v.question).second)
            throw SchemaError("corpus: duplicate victim question in '" + v.id + "'");
    }

    // cross-references: every susceptibility names an existing convention of
    // the same dataset
    for (const auto& v : corpus.victims) {
        for (const auto& [cid, altered] : v.susceptibilities) {
            const SourceConvention* c = corpus.find_convention(cid);
            if (c == nullptr)
                throw ReferenceError("victim '" + v.id + "' references unknown convention '" + cid + "'");
            if (c->dataset != v.dataset)
                throw ReferenceError("victim '" + v.id + "' references convention '" + cid +
                                     "' from a different dataset");
        }
    }

    // manifest must agree with the actual contents
    if (!root.contains("manifest"))
        throw SchemaError("corpus: missing 'manifest'");
    const auto& m = root["manifest"];
    corpus.manifest.total = m.value("total", -1);
    std::map<Dataset, int> per_dataset;
    std::map<ContaminationType, int> per_type;
    for (const auto& c : corpus.conventions) {
        per_dataset[c.dataset]++;
        per_type[c.type]++;
    }
    if (corpus.manifest.total != static_cast<int>(corpus.conventions.size()))
        throw SchemaError("corpus: manifest total " + std::to_string(corpus.manifest.total) +
                          " != convention count " + std::to_string(corpus.conventions.size()));
    if (!m.contains("datasets") || !m.contains("types"))
        throw SchemaError("corpus: manifest requires 'datasets' and 'types' counts");
    for (const auto& [name, count] : m["datasets"].items()) {
        corpus.manifest.per_dataset[dataset_from_name(name)] = count.get<int>();
        if (per_dataset[dataset_from_name(name)] != count.get<int>())
            throw SchemaError("corpus: manifest count for dataset '" + name + "' does not match contents");
    }
    for (const auto& [name, count] : m["types"].items()) {
        corpus.manifest.per_type[type_from_name(name)] = count.get<int>();
        if (per_type[type_from_name(name)] != count.get<int>())
            throw SchemaError("corpus: manifest count for type '" + name + "' does not match contents");
    }
    if (m.contains("pairs"))
        for (const auto& [name, count] : m["pairs"].items())
            corpus.manifest.pairs_per_dataset[dataset_from_name(name)] = count.get<int>();
    return corpus;
}

std::vector<PairSpec> enumerate_pairs(const Corpus& corpus, std::uint64_t seed, int trials) {
    std::mt19937_64 rng(seed);
    std::vector<PairSpec> pairs;
    for (const auto& convention : corpus.conventions) {
        std::vector<std::string> candidates;
        for (const auto& v : corpus.victims)
            if (v.susceptibilities.count(convention.id)) candidates.push_back(v.id);
        std::sort(candidates.begin(), candidates.end());
        // hand-rolled Fisher-Yates: std::shuffle is not bit-stable across
        // standard libraries, and sampling must be reproducible from the seed
        for (std::size_t i = candidates.size(); i > 1; --i)
            std::swap(candidates[i - 1], candidates[rng() % i]);
        const std::size_t take = std::min<std::size_t>(3, candidates.size());
        for (std::size_t i = 0; i < take; ++i)
            pairs.push_back(PairSpec{convention.id, candidates[i], trials});
    }
    std::sort(pairs.begin(), pairs.end(), [](const PairSpec& a, const PairSpec& b) {
        if (a.source_id != b.source_id) return a.source_id < b.source_id;
        return a.victim_id < b.victim_id;
    });
    return pairs;
}

} // namespace ucc
