#include "ucc/sanitizer.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>

#include <json.hpp>

namespace ucc {

SanitizerMode sanitizer_mode_from_name(const std::string& name) {
    if (name == "off") return SanitizerMode::off;
    if (name == "rules") return SanitizerMode::rules;
    if (name == "llm") return SanitizerMode::llm;
    throw ConfigError("unknown sanitizer mode '" + name + "'");
}

const char* sanitizer_mode_name(SanitizerMode m) {
    switch (m) {
        case SanitizerMode::off: return "off";
        case SanitizerMode::rules: return "rules";
        case SanitizerMode::llm: return "llm";
    }
    return "off";
}

namespace {

const char* kCuePhrases[] = {"for documentation", "for dashboard", "for billing", "for handoff"};

std::string to_lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string drop_parentheticals(const std::string& text) {
    std::string out;
    int depth = 0;
    for (char c : text) {
        if (c == '(') {
            ++depth;
        } else if (c == ')') {
            if (depth > 0) --depth;
        } else if (depth == 0) {
            out.push_back(c);
        }
    }
    return out;
}

std::string tidy_whitespace(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            // no space before closing punctuation
            if (c != '.' && c != '?' && c != '!' && c != ',' && c != ';' && c != ':')
                out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

// a '.' between digits is a decimal point, not a sentence boundary
bool is_sentence_end(const std::string& text, std::size_t i) {
    const char c = text[i];
    if (c == '?' || c == '!') return true;
    if (c != '.') return false;
    const bool digit_before = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
    const bool digit_after =
        i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
    return !(digit_before && digit_after);
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        current.push_back(text[i]);
        if (is_sentence_end(text, i)) {
            // swallow a run of terminators ("?!", "...")
            while (i + 1 < text.size() &&
                   (text[i + 1] == '.' || text[i + 1] == '?' || text[i + 1] == '!')) {
                current.push_back(text[++i]);
            }
            const std::string t = trim(current);
            if (!t.empty()) out.push_back(t);
            current.clear();
        }
    }
    const std::string t = trim(current);
    if (!t.empty()) out.push_back(t);
    return out;
}

bool is_scope_sentence(const std::string& sentence) {
    const std::string lower = to_lower(sentence);
    if (lower.rfind("for ", 0) == 0 || lower.rfind("please ", 0) == 0) return true;
    for (const char* cue : kCuePhrases)
        if (lower.find(cue) != std::string::npos) return true;
    return false;
}

void warn(const std::string& message) { std::cerr << "[ucc] warning: " << message << "\n"; }

} // namespace

std::string strip_scope_clauses(const std::string& text) {
    const std::string flat = tidy_whitespace(drop_parentheticals(text));
    std::string out;
    for (const std::string& sentence : split_sentences(flat)) {
        if (is_scope_sentence(sentence)) continue;
        if (!out.empty()) out.push_back(' ');
        out += sentence;
    }
    return out;
}

namespace {

// nullopt = fragment dropped
std::optional<StateFragment> sanitize_fragment_rules(const StateFragment& fragment) {
    if (std::holds_alternative<MemoryEntry>(fragment)) {
        const auto& e = std::get<MemoryEntry>(fragment);
        MemoryEntry clean;
        clean.question = strip_scope_clauses(e.question);
        clean.knowledge = strip_scope_clauses(e.knowledge);
        clean.solution = e.solution; // text-level sanitization never edits solution code
        if (clean.question.empty() || clean.knowledge.empty()) return std::nullopt;
        return StateFragment{std::move(clean)};
    }
    const auto& m = std::get<ContextMessage>(fragment);
    const std::string text = strip_scope_clauses(m.text);
    if (text.empty()) return std::nullopt; // message reduced to nothing is dropped
    return StateFragment{ContextMessage{m.role, text}};
}

} // namespace

SanitizeOutcome RuleSanitizer::sanitize_trace(const RawTrace& trace) const {
    if (trace.candidate_fragments.empty())
        throw InvalidArgument("RawTrace must carry candidate fragments");
    std::vector<StateFragment> kept;
    for (const auto& fragment : trace.candidate_fragments)
        if (auto clean = sanitize_fragment_rules(fragment)) kept.push_back(std::move(*clean));
    if (kept.empty()) return SanitizeOutcome::abstain();
    return SanitizeOutcome::sanitized(std::move(kept));
}

LlmSanitizer::LlmSanitizer(CompletionFn complete, std::string model, std::string memory_prompt,
                           std::string context_prompt)
    : complete_(std::move(complete)),
      model_(std::move(model)),
      memory_prompt_(std::move(memory_prompt)),
      context_prompt_(std::move(context_prompt)) {
    if (!complete_) throw InvalidArgument("LlmSanitizer requires a completion function");
}

StateFragment LlmSanitizer::parse_memory_response(const std::string& response) {
    const std::string body = trim(response);
    if (body.rfind("```", 0) == 0)
        throw MalformedSanitizerOutput("sanitizer emitted markdown fencing");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        throw MalformedSanitizerOutput("sanitizer response is not a JSON object: " + body);
    }
    if (!j.is_object() || j.size() != 3 || !j.contains("question") || !j.contains("knowledge") ||
        !j.contains("solution"))
        throw MalformedSanitizerOutput(
            "sanitizer response must carry exactly the keys question/knowledge/solution");
    for (const char* key : {"question", "knowledge", "solution"})
        if (!j[key].is_string())
            throw MalformedSanitizerOutput(std::string("sanitizer key '") + key +
                                           "' must be a string");
    return MemoryEntry{j["question"].get<std::string>(), j["knowledge"].get<std::string>(),
                       j["solution"].get<std::string>()};
}

SanitizeOutcome LlmSanitizer::sanitize_trace(const RawTrace& trace) const {
    if (trace.candidate_fragments.empty())
        throw InvalidArgument("RawTrace must carry candidate fragments");
    std::vector<StateFragment> kept;
    for (const auto& fragment : trace.candidate_fragments) {
        if (std::holds_alternative<MemoryEntry>(fragment)) {
            const auto& e = std::get<MemoryEntry>(fragment);
            nlohmann::ordered_json payload;
            payload["question"] = e.question;
            payload["knowledge"] = e.knowledge;
            payload["solution"] = e.solution;
            std::string response;
            try {
                response = complete_(
                    ChatRequest{model_, {{"system", memory_prompt_}, {"user", payload.dump(2)}}, 0.0});
            } catch (const Error& err) {
                warn(std::string("sanitizer request failed, abstaining: ") + err.what());
                return SanitizeOutcome::abstain();
            }
            if (trim(response) == "NONE") continue; // explicit abstention for this record
            StateFragment rewritten;
            try {
                rewritten = parse_memory_response(response);
            } catch (const MalformedSanitizerOutput& err) {
                warn(std::string(err.what()) + "; treating as abstention");
                return SanitizeOutcome::abstain();
            }
            // deterministic cue stripping on top of the model rewrite
            if (auto clean = sanitize_fragment_rules(rewritten)) kept.push_back(std::move(*clean));
        } else {
            const auto& m = std::get<ContextMessage>(fragment);
            std::string response;
            try {
                response = complete_(ChatRequest{
                    model_,
                    {{"system", context_prompt_},
                     {"user", std::string("[") + role_name(m.role) + "] " + m.text}},
                    0.0});
            } catch (const Error& err) {
                warn(std::string("sanitizer request failed, abstaining: ") + err.what());
                return SanitizeOutcome::abstain();
            }
            const std::string body = trim(response);
            if (body.empty() || body == "NONE") continue;
            const std::string text = strip_scope_clauses(body);
            if (text.empty()) continue;
            kept.push_back(StateFragment{ContextMessage{m.role, text}});
        }
    }
    if (kept.empty()) return SanitizeOutcome::abstain();
    return SanitizeOutcome::sanitized(std::move(kept));
}

SanitizeOutcome sanitize(const RawTrace& trace, const Sanitizer& backend) {
    return backend.sanitize_trace(trace);
}

SharedState write_sanitized(const SharedState& state, const RawTrace& trace,
                            const Sanitizer& backend, WriteMeta meta) {
    const SanitizeOutcome outcome = backend.sanitize_trace(trace);
    if (outcome.abstained) return state;
    meta.sanitized = true;
    return write(state, trace.interaction, outcome.fragments, meta);
}

} // namespace ucc
