#include "ucc/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace ucc {

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string entry_text(const MemoryEntry& e, bool question_only) {
    if (question_only) return e.question;
    return e.question + "\n" + e.knowledge + "\n" + e.solution;
}

} // namespace

HashingEmbedder::HashingEmbedder(int dim) : dim_(dim) {
    if (dim <= 0) throw InvalidArgument("embedding dimension must be positive");
}

Embedding HashingEmbedder::embed_text(const std::string& text) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        v[static_cast<Eigen::Index>(fnv1a64(token) % static_cast<std::uint64_t>(dim_))] += 1.0;
        token.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c))
            token.push_back(static_cast<char>(std::tolower(c)));
        else
            flush();
    }
    flush();
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return Embedding{std::move(v)};
}

Embedding embed(const std::string& text, const Embedder& embedder) {
    if (text.empty()) throw InvalidArgument("embed: text must be non-empty");
    return embedder.embed_text(text);
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.values.size() != b.values.size())
        throw DimensionMismatch("cosine: dimensions " + std::to_string(a.values.size()) +
                                " vs " + std::to_string(b.values.size()));
    const double na = a.values.norm();
    const double nb = b.values.norm();
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine: zero vector");
    const double c = a.values.dot(b.values) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

std::vector<ScoredEntry> top_k(const Embedding& query, const SharedState& bank, int k,
                               const Embedder& embedder, bool question_only) {
    if (bank.mechanism != Mechanism::memory_bank)
        throw MechanismMismatch("top_k requires a memory_bank state");
    if (k < 1) throw InvalidArgument("top_k: k must be >= 1");

    std::vector<ScoredEntry> scored;
    scored.reserve(bank.fragments.size());
    for (std::size_t i = 0; i < bank.fragments.size(); ++i) {
        const auto& entry = std::get<MemoryEntry>(bank.fragments[i].fragment);
        const Embedding e = embed(entry_text(entry, question_only), embedder);
        scored.push_back(ScoredEntry{bank.fragments[i].provenance.seq, i, cosine(query, e)});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.fragment_seq != b.fragment_seq) return a.fragment_seq < b.fragment_seq;
        return a.fragment_index < b.fragment_index;
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    return scored;
}

StateView make_view(const SharedState& state, const std::string& query,
                    const Embedder* embedder, const RetrievalConfig& config) {
    StateView view;
    view.mechanism = state.mechanism;
    if (state.mechanism == Mechanism::shared_context) {
        view.visible = state.fragments;
        return view;
    }
    if (embedder == nullptr)
        throw InvalidArgument("make_view: memory_bank read requires an embedder");
    if (state.fragments.empty()) return view;
    const Embedding q = embed(query, *embedder);
    for (const auto& hit : top_k(q, state, config.k, *embedder, config.question_only))
        view.visible.push_back(state.fragments[hit.fragment_index]);
    return view;
}

} // namespace ucc
