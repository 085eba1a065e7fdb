#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ucc/state.hpp"

namespace ucc {

/// Dense text embedding. All embeddings in one index share a dimension.
struct Embedding {
    Eigen::VectorXd values;
};

enum class EmbedderKind { hashing, remote };

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual int dim() const = 0;
    virtual Embedding embed_text(const std::string& text) const = 0;
};

/// Deterministic desk-scale embedder: lowercase alphanumeric tokens, FNV-1a
/// bucketed into a fixed dimension, L2-normalized. Same text, same vector,
/// on every platform.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(int dim = 384);
    int dim() const override { return dim_; }
    Embedding embed_text(const std::string& text) const override;

private:
    int dim_;
};

/// Throws InvalidArgument on empty text; EmbedderUnavailable is surfaced by
/// remote embedders in offline mode.
Embedding embed(const std::string& text, const Embedder& embedder);

/// Cosine similarity in [-1, 1]. Throws DimensionMismatch or ZeroVector.
double cosine(const Embedding& a, const Embedding& b);

struct ScoredEntry {
    std::int64_t fragment_seq = 0; // provenance seq of the bank entry
    std::size_t fragment_index = 0; // position in the bank, oldest first
    double score = 0.0;
};

struct RetrievalConfig {
    int k = 4;
    int dim = 384;
    bool question_only = true; // score against MemoryEntry.question, not the whole triple
};

/// Top-k entries of a memory bank by cosine similarity to the query,
/// descending; ties broken by lower seq (older first). Returns min(k, size)
/// entries. Pure: repeat calls are bit-identical.
std::vector<ScoredEntry> top_k(const Embedding& query, const SharedState& bank, int k,
                               const Embedder& embedder, bool question_only = true);

/// The read path R: what the agent sees of the shared state for one query.
/// memory_bank states surface the top-k retrieved entries in rank order;
/// shared_context states surface the full transcript in order.
/// `embedder` may be null for shared_context states.
struct StateView;
StateView make_view(const SharedState& state, const std::string& query,
                    const Embedder* embedder, const RetrievalConfig& config);

struct StateView {
    Mechanism mechanism = Mechanism::memory_bank;
    std::vector<TaggedFragment> visible;
};

} // namespace ucc
