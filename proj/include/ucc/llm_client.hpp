#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ucc/errors.hpp"

namespace ucc {

struct ChatMessage {
    std::string role;
    std::string text;
};

/// One chat-completion request. Temperature defaults to 0 and stays there for
/// reproducible runs.
struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

enum class ClientMode { live, record, replay };

ClientMode client_mode_from_name(const std::string& name);
const char* client_mode_name(ClientMode m);

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Injectable transport so tests can stub the network or prove it untouched.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// Default transport over cpp-httplib; constructed lazily, only in live/record
/// mode. `endpoint` is scheme://host[:port].
std::unique_ptr<HttpTransport> make_http_transport(const std::string& endpoint);

struct LlmClientConfig {
    std::string endpoint;                        // scheme://host[:port]
    std::string chat_path = "/v1/chat/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::string model = "gpt-4o";
    std::string cache_dir;                       // required for record/replay
    std::string api_key_env = "UCC_API_KEY";     // credential comes from the environment only
    int max_retries = 3;
    int backoff_ms = 100;
    int max_inflight = 4;
};

/// Chat-completion transport with deterministic record-replay caching.
/// Cache entries are content-addressed files keyed by a canonical digest of
/// (model, messages, temperature); replay mode never touches the network.
class LlmClient {
public:
    explicit LlmClient(LlmClientConfig config, std::unique_ptr<HttpTransport> transport = nullptr);

    /// Completion text for the request. Throws CacheMiss (replay),
    /// CredentialMissing, or TransportError after bounded retries.
    std::string complete(const ChatRequest& request, ClientMode mode);

    /// Embedding vector for the text, through the same cache machinery.
    /// Offline (replay) misses surface as EmbedderUnavailable.
    std::vector<double> embed_remote(const std::string& text, ClientMode mode);

    static std::string cache_key(const ChatRequest& request);
    static std::string embedding_cache_key(const std::string& model, const std::string& text);

    const LlmClientConfig& config() const { return config_; }

    /// Completions and embeddings served so far (cache hits included).
    long request_count() const { return requests_.load(); }

private:
    std::string cached_response(const std::string& key) const; // throws CacheMiss
    void store_response(const std::string& key, const std::string& request_json,
                        const std::string& response);
    std::string post_with_retry(const std::string& path, const std::string& body);

    LlmClientConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    std::atomic<long> requests_{0};
    std::mutex cache_mutex_;
    std::mutex transport_mutex_;
    int inflight_ = 0;
    std::mutex inflight_mutex_;
};

/// The shape most call sites need: fire one request, get text back.
using CompletionFn = std::function<std::string(const ChatRequest&)>;

CompletionFn make_completion_fn(std::shared_ptr<LlmClient> client, ClientMode mode);

} // namespace ucc
