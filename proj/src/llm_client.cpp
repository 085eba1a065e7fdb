#include "ucc/llm_client.hpp"

#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ucc/sha256.hpp"

namespace ucc {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

ClientMode client_mode_from_name(const std::string& name) {
    if (name == "live") return ClientMode::live;
    if (name == "record") return ClientMode::record;
    if (name == "replay") return ClientMode::replay;
    throw ConfigError("unknown client mode '" + name + "'");
}

const char* client_mode_name(ClientMode m) {
    switch (m) {
        case ClientMode::live: return "live";
        case ClientMode::record: return "record";
        case ClientMode::replay: return "replay";
    }
    return "replay";
}

namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// canonical serialization: fixed field order regardless of how the request
// was assembled, so keys are stable across processes and platforms
std::string canonical_chat_json(const ChatRequest& req) {
    json j;
    j["kind"] = "chat";
    j["model"] = req.model;
    j["temperature"] = format_double(req.temperature);
    json msgs = json::array();
    for (const auto& m : req.messages) {
        json jm;
        jm["role"] = m.role;
        jm["content"] = m.text;
        msgs.push_back(std::move(jm));
    }
    j["messages"] = std::move(msgs);
    return j.dump();
}

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(const std::string& endpoint) : client_(endpoint) {
        client_.set_connection_timeout(15);
        client_.set_read_timeout(120);
    }

    HttpResponse post(const std::string& path, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& headers) override {
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client_.Post(path, h, body, "application/json");
        if (!res) throw TransportError("connection failed: " + httplib::to_string(res.error()));
        return HttpResponse{res->status, res->body};
    }

private:
    httplib::Client client_;
};

} // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& endpoint) {
    if (endpoint.empty()) throw ConfigError("live/record mode requires an endpoint");
    return std::make_unique<HttplibTransport>(endpoint);
}

LlmClient::LlmClient(LlmClientConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

std::string LlmClient::cache_key(const ChatRequest& request) {
    return sha256_hex(canonical_chat_json(request));
}

std::string LlmClient::embedding_cache_key(const std::string& model, const std::string& text) {
    json j;
    j["kind"] = "embedding";
    j["model"] = model;
    j["input"] = text;
    return sha256_hex(j.dump());
}

std::string LlmClient::cached_response(const std::string& key) const {
    if (config_.cache_dir.empty()) throw ConfigError("record/replay mode requires a cache directory");
    const fs::path file = fs::path(config_.cache_dir) / (key + ".json");
    std::ifstream in(file);
    if (!in) throw CacheMiss("no cached response for key " + key);
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CacheMiss("unreadable cache entry " + file.string() + ": " + e.what());
    }
    if (!j.contains("response") || !j["response"].is_string())
        throw CacheMiss("cache entry " + file.string() + " has no response field");
    return j["response"].get<std::string>();
}

void LlmClient::store_response(const std::string& key, const std::string& request_json,
                               const std::string& response) {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    fs::create_directories(config_.cache_dir);
    const fs::path file = fs::path(config_.cache_dir) / (key + ".json");
    const fs::path tmp = fs::path(config_.cache_dir) / (key + ".tmp");
    {
        json j;
        j["key"] = key;
        j["request"] = json::parse(request_json);
        j["response"] = response;
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, file); // atomic publish: readers never see a partial entry
}

std::string LlmClient::post_with_retry(const std::string& path, const std::string& body) {
    if (transport_ == nullptr) {
        std::lock_guard<std::mutex> lock(transport_mutex_);
        if (transport_ == nullptr) transport_ = make_http_transport(config_.endpoint);
    }
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw CredentialMissing("environment variable " + config_.api_key_env + " is not set");

    {
        std::unique_lock<std::mutex> lock(inflight_mutex_);
        while (inflight_ >= config_.max_inflight) {
            lock.unlock();
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            lock.lock();
        }
        ++inflight_;
    }
    struct Release {
        LlmClient* c;
        ~Release() {
            std::lock_guard<std::mutex> lock(c->inflight_mutex_);
            --c->inflight_;
        }
    } release{this};

    const std::vector<std::pair<std::string, std::string>> headers = {
        {"Authorization", std::string("Bearer ") + key}};

    std::string last_error;
    for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
        try {
            HttpResponse res = transport_->post(path, body, headers);
            if (res.status == 200) return res.body;
            last_error = "status " + std::to_string(res.status);
            if (res.status < 500) break; // client error: retrying will not help
        } catch (const TransportError& e) {
            last_error = e.what();
        }
    }
    throw TransportError("request to " + path + " failed: " + last_error);
}

std::string LlmClient::complete(const ChatRequest& request, ClientMode mode) {
    if (request.messages.empty()) throw InvalidArgument("ChatRequest must carry messages");
    ++requests_;
    const std::string key = cache_key(request);

    if (mode == ClientMode::replay) return cached_response(key);
    if (mode == ClientMode::record) {
        try {
            return cached_response(key);
        } catch (const CacheMiss&) {
            // fall through to the network and persist the result
        }
    }

    json body;
    body["model"] = request.model;
    json msgs = json::array();
    for (const auto& m : request.messages) {
        json jm;
        jm["role"] = m.role;
        jm["content"] = m.text;
        msgs.push_back(std::move(jm));
    }
    body["messages"] = std::move(msgs);
    body["temperature"] = request.temperature;

    const std::string raw = post_with_retry(config_.chat_path, body.dump());
    std::string text;
    try {
        json parsed = json::parse(raw);
        text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed completion response: ") + e.what());
    }
    if (mode == ClientMode::record) store_response(key, canonical_chat_json(request), text);
    return text;
}

std::vector<double> LlmClient::embed_remote(const std::string& text, ClientMode mode) {
    if (text.empty()) throw InvalidArgument("embed_remote: text must be non-empty");
    ++requests_;
    const std::string key = embedding_cache_key(config_.model, text);

    auto decode = [](const std::string& payload) {
        json j = json::parse(payload);
        return j.get<std::vector<double>>();
    };

    if (mode == ClientMode::replay) {
        try {
            return decode(cached_response(key));
        } catch (const CacheMiss& e) {
            throw EmbedderUnavailable(std::string("remote embedder offline: ") + e.what());
        }
    }
    if (mode == ClientMode::record) {
        try {
            return decode(cached_response(key));
        } catch (const CacheMiss&) {
        }
    }

    json body;
    body["model"] = config_.model;
    body["input"] = text;
    const std::string raw = post_with_retry(config_.embeddings_path, body.dump());
    std::vector<double> values;
    try {
        json parsed = json::parse(raw);
        values = parsed.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed embedding response: ") + e.what());
    }
    if (mode == ClientMode::record) {
        json j;
        j["kind"] = "embedding";
        j["model"] = config_.model;
        j["input"] = text;
        store_response(key, j.dump(), json(values).dump());
    }
    return values;
}

CompletionFn make_completion_fn(std::shared_ptr<LlmClient> client, ClientMode mode) {
    return [client, mode](const ChatRequest& request) { return client->complete(request, mode); };
}

} // namespace ucc
