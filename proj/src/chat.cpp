#include "xlsynth/chat.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "xlsynth/util.hpp"

namespace xlsynth {

std::string_view role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

Role role_from_name(std::string_view s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw std::invalid_argument("unknown chat role: " + std::string(s));
}

void ChatRequest::validate() const {
    if (messages.empty()) throw std::invalid_argument("chat request has no messages");
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw std::invalid_argument("temperature outside [0, 2]");
    if (max_tokens < 1) throw std::invalid_argument("max_tokens must be positive");
}

ChatRequest single_turn(std::string model_id, std::string prompt, double temperature) {
    ChatRequest r;
    r.model_id = std::move(model_id);
    r.messages.push_back({Role::User, std::move(prompt)});
    r.temperature = temperature;
    return r;
}

Json chat_request_to_json(const ChatRequest& r) {
    Json msgs = Json::array();
    for (const auto& m : r.messages) msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    return {{"model", r.model_id}, {"messages", msgs}, {"temperature", r.temperature}, {"max_tokens", r.max_tokens}};
}

ChatRequest chat_request_from_json(const Json& j) {
    ChatRequest r;
    r.model_id = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) {
        r.messages.push_back({role_from_name(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    r.temperature = j.value("temperature", 0.7);
    r.max_tokens = j.value("max_tokens", 2048);
    return r;
}

void SystemClock::sleep_for(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

Clock::time_point VirtualClock::now() {
    std::lock_guard lock(mu_);
    return t_;
}

void VirtualClock::sleep_for(std::chrono::milliseconds d) {
    std::lock_guard lock(mu_);
    t_ += d;
    slept_ += d;
}

std::chrono::milliseconds VirtualClock::slept() const {
    std::lock_guard lock(mu_);
    return slept_;
}

RateLimiter::RateLimiter(std::size_t requests_per_minute, std::shared_ptr<Clock> clock)
    : rpm_(requests_per_minute), clock_(std::move(clock)) {}

void RateLimiter::acquire() {
    std::lock_guard lock(mu_);
    constexpr auto window = std::chrono::seconds(60);
    while (true) {
        const auto now = clock_->now();
        while (!window_.empty() && now - window_.front() >= window) window_.pop_front();
        if (rpm_ == 0 || window_.size() < rpm_) {
            window_.push_back(now);
            grants_.push_back(now);
            return;
        }
        const auto wait = std::chrono::ceil<std::chrono::milliseconds>(window_.front() + window - now);
        clock_->sleep_for(std::max(wait, std::chrono::milliseconds(1)));
    }
}

std::vector<Clock::time_point> RateLimiter::grants() const {
    std::lock_guard lock(mu_);
    return grants_;
}

std::string parse_completion_body(const std::string& body) {
    Json j;
    try {
        j = Json::parse(body);
    } catch (const Json::parse_error&) {
        throw BadResponseShape("response body is not JSON");
    }
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw BadResponseShape("response has no choices");
    }
    const Json& c = j["choices"][0];
    if (!c.is_object() || !c.contains("message") || !c["message"].is_object() || !c["message"].contains("content") ||
        !c["message"]["content"].is_string()) {
        throw BadResponseShape("first choice has no message content");
    }
    return c["message"]["content"].get<std::string>();
}

HttpChatClient::HttpChatClient(HttpClientOptions opts, std::shared_ptr<Clock> clock)
    : opts_(std::move(opts)), clock_(std::move(clock)), limiter_(opts_.requests_per_minute, clock_) {
    const auto scheme = opts_.endpoint.find("://");
    if (scheme == std::string::npos) throw std::invalid_argument("endpoint must be an absolute URL: " + opts_.endpoint);
    const auto slash = opts_.endpoint.find('/', scheme + 3);
    base_ = opts_.endpoint.substr(0, slash);
    std::string prefix = slash == std::string::npos ? "" : opts_.endpoint.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    const std::string suffix = "/chat/completions";
    if (prefix.size() >= suffix.size() && prefix.compare(prefix.size() - suffix.size(), suffix.size(), suffix) == 0) {
        path_ = prefix;
    } else if (prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0) {
        path_ = prefix + suffix;
    } else {
        path_ = prefix + "/v1" + suffix;
    }
}

std::string HttpChatClient::chat(const ChatRequest& req) {
    req.validate();
    const std::string body = chat_request_to_json(req).dump();
    httplib::Client cli(base_);
    cli.set_connection_timeout(opts_.timeout);
    cli.set_read_timeout(opts_.timeout);
    cli.set_write_timeout(opts_.timeout);
    if (!opts_.api_key.empty()) cli.set_bearer_token_auth(opts_.api_key);

    std::string last_problem;
    bool last_was_429 = false;
    for (int attempt = 0;; ++attempt) {
        limiter_.acquire();
        auto res = cli.Post(path_, body, "application/json");
        if (res) {
            const int status = res->status;
            if (status == 200) return parse_completion_body(res->body);
            if (status == 401 || status == 403) throw CredentialError("teacher endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
            last_was_429 = status == 429;
            last_problem = "HTTP " + std::to_string(status);
            if (!(status == 429 || status >= 500)) throw TransportError("chat request failed: " + last_problem);
        } else {
            last_was_429 = false;
            last_problem = httplib::to_string(res.error());
        }
        if (attempt >= opts_.max_retries) break;
        ++retries_;
        auto backoff = opts_.base_backoff * (1LL << std::min(attempt, 20));
        clock_->sleep_for(std::min<std::chrono::milliseconds>(backoff, opts_.max_backoff));
    }
    if (last_was_429) throw RateLimitedExhausted("still rate limited after " + std::to_string(opts_.max_retries) + " retries");
    throw TransportError("chat request failed after retries: " + last_problem);
}

TranscriptLogger::TranscriptLogger(std::shared_ptr<ChatClient> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

std::string TranscriptLogger::chat(const ChatRequest& req) {
    std::string resp = inner_->chat(req);
    Json line = {{"req", chat_request_to_json(req)}, {"resp", resp}, {"ts", iso8601_now()}};
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
    return resp;
}

std::string request_key(const ChatRequest& req) { return sha256_hex(chat_request_to_json(req).dump()); }

ReplayChatClient::ReplayChatClient(const std::filesystem::path& transcripts) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(transcripts)) {
        for (const auto& e : std::filesystem::directory_iterator(transcripts)) {
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else if (std::filesystem::exists(transcripts)) {
        files.push_back(transcripts);
    } else {
        throw std::runtime_error("transcript path not found: " + transcripts.string());
    }
    for (const auto& f : files) {
        for (const auto& line : read_jsonl(f)) {
            entries_[request_key(chat_request_from_json(line.at("req")))].responses.push_back(line.at("resp").get<std::string>());
        }
    }
}

std::string ReplayChatClient::chat(const ChatRequest& req) {
    const std::string key = request_key(req);
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        ++misses_;
        throw TransportError("no recorded response for request " + key.substr(0, 12));
    }
    Entry& e = it->second;
    const std::size_t i = std::min(e.next, e.responses.size() - 1);
    if (e.next < e.responses.size()) ++e.next;
    return e.responses[i];
}

}  // namespace xlsynth
