#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace screenorder {

struct Message {
    std::string role;
    std::string content;
    /// Optional base64 PNG sent as an opaque image attachment.
    std::optional<std::string> image_png_base64;

    bool operator==(const Message&) const = default;
};

/// Prompt text with "{Example 1}".."{Example k}", "{Observation}" and
/// "{Objective}" slots, each present exactly once.
class PromptTemplate {
public:
    /// Throws Error{MissingPlaceholder} when a slot is missing or repeated,
    /// or the example slots are not numbered 1..k.
    static PromptTemplate parse(std::string text);
    static PromptTemplate default_template();

    const std::string& text() const { return text_; }
    int example_slots() const { return example_slots_; }

private:
    std::string text_;
    int example_slots_ = 0;
};

struct FewShotExample {
    std::string observation;
    std::string objective;
    std::string response;
};

std::string render_example(const FewShotExample& example);

/// Examples inlined into one prompt, or sent as separate message pairs.
enum class Packaging { SingleMessage, MessagePerExample };

/// Whitespace + punctuation token estimate: each punctuation character is
/// one token, each alphanumeric run costs ceil(length / chars_per_token).
struct TokenEstimator {
    double chars_per_token = 4;

    std::size_t estimate(std::string_view text) const;
    std::size_t estimate(std::span<const Message> messages) const;
};

struct BuiltPrompt {
    std::vector<Message> messages;
    std::size_t estimated_tokens = 0;
    std::size_t dropped_static_lines = 0;
};

/// Fills the template. When `token_limit` is set and the prompt is over
/// budget, trailing "[] ..." static-text observation lines are dropped from
/// the end until it fits; Error{TokenBudgetExceeded} if it still does not.
BuiltPrompt build_prompt(const PromptTemplate& prompt_template, std::span<const FewShotExample> examples,
                         std::string_view objective, std::string_view observation, Packaging packaging,
                         std::optional<std::size_t> token_limit = std::nullopt, TokenEstimator estimator = {});

struct LmSettings {
    std::string model = "gpt-4-vision-preview";
    double temperature = 1.0;
    double top_p = 0.9;
    std::size_t input_token_limit = 3840;
    std::chrono::milliseconds request_timeout{60000};
    int max_concurrent_requests = 4;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};

    /// Throws Error{Config}.
    void validate() const;
};

/// Backbone presets: "gpt-4v", "gemini-1.5", "llama3".
LmSettings settings_for_backbone(std::string_view backbone);

class LmBackend {
public:
    virtual ~LmBackend() = default;
    virtual std::string complete(const std::vector<Message>& prompt, const LmSettings& settings) = 0;
};

/// Returns canned replies in order; the last reply repeats once exhausted.
class ScriptedBackend final : public LmBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> replies);

    std::string complete(const std::vector<Message>& prompt, const LmSettings& settings) override;
    std::size_t calls() const;
    std::vector<std::vector<Message>> received() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> replies_;
    std::vector<std::vector<Message>> received_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// Throws Error{Timeout} when the request times out and
    /// Error{BackendError} when no response was received.
    virtual HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                              std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib transport; supports http:// and https:// URLs.
std::unique_ptr<HttpTransport> make_http_transport();

/// Chat-completion client (role/content messages, temperature, top_p).
/// Retries 429, 5xx and timeouts with exponential backoff.
class ChatCompletionBackend final : public LmBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    ChatCompletionBackend(std::string endpoint, std::string api_key, std::unique_ptr<HttpTransport> transport,
                          int max_concurrent_requests = 4, Sleeper sleeper = {});

    std::string complete(const std::vector<Message>& prompt, const LmSettings& settings) override;

    /// Request body sent for `prompt`.
    static nlohmann::json request_body(const std::vector<Message>& prompt, const LmSettings& settings);

private:
    std::string endpoint_;
    std::string api_key_;
    std::unique_ptr<HttpTransport> transport_;
    std::counting_semaphore<1024> slots_;
    Sleeper sleeper_;
    std::atomic<std::uint64_t> next_request_{1};
};

} // namespace screenorder
