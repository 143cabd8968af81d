#include "screenorder/prompting.hpp"

#include "screenorder/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>

namespace screenorder {

namespace {

constexpr std::string_view kDefaultTemplate = R"(You operate a computer on behalf of a user. Each turn you receive the user's goal, an optional screenshot and a listing of the elements on screen, and you reply with high-level actions that are later translated into pyautogui calls.

Inputs:
OBJECTIVE: the goal to accomplish.
Screenshot: when present, every interactable element is outlined and labelled with its numeric id; a box and its label share one colour.
OBSERVATION: one line per element in the form [id] [tag] [text]. Interactable elements carry an id, e.g. [7] [BUTTON] [Submit]. Lines of the form [] [StaticText] [text] are plain text and cannot be targeted.

Mouse actions:
click [id]
double_click [id]
right_click [id]
hover [id]

Keyboard actions:
type [content]
press [key]
hotkey [key1] [key2]

Rules:
- Only reference ids present in the current observation.
- Several actions may be given, one per line.
- Reason step by step before answering.
- End with the phrase "In summary, the next actions I will perform are" followed by the actions inside a ``` block and nothing else inside the block, e.g. ```click [7]
type [hello]
press [enter]```

Examples:

{Example 1}

{Example 2}

{Example 3}

End of examples. Answer for the observation below.

OBSERVATION:

{Observation}

OBJECTIVE: {Objective})";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t count = 0;
    for (std::size_t at = text.find(needle); at != std::string_view::npos; at = text.find(needle, at + 1)) {
        ++count;
    }
    return count;
}

void replace_once(std::string& text, std::string_view slot, std::string_view value) {
    const std::size_t at = text.find(slot);
    text.replace(at, slot.size(), value);
}

std::string example_slot(int i) {
    return "{Example " + std::to_string(i) + "}";
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

} // namespace

PromptTemplate PromptTemplate::parse(std::string text) {
    for (std::string_view slot : {"{Observation}", "{Objective}"}) {
        const std::size_t n = count_occurrences(text, slot);
        if (n != 1) {
            throw Error(ErrorKind::MissingPlaceholder, std::string(slot) + " must appear exactly once (found " +
                                                           std::to_string(n) + ")");
        }
    }
    static const std::regex kExample(R"(\{Example (\d+)\})");
    std::vector<int> numbers;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kExample); it != std::sregex_iterator(); ++it) {
        numbers.push_back(std::stoi((*it)[1].str()));
    }
    std::vector<int> sorted = numbers;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] != static_cast<int>(i) + 1) {
            throw Error(ErrorKind::MissingPlaceholder, "example slots must be {Example 1}..{Example k}, each once");
        }
    }
    PromptTemplate t;
    t.text_ = std::move(text);
    t.example_slots_ = static_cast<int>(sorted.size());
    return t;
}

PromptTemplate PromptTemplate::default_template() {
    return parse(std::string(kDefaultTemplate));
}

std::string render_example(const FewShotExample& example) {
    return "OBSERVATION:\n\n" + example.observation + "\n\nOBJECTIVE: " + example.objective + "\n\n" +
           example.response;
}

std::size_t TokenEstimator::estimate(std::string_view text) const {
    std::size_t tokens = 0;
    std::size_t run = 0;
    auto flush = [&] {
        tokens += static_cast<std::size_t>(std::ceil(static_cast<double>(run) / chars_per_token));
        run = 0;
    };
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80) {
            ++run;
        } else {
            flush();
            if (!std::isspace(u)) {
                ++tokens;
            }
        }
    }
    flush();
    return tokens;
}

std::size_t TokenEstimator::estimate(std::span<const Message> messages) const {
    std::size_t total = 0;
    for (const Message& m : messages) {
        total += estimate(m.content);
    }
    return total;
}

namespace {

std::vector<Message> assemble(const PromptTemplate& prompt_template, std::span<const FewShotExample> examples,
                              std::string_view objective, std::string_view observation, Packaging packaging) {
    const int slots = prompt_template.example_slots();
    std::string text = prompt_template.text();
    replace_once(text, "{Objective}", objective);

    if (packaging == Packaging::SingleMessage) {
        if (static_cast<int>(examples.size()) > slots) {
            throw Error(ErrorKind::MissingPlaceholder, "template has " + std::to_string(slots) + " example slots, " +
                                                           std::to_string(examples.size()) + " examples given");
        }
        for (int i = 1; i <= slots; ++i) {
            const auto k = static_cast<std::size_t>(i - 1);
            replace_once(text, example_slot(i), k < examples.size() ? render_example(examples[k]) : std::string());
        }
        replace_once(text, "{Observation}", observation);
        return {Message{"user", std::move(text), std::nullopt}};
    }

    // One message per example: the template is split around the example
    // slots into a system preamble and a closing user turn.
    std::vector<Message> messages;
    if (slots == 0) {
        replace_once(text, "{Observation}", observation);
        messages.push_back({"system", std::move(text), std::nullopt});
        return messages;
    }
    const std::size_t first = text.find(example_slot(1));
    const std::string last_slot = example_slot(slots);
    const std::size_t after_last = text.find(last_slot) + last_slot.size();
    std::string head = text.substr(0, first);
    std::string tail = text.substr(after_last);
    replace_once(tail, "{Observation}", observation);
    messages.push_back({"system", std::string(trim(head)), std::nullopt});
    for (const FewShotExample& ex : examples) {
        messages.push_back({"user", "OBSERVATION:\n\n" + ex.observation + "\n\nOBJECTIVE: " + ex.objective, std::nullopt});
        messages.push_back({"assistant", ex.response, std::nullopt});
    }
    messages.push_back({"user", std::string(trim(tail)), std::nullopt});
    return messages;
}

} // namespace

BuiltPrompt build_prompt(const PromptTemplate& prompt_template, std::span<const FewShotExample> examples,
                         std::string_view objective, std::string_view observation, Packaging packaging,
                         std::optional<std::size_t> token_limit, TokenEstimator estimator) {
    if (prompt_template.text().find("{Observation}") == std::string::npos) {
        throw Error(ErrorKind::MissingPlaceholder, "{Observation}");
    }
    std::vector<std::string> lines;
    for (std::size_t from = 0; from <= observation.size();) {
        std::size_t nl = observation.find('\n', from);
        nl = nl == std::string_view::npos ? observation.size() : nl;
        lines.emplace_back(observation.substr(from, nl - from));
        from = nl + 1;
    }
    auto join = [&] {
        std::string out;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (i) out += '\n';
            out += lines[i];
        }
        return out;
    };

    BuiltPrompt built;
    built.messages = assemble(prompt_template, examples, objective, observation, packaging);
    built.estimated_tokens = estimator.estimate(built.messages);
    while (token_limit && built.estimated_tokens > *token_limit) {
        auto it = std::find_if(lines.rbegin(), lines.rend(), [](const std::string& l) { return l.rfind("[] ", 0) == 0; });
        if (it == lines.rend()) {
            throw Error(ErrorKind::TokenBudgetExceeded, "prompt needs " + std::to_string(built.estimated_tokens) +
                                                            " tokens, limit is " + std::to_string(*token_limit));
        }
        lines.erase(std::next(it).base());
        ++built.dropped_static_lines;
        built.messages = assemble(prompt_template, examples, objective, join(), packaging);
        built.estimated_tokens = estimator.estimate(built.messages);
    }
    return built;
}

void LmSettings::validate() const {
    if (!(top_p >= 0 && top_p <= 1)) throw Error(ErrorKind::Config, "top_p must lie in [0, 1]");
    if (!(temperature >= 0)) throw Error(ErrorKind::Config, "temperature must be >= 0");
    if (input_token_limit == 0) throw Error(ErrorKind::Config, "input token limit must be > 0");
    if (request_timeout.count() <= 0) throw Error(ErrorKind::Config, "request timeout must be > 0");
    if (max_concurrent_requests <= 0 || max_concurrent_requests > 1024) {
        throw Error(ErrorKind::Config, "max concurrent requests must lie in [1, 1024]");
    }
    if (max_retries < 0) throw Error(ErrorKind::Config, "max retries must be >= 0");
}

LmSettings settings_for_backbone(std::string_view backbone) {
    LmSettings s;
    if (backbone == "gpt-4v") {
        s.model = "gpt-4-vision-preview";
        s.input_token_limit = 3840;
    } else if (backbone == "gemini-1.5") {
        s.model = "gemini-1.5-pro";
        s.input_token_limit = 900000;
    } else if (backbone == "llama3") {
        s.model = "llama3";
        s.input_token_limit = 3840;
    } else {
        throw Error(ErrorKind::Config, "unknown backbone '" + std::string(backbone) + "'");
    }
    return s;
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {
    if (replies_.empty()) {
        throw Error(ErrorKind::Config, "scripted backend needs at least one reply");
    }
}

std::string ScriptedBackend::complete(const std::vector<Message>& prompt, const LmSettings&) {
    std::lock_guard lock(mutex_);
    const std::size_t call = received_.size();
    received_.push_back(prompt);
    return replies_[std::min(call, replies_.size() - 1)];
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mutex_);
    return received_.size();
}

std::vector<std::vector<Message>> ScriptedBackend::received() const {
    std::lock_guard lock(mutex_);
    return received_;
}

ChatCompletionBackend::ChatCompletionBackend(std::string endpoint, std::string api_key,
                                             std::unique_ptr<HttpTransport> transport, int max_concurrent_requests,
                                             Sleeper sleeper)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), transport_(std::move(transport)),
      slots_(std::clamp(max_concurrent_requests, 1, 1024)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

nlohmann::json ChatCompletionBackend::request_body(const std::vector<Message>& prompt, const LmSettings& settings) {
    nlohmann::json messages = nlohmann::json::array();
    for (const Message& m : prompt) {
        if (m.image_png_base64) {
            messages.push_back({{"role", m.role},
                                {"content",
                                 {{{"type", "text"}, {"text", m.content}},
                                  {{"type", "image_url"},
                                   {"image_url", {{"url", "data:image/png;base64," + *m.image_png_base64}}}}}}});
        } else {
            messages.push_back({{"role", m.role}, {"content", m.content}});
        }
    }
    return {{"model", settings.model},
            {"messages", std::move(messages)},
            {"temperature", settings.temperature},
            {"top_p", settings.top_p}};
}

namespace {

std::string response_content(const std::string& body) {
    try {
        return nlohmann::json::parse(body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& err) {
        throw Error(ErrorKind::BackendError, std::string("unexpected response body: ") + err.what());
    }
}

} // namespace

std::string ChatCompletionBackend::complete(const std::vector<Message>& prompt, const LmSettings& settings) {
    settings.validate();
    if (api_key_.empty()) {
        throw Error(ErrorKind::AuthError, "no API key configured");
    }
    const std::string request_id = "screenorder-" + std::to_string(next_request_.fetch_add(1));
    const std::string body = request_body(prompt, settings).dump();
    const HttpHeaders headers{{"Authorization", "Bearer " + api_key_},
                              {"Content-Type", "application/json"},
                              {"X-Request-Id", request_id}};

    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};

    for (int attempt = 0;; ++attempt) {
        HttpResponse response;
        std::optional<Error> transient;
        try {
            response = transport_->post(endpoint_, headers, body, settings.request_timeout);
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::Timeout && err.kind() != ErrorKind::BackendError) {
                throw;
            }
            transient = err;
        }
        if (!transient) {
            if (response.status == 200) {
                return response_content(response.body);
            }
            if (response.status == 401 || response.status == 403) {
                throw Error(ErrorKind::AuthError,
                            "backend rejected credentials (HTTP " + std::to_string(response.status) + ")");
            }
            if (response.status == 429) {
                transient.emplace(ErrorKind::RateLimited,
                                  "HTTP 429 after " + std::to_string(attempt + 1) + " attempt(s)");
            } else if (response.status >= 500) {
                transient.emplace(ErrorKind::BackendError, "HTTP " + std::to_string(response.status));
            } else {
                throw Error(ErrorKind::BackendError, "HTTP " + std::to_string(response.status) + ": " + response.body);
            }
        }
        if (attempt >= settings.max_retries) {
            throw *transient;
        }
        sleeper_(settings.backoff_base * (1LL << attempt));
    }
}

} // namespace screenorder
