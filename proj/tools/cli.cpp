#include "cli.hpp"

#include "run_config.hpp"

#include "screenorder/action_language.hpp"
#include "screenorder/core_model.hpp"
#include "screenorder/dom.hpp"
#include "screenorder/error.hpp"
#include "screenorder/image.hpp"
#include "screenorder/metrics.hpp"
#include "screenorder/ordering.hpp"
#include "screenorder/prompting.hpp"
#include "screenorder/representation.hpp"
#include "screenorder/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace screenorder::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Environment process_environment() {
    Environment env;
    env.getenv = [](std::string_view name) -> std::optional<std::string> {
        const char* value = std::getenv(std::string(name).c_str());
        if (!value) return std::nullopt;
        return std::string(value);
    };
    env.timestamp = [] {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm utc{};
        gmtime_r(&now, &utc);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
        return std::string(buf);
    };
    return env;
}

namespace {

/// Options shared by every subcommand that touches configuration.
struct CommonOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    void add(CLI::App& app) {
        app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        seed_opt = app.add_option("--seed", seed, "Run seed; every random stream derives from it");
    }

    RunConfig resolve() const {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (seed_opt->count()) config.seed = seed;
        return config;
    }
};

struct OrderingOptions {
    std::string method;
    double raster_band = kDefaultRasterBand;
    double perplexity = 30;
    int iterations = 1000;
    CLI::Option* method_opt = nullptr;
    CLI::Option* band_opt = nullptr;
    CLI::Option* perplexity_opt = nullptr;
    CLI::Option* iterations_opt = nullptr;

    void add(CLI::App& app) {
        method_opt = app.add_option("--method", method, "preorder | random | raster | tsne")
                         ->check(CLI::IsMember({"preorder", "random", "raster", "tsne"}));
        band_opt = app.add_option("--raster-band", raster_band, "Raster row band height in px");
        perplexity_opt = app.add_option("--tsne-perplexity", perplexity, "t-SNE perplexity");
        iterations_opt = app.add_option("--tsne-iterations", iterations, "t-SNE iterations");
    }

    void apply(RunConfig& config) const {
        if (method_opt->count()) config.ordering = parse_ordering_kind(method);
        if (band_opt->count()) config.raster_band = raster_band;
        if (perplexity_opt->count()) config.tsne.perplexity = perplexity;
        if (iterations_opt->count()) config.tsne.iterations = iterations;
        if (config.raster_band <= 0) {
            throw Error(ErrorKind::Config, "raster band must be positive");
        }
        config.tsne.validate();
    }
};

struct MaskOptions {
    std::vector<std::string> tokens;

    void add(CLI::App& app) {
        app.add_option("--mask", tokens,
                       "Ablation token, repeatable: full no-tag no-captions no-alt-text no-interact-text "
                       "no-static-text shuffle-order no-text no-screenshot no-som");
    }

    void apply(RunConfig& config) const {
        for (const std::string& token : tokens) {
            if (token == "full") {
                config.mask = AblationMask{};
            } else {
                apply_mask_token(config.mask, token);
            }
        }
        config.mask.shuffle_seed = derive_seed(config.seed, "shuffle");
    }
};

void write_config_echo(const fs::path& dir, const RunConfig& config) {
    write_text_file(dir / "config.json", config_to_json(config).dump(2) + "\n");
}

/// The state's ordering: from a file when given, computed otherwise.
Ordering resolve_ordering(const EnvironmentState& state, const std::string& ordering_path, const RunConfig& config) {
    if (!ordering_path.empty()) {
        return load_ordering(ordering_path, state.size());
    }
    return compute_ordering(state, config.ordering_method());
}

std::optional<Image> resolve_screenshot(const std::string& flag, const EnvironmentState& state,
                                        const fs::path& elements_path) {
    if (!flag.empty()) {
        return read_png(flag);
    }
    if (state.screenshot_path) {
        fs::path p = *state.screenshot_path;
        if (p.is_relative()) p = elements_path.parent_path() / p;
        return read_png(p);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------- extract

int cmd_extract(const std::string& html, const std::string& layout, const std::string& out, const RunConfig& config,
                bool synthetic, std::ostream& err) {
    dom::DomNode root = dom::parse_html(read_text_file(html));
    if (!layout.empty()) {
        dom::attach_layout(root, dom::parse_layout(read_text_file(layout)));
    }
    dom::ExtractOptions options;
    options.viewport_width = config.viewport_width;
    options.viewport_height = config.viewport_height;
    options.synthetic_layout = synthetic;
    const EnvironmentState state = dom::extract_elements(root, options);
    for (const Violation& v : validate_state(state)) {
        err << "warning: " << v.message << '\n';
    }
    write_elements(out, state);
    return kExitOk;
}

// ------------------------------------------------------------------ order

int cmd_order(const std::string& elements, const std::string& out, const RunConfig& config) {
    const EnvironmentState state = load_elements(elements);
    const OrderingMethod method = config.ordering_method();
    const OrderedView view = apply_ordering(state, compute_ordering(state, method));
    write_text_file(out, serialize_ordering(method, view));
    return kExitOk;
}

// ----------------------------------------------------------------- render

int cmd_render(const std::string& elements, const std::string& ordering_path, const std::string& screenshot_flag,
               const std::string& out_text, const std::string& out_image, RunConfig config) {
    if (out_text.empty() && out_image.empty()) {
        throw Error(ErrorKind::Config, "render needs --out-text and/or --out-image");
    }
    const EnvironmentState state = load_elements(elements);
    const OrderedView view = apply_ordering(state, resolve_ordering(state, ordering_path, config));
    const std::optional<Image> screenshot = resolve_screenshot(screenshot_flag, state, elements);
    if (!screenshot) {
        config.mask.include_screenshot = false;
    }
    if (out_text.empty()) config.mask.include_text_representation = false;
    if (out_image.empty()) config.mask.include_screenshot = config.mask.include_som = false;

    const Observation obs = build_observation(state, view, config.mask, screenshot);
    if (!out_text.empty()) {
        if (!obs.text) throw Error(ErrorKind::Config, "mask excludes the text representation");
        write_text_file(out_text, *obs.text + "\n");
    }
    if (!out_image.empty()) {
        if (!obs.image) throw Error(ErrorKind::Config, "mask excludes both screenshot and marks");
        write_png(out_image, *obs.image);
    }
    return kExitOk;
}

// ----------------------------------------------------------------- ablate

int cmd_ablate(const std::string& elements, const std::string& ordering_path, const std::string& screenshot_flag,
               const fs::path& out_dir, const RunConfig& config, std::ostream& out) {
    const EnvironmentState state = load_elements(elements);
    const OrderedView view = apply_ordering(state, resolve_ordering(state, ordering_path, config));
    const std::optional<Image> screenshot = resolve_screenshot(screenshot_flag, state, elements);
    fs::create_directories(out_dir);
    write_config_echo(out_dir, config);

    json index = json::array();
    for (auto [name, mask] : ablation_presets(config.mask.shuffle_seed)) {
        if (!screenshot) mask.include_screenshot = false;
        const Observation obs = build_observation(state, view, mask, screenshot);
        const fs::path dir = out_dir / name;
        fs::create_directories(dir);
        json entry{{"name", name}, {"mask", mask_to_json(mask)}};
        if (obs.text) {
            write_text_file(dir / "observation.txt", *obs.text + "\n");
            entry["text"] = name + "/observation.txt";
        }
        if (obs.image) {
            write_png(dir / "observation.png", *obs.image);
            entry["image"] = name + "/observation.png";
        }
        index.push_back(std::move(entry));
        out << name << '\n';
    }
    write_text_file(out_dir / "index.json", index.dump(2) + "\n");
    return kExitOk;
}

// ------------------------------------------------------------------- eval

int cmd_eval(const std::string& pred, const std::string& gold, const std::string& elements,
             const std::string& ordering_path, const std::string& out_report, std::ostream& out) {
    const std::vector<GoldTask> tasks = load_gold_tasks(gold);
    const std::vector<Prediction> predictions = load_predictions(pred);
    std::optional<EnvironmentState> state;
    std::optional<Ordering> ordering;
    if (!elements.empty()) {
        state = load_elements(elements);
        if (!ordering_path.empty()) ordering = load_ordering(ordering_path, state->size());
    }
    const ScoreReport report = evaluate(tasks, predictions, state, ordering);
    out << report_table(report);
    if (!out_report.empty()) {
        write_text_file(out_report, report_to_json(report).dump(2) + "\n");
    }
    return kExitOk;
}

// ------------------------------------------------------------------ agent

struct AgentInputs {
    std::string elements;
    std::string objective;
    std::string ordering_path;
    std::string screenshot;
    std::string backend;
    std::string template_path;
    std::string examples_path;
    std::string out_dir;
};

std::vector<FewShotExample> load_examples(const std::string& path) {
    if (path.empty()) return {};
    json root;
    try {
        root = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::MalformedFile, path + ": " + e.what());
    }
    if (!root.is_object() || !root.contains("examples") || !root["examples"].is_array()) {
        throw Error(ErrorKind::MalformedFile, path + ": expected {\"examples\": [...]}");
    }
    std::vector<FewShotExample> examples;
    for (const json& e : root["examples"]) {
        examples.push_back({e.at("observation").get<std::string>(), e.at("objective").get<std::string>(),
                            e.at("response").get<std::string>()});
    }
    return examples;
}

/// "mock:<file>": a JSON {"replies": [...]} file or a plain-text single reply.
std::vector<std::string> load_mock_script(const std::string& path) {
    const std::string text = read_text_file(path);
    if (fs::path(path).extension() == ".json") {
        try {
            return json::parse(text).at("replies").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::MalformedFile, path + ": " + e.what());
        }
    }
    return {text};
}

std::unique_ptr<LmBackend> make_backend(const std::string& spec, const RunConfig& config, const Environment& env) {
    if (spec.rfind("mock:", 0) == 0) {
        return std::make_unique<ScriptedBackend>(load_mock_script(spec.substr(5)));
    }
    if (spec == "http") {
        const std::optional<std::string> key = env.getenv(config.api_key_env);
        if (!key || key->empty()) {
            throw Error(ErrorKind::AuthError, "environment variable " + config.api_key_env + " is not set");
        }
        return std::make_unique<ChatCompletionBackend>(config.endpoint, *key, make_http_transport(),
                                                       config.lm.max_concurrent_requests);
    }
    throw Error(ErrorKind::Config, "unknown backend '" + spec + "' (expected mock:<script> or http)");
}

json messages_to_json(const std::vector<Message>& messages) {
    json out = json::array();
    for (const Message& m : messages) {
        json entry{{"role", m.role}, {"content", m.content}};
        if (m.image_png_base64) entry["image_png_bytes_base64"] = m.image_png_base64->size();
        out.push_back(std::move(entry));
    }
    return out;
}

int cmd_agent(const AgentInputs& in, RunConfig config, const Environment& env, std::ostream& out) {
    const EnvironmentState state = load_elements(in.elements);
    const OrderedView base_view = apply_ordering(state, resolve_ordering(state, in.ordering_path, config));
    const std::optional<Image> screenshot = resolve_screenshot(in.screenshot, state, in.elements);
    if (!screenshot) {
        // Without a screenshot the LM gets the text channel only.
        config.mask.include_screenshot = false;
        config.mask.include_som = false;
    }
    const PromptTemplate prompt_template = in.template_path.empty()
                                               ? PromptTemplate::default_template()
                                               : PromptTemplate::parse(read_text_file(in.template_path));
    const std::vector<FewShotExample> examples = load_examples(in.examples_path);
    std::unique_ptr<LmBackend> backend = make_backend(in.backend, config, env);

    const fs::path dir = in.out_dir;
    fs::create_directories(dir);
    write_config_echo(dir, config);

    const OrderedView view = presented_view(state, base_view, config.mask);
    const Observation obs = build_observation(state, base_view, config.mask, screenshot);
    const std::string observation_text = obs.text.value_or("");
    if (obs.text) write_text_file(dir / "observation.txt", observation_text + "\n");
    if (obs.image) write_png(dir / "observation.png", *obs.image);

    std::ostringstream transcript;
    std::vector<std::string> errors;
    std::vector<ActionCommand> commands;
    std::vector<std::string> emitted;
    std::string reply;

    transcript << "== objective\n" << in.objective << "\n";
    try {
        BuiltPrompt prompt = build_prompt(prompt_template, examples, in.objective, observation_text, config.packaging,
                                          config.lm.input_token_limit);
        if (obs.image) {
            prompt.messages.back().image_png_base64 = base64_encode(encode_png(*obs.image));
        }
        write_text_file(dir / "prompt.json", messages_to_json(prompt.messages).dump(2) + "\n");
        transcript << "== prompt (" << prompt.estimated_tokens << " estimated tokens, " << prompt.dropped_static_lines
                   << " static lines dropped)\n";
        for (const Message& m : prompt.messages) {
            transcript << "[" << m.role << (m.image_png_base64 ? " +image" : "") << "]\n" << m.content << "\n";
        }
        reply = backend->complete(prompt.messages, config.lm);
        write_text_file(dir / "response.txt", reply);
        transcript << "== response\n" << reply << "\n";
        commands = parse_response(reply, config.dialect);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::AuthError) throw;
        errors.emplace_back(e.what());
    }

    json actions = json::array();
    for (const ActionCommand& cmd : commands) {
        json record = command_to_json(cmd);
        record["line"] = render_action(cmd);
        try {
            emitted.push_back(emit_pyautogui(cmd, config.dialect, view, state));
            record["emitted"] = emitted.back();
        } catch (const Error& e) {
            errors.emplace_back(render_action(cmd) + ": " + e.what());
            record["error"] = e.what();
        }
        actions.push_back(std::move(record));
    }
    write_text_file(dir / "actions.json",
                    json{{"dialect", std::string(to_string(config.dialect))}, {"commands", actions}}.dump(2) + "\n");

    std::string code = "import pyautogui\n";
    for (const std::string& line : emitted) code += line + "\n";
    write_text_file(dir / "emitted.py", code);

    transcript << "== actions\n";
    for (const ActionCommand& cmd : commands) transcript << render_action(cmd) << "\n";
    transcript << "== emitted\n";
    for (const std::string& line : emitted) transcript << line << "\n";
    transcript << "== errors\n";
    for (const std::string& e : errors) transcript << e << "\n";
    transcript << "== status\n" << (errors.empty() ? "ok" : "failed") << "\n";
    write_text_file(dir / "transcript.txt", "# screenorder agent run " + env.timestamp() + "\n" + transcript.str());

    for (const std::string& line : emitted) out << line << "\n";
    return errors.empty() ? kExitOk : kExitTaskFailure;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env) {
    CLI::App app{"Order, serialize and score GUI element observations", "screenorder"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // extract
    CLI::App* extract = app.add_subcommand("extract", "HTML page to element file (pre-order)");
    CommonOptions extract_common;
    std::string html, layout, extract_out;
    bool no_synthetic = false;
    double vw = 0, vh = 0;
    extract_common.add(*extract);
    extract->add_option("html", html, "Input HTML file")->required()->check(CLI::ExistingFile);
    extract->add_option("--layout", layout, "Layout sidecar JSON (node path -> box)")->check(CLI::ExistingFile);
    extract->add_option("--out,-o", extract_out, "Element file to write")->required();
    CLI::Option* vw_opt = extract->add_option("--viewport-width", vw, "Viewport width in px");
    CLI::Option* vh_opt = extract->add_option("--viewport-height", vh, "Viewport height in px");
    extract->add_flag("--no-synthetic-layout", no_synthetic, "Fail instead of laying out unboxed pages");

    // order
    CLI::App* order = app.add_subcommand("order", "Element file to ordering file");
    CommonOptions order_common;
    OrderingOptions order_opts;
    std::string order_elements, order_out;
    order_common.add(*order);
    order_opts.add(*order);
    order->add_option("elements", order_elements, "Element file")->required()->check(CLI::ExistingFile);
    order->add_option("--out,-o", order_out, "Ordering file to write")->required();

    // render
    CLI::App* render = app.add_subcommand("render", "Text and Set-of-Mark observation");
    CommonOptions render_common;
    OrderingOptions render_ordering;
    MaskOptions render_mask;
    std::string render_elements, render_ordering_path, render_shot, out_text, out_image;
    render_common.add(*render);
    render_ordering.add(*render);
    render_mask.add(*render);
    render->add_option("elements", render_elements, "Element file")->required()->check(CLI::ExistingFile);
    render->add_option("ordering", render_ordering_path, "Ordering file (computed from --method when omitted)")
        ->check(CLI::ExistingFile);
    render->add_option("--screenshot", render_shot, "Screenshot PNG")->check(CLI::ExistingFile);
    render->add_option("--out-text", out_text, "Text observation to write");
    render->add_option("--out-image", out_image, "Observation PNG to write");

    // ablate
    CLI::App* ablate = app.add_subcommand("ablate", "Observation under every ablation preset");
    CommonOptions ablate_common;
    OrderingOptions ablate_ordering;
    std::string ablate_elements, ablate_ordering_path, ablate_shot, ablate_out;
    ablate_common.add(*ablate);
    ablate_ordering.add(*ablate);
    ablate->add_option("elements", ablate_elements, "Element file")->required()->check(CLI::ExistingFile);
    ablate->add_option("ordering", ablate_ordering_path, "Ordering file")->check(CLI::ExistingFile);
    ablate->add_option("--screenshot", ablate_shot, "Screenshot PNG")->check(CLI::ExistingFile);
    ablate->add_option("--out-dir", ablate_out, "Output directory")->required();

    // eval
    CLI::App* eval = app.add_subcommand("eval", "Sequence and action scores");
    std::string pred, gold, eval_elements, eval_ordering, eval_out;
    eval->add_option("pred", pred, "Prediction file")->required()->check(CLI::ExistingFile);
    eval->add_option("gold", gold, "Gold task file")->required()->check(CLI::ExistingFile);
    eval->add_option("--elements", eval_elements, "Element file for tasks without their own")
        ->check(CLI::ExistingFile);
    eval->add_option("--ordering", eval_ordering, "Ordering file for --elements")->check(CLI::ExistingFile);
    eval->add_option("--out,-o", eval_out, "JSON report to write");

    // agent
    CLI::App* agent = app.add_subcommand("agent", "Single LM step: observe, prompt, parse, emit");
    CommonOptions agent_common;
    OrderingOptions agent_ordering;
    MaskOptions agent_mask;
    AgentInputs agent_in;
    std::string dialect, packaging, backbone, endpoint;
    agent_common.add(*agent);
    agent_ordering.add(*agent);
    agent_mask.add(*agent);
    agent->add_option("elements", agent_in.elements, "Element file")->required()->check(CLI::ExistingFile);
    agent->add_option("--objective", agent_in.objective, "Task objective")->required();
    agent->add_option("--ordering", agent_in.ordering_path, "Ordering file")->check(CLI::ExistingFile);
    agent->add_option("--screenshot", agent_in.screenshot, "Screenshot PNG")->check(CLI::ExistingFile);
    agent->add_option("--backend", agent_in.backend, "mock:<script> or http")->required();
    CLI::Option* dialect_opt =
        agent->add_option("--dialect", dialect, "omniact | vwa")->check(CLI::IsMember({"omniact", "vwa"}));
    agent->add_option("--template", agent_in.template_path, "Prompt template file")->check(CLI::ExistingFile);
    agent->add_option("--examples", agent_in.examples_path, "Few-shot examples JSON")->check(CLI::ExistingFile);
    CLI::Option* packaging_opt = agent->add_option("--packaging", packaging, "single-message | message-per-example");
    CLI::Option* backbone_opt = agent->add_option("--backbone", backbone, "gpt-4v | gemini-1.5 | llama3");
    CLI::Option* endpoint_opt = agent->add_option("--endpoint", endpoint, "Chat-completion URL");
    agent->add_option("--out-dir", agent_in.out_dir, "Run output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (extract->parsed()) {
            RunConfig config = extract_common.resolve();
            if (vw_opt->count()) config.viewport_width = vw;
            if (vh_opt->count()) config.viewport_height = vh;
            return cmd_extract(html, layout, extract_out, config, !no_synthetic, err);
        }
        if (order->parsed()) {
            RunConfig config = order_common.resolve();
            order_opts.apply(config);
            return cmd_order(order_elements, order_out, config);
        }
        if (render->parsed()) {
            RunConfig config = render_common.resolve();
            render_ordering.apply(config);
            render_mask.apply(config);
            return cmd_render(render_elements, render_ordering_path, render_shot, out_text, out_image, config);
        }
        if (ablate->parsed()) {
            RunConfig config = ablate_common.resolve();
            ablate_ordering.apply(config);
            config.mask.shuffle_seed = derive_seed(config.seed, "shuffle");
            return cmd_ablate(ablate_elements, ablate_ordering_path, ablate_shot, ablate_out, config, out);
        }
        if (eval->parsed()) {
            return cmd_eval(pred, gold, eval_elements, eval_ordering, eval_out, out);
        }
        if (agent->parsed()) {
            RunConfig config = agent_common.resolve();
            agent_ordering.apply(config);
            agent_mask.apply(config);
            if (backbone_opt->count()) {
                config.backbone = backbone;
                config.lm = settings_for_backbone(backbone);
            }
            if (dialect_opt->count()) config.dialect = parse_dialect(dialect);
            if (packaging_opt->count()) config.packaging = parse_packaging(packaging);
            if (endpoint_opt->count()) config.endpoint = endpoint;
            return cmd_agent(agent_in, config, env, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace screenorder::cli
