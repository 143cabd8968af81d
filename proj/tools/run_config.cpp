#include "run_config.hpp"

#include "screenorder/core_model.hpp"
#include "screenorder/error.hpp"
#include "screenorder/rng.hpp"

namespace screenorder::cli {

using nlohmann::json;

OrderingMethod RunConfig::ordering_method() const {
    OrderingMethod method;
    method.kind = ordering;
    method.seed = derive_seed(seed, "ordering");
    method.band_height = raster_band;
    method.tsne = tsne;
    return method;
}

std::string_view to_string(Packaging packaging) {
    return packaging == Packaging::SingleMessage ? "single-message" : "message-per-example";
}

Packaging parse_packaging(std::string_view name) {
    if (name == "single-message") return Packaging::SingleMessage;
    if (name == "message-per-example") return Packaging::MessagePerExample;
    throw Error(ErrorKind::Config, "unknown packaging '" + std::string(name) + "'");
}

namespace {

template <typename T>
T field(const json& value, const std::string& where) {
    try {
        return value.get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::Config, where + " has the wrong type");
    }
}

void require_object(const json& value, const std::string& where) {
    if (!value.is_object()) {
        throw Error(ErrorKind::Config, where + " must be an object");
    }
}

void read_ordering(const json& section, RunConfig& c) {
    require_object(section, "ordering");
    for (const auto& [key, value] : section.items()) {
        const std::string where = "ordering." + key;
        if (key == "method") c.ordering = parse_ordering_kind(field<std::string>(value, where));
        else if (key == "raster_band") c.raster_band = field<double>(value, where);
        else if (key == "tsne_perplexity") c.tsne.perplexity = field<double>(value, where);
        else if (key == "tsne_iterations") c.tsne.iterations = field<int>(value, where);
        else if (key == "tsne_learning_rate") c.tsne.learning_rate = field<double>(value, where);
        else if (key == "tsne_early_exaggeration") c.tsne.early_exaggeration = field<double>(value, where);
        else throw Error(ErrorKind::Config, "unknown config field '" + where + "'");
    }
}

void read_lm(const json& section, RunConfig& c) {
    require_object(section, "lm");
    // The backbone preset applies first so explicit fields override it.
    if (auto it = section.find("backbone"); it != section.end()) {
        c.backbone = field<std::string>(*it, "lm.backbone");
        c.lm = settings_for_backbone(c.backbone);
    }
    for (const auto& [key, value] : section.items()) {
        const std::string where = "lm." + key;
        if (key == "backbone") continue;
        if (key == "model") c.lm.model = field<std::string>(value, where);
        else if (key == "temperature") c.lm.temperature = field<double>(value, where);
        else if (key == "top_p") c.lm.top_p = field<double>(value, where);
        else if (key == "input_token_limit") c.lm.input_token_limit = field<std::size_t>(value, where);
        else if (key == "request_timeout_ms") c.lm.request_timeout = std::chrono::milliseconds(field<long>(value, where));
        else if (key == "max_concurrent_requests") c.lm.max_concurrent_requests = field<int>(value, where);
        else if (key == "max_retries") c.lm.max_retries = field<int>(value, where);
        else if (key == "backoff_base_ms") c.lm.backoff_base = std::chrono::milliseconds(field<long>(value, where));
        else if (key == "endpoint") c.endpoint = field<std::string>(value, where);
        else if (key == "api_key_env") c.api_key_env = field<std::string>(value, where);
        else if (key == "packaging") c.packaging = parse_packaging(field<std::string>(value, where));
        else throw Error(ErrorKind::Config, "unknown config field '" + where + "'");
    }
}

} // namespace

RunConfig config_from_json(const json& root, RunConfig c) {
    require_object(root, "config");
    for (const auto& [key, value] : root.items()) {
        if (key == "seed") c.seed = field<std::uint64_t>(value, "seed");
        else if (key == "dialect") c.dialect = parse_dialect(field<std::string>(value, "dialect"));
        else if (key == "ordering") read_ordering(value, c);
        else if (key == "mask") c.mask = mask_from_json(value, c.mask);
        else if (key == "viewport") {
            require_object(value, "viewport");
            c.viewport_width = field<double>(value.value("w", json(c.viewport_width)), "viewport.w");
            c.viewport_height = field<double>(value.value("h", json(c.viewport_height)), "viewport.h");
        } else if (key == "lm") read_lm(value, c);
        else throw Error(ErrorKind::Config, "unknown config field '" + key + "'");
    }
    c.tsne.validate();
    c.lm.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    json root;
    try {
        root = json::parse(read_text_file(path));
    } catch (const json::parse_error& err) {
        throw Error(ErrorKind::Config, path.string() + ": " + err.what());
    }
    return config_from_json(root, std::move(base));
}

json config_to_json(const RunConfig& c) {
    json lm{{"model", c.lm.model},
            {"temperature", c.lm.temperature},
            {"top_p", c.lm.top_p},
            {"input_token_limit", c.lm.input_token_limit},
            {"request_timeout_ms", c.lm.request_timeout.count()},
            {"max_concurrent_requests", c.lm.max_concurrent_requests},
            {"max_retries", c.lm.max_retries},
            {"backoff_base_ms", c.lm.backoff_base.count()},
            {"endpoint", c.endpoint},
            {"api_key_env", c.api_key_env},
            {"packaging", std::string(to_string(c.packaging))}};
    if (!c.backbone.empty()) {
        lm["backbone"] = c.backbone;
    }
    return {{"seed", c.seed},
            {"dialect", std::string(to_string(c.dialect))},
            {"ordering",
             {{"method", std::string(to_string(c.ordering))},
              {"raster_band", c.raster_band},
              {"tsne_perplexity", c.tsne.perplexity},
              {"tsne_iterations", c.tsne.iterations},
              {"tsne_learning_rate", c.tsne.learning_rate},
              {"tsne_early_exaggeration", c.tsne.early_exaggeration}}},
            {"mask", mask_to_json(c.mask)},
            {"viewport", {{"w", c.viewport_width}, {"h", c.viewport_height}}},
            {"lm", std::move(lm)}};
}

} // namespace screenorder::cli
