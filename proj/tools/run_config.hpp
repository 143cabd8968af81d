#pragma once

#include "screenorder/action_language.hpp"
#include "screenorder/ordering.hpp"
#include "screenorder/prompting.hpp"
#include "screenorder/representation.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace screenorder::cli {

/// Everything a run depends on. Defaults, then the config file, then flags.
struct RunConfig {
    std::uint64_t seed = 0;
    Dialect dialect = Dialect::OmniAct;

    OrderingMethod::Kind ordering = OrderingMethod::Kind::Preorder;
    double raster_band = kDefaultRasterBand;
    tsne::TsneParams tsne;

    AblationMask mask;

    double viewport_width = 1280;
    double viewport_height = 720;

    std::string backbone;
    LmSettings lm;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    Packaging packaging = Packaging::SingleMessage;

    /// Ordering method with its seed derived from `seed`.
    OrderingMethod ordering_method() const;
};

/// Unknown keys are rejected. Throws Error{Config}.
RunConfig config_from_json(const nlohmann::json& root, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
nlohmann::json config_to_json(const RunConfig& config);

std::string_view to_string(Packaging packaging);
Packaging parse_packaging(std::string_view name);

} // namespace screenorder::cli
