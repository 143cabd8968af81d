#pragma once

#include "screenorder/core_model.hpp"
#include "screenorder/image.hpp"
#include "screenorder/ordering.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace screenorder {

/// Switches that remove individual attributes from an observation.
struct AblationMask {
    bool include_tag = true;
    bool include_captions = true;
    bool include_alt_text = true;
    bool include_interact_text = true;
    bool include_static_text = true;
    /// Replace the view's ordering by a fresh random one (ids re-derived).
    bool shuffle_order = false;
    std::uint64_t shuffle_seed = 0;
    bool include_text_representation = true;
    bool include_screenshot = true;
    bool include_som = true;

    bool operator==(const AblationMask&) const = default;
};

/// Applies one CLI mask token ("no-tag", "no-captions", "no-alt-text",
/// "no-interact-text", "no-static-text", "shuffle-order", "no-text",
/// "no-screenshot", "no-som"). Throws Error{Config} for unknown tokens.
void apply_mask_token(AblationMask& mask, std::string_view token);

/// Config-file form; field names match the struct members.
nlohmann::json mask_to_json(const AblationMask& mask);
AblationMask mask_from_json(const nlohmann::json& section, AblationMask base = {});

/// Named masks reproducing the multimodal and text-attribute ablations.
std::vector<std::pair<std::string, AblationMask>> ablation_presets(std::uint64_t shuffle_seed);

/// The view actually presented under `mask`: the input view, or a freshly
/// shuffled one when mask.shuffle_order is set.
OrderedView presented_view(const EnvironmentState& state, const OrderedView& view, const AblationMask& mask);

/// Text content for one element before bracketing: alt text and caption
/// joined by ", " for images, the element text otherwise.
std::string element_text(const Element& element, const AblationMask& mask);

/// One line per retained element in presentation order:
///   interactable      "[<id>] [<TAG>] [<text>]"
///   non-interactable  "[] [StaticText] [<text>]"
/// Lines are joined by '\n' with no trailing newline.
/// Throws Error{InconsistentView} when the view does not match the state.
std::string serialize_text(const OrderedView& view, const EnvironmentState& state, const AblationMask& mask);

inline constexpr std::size_t kPaletteSize = 12;
const std::array<Rgb, kPaletteSize>& som_palette();
Rgb som_color(ElementId id);

/// Set-of-Mark overlay: a 2 px rectangle per interactable element and a
/// filled label in the same colour carrying its id. Throws
/// Error{DimensionMismatch} when the screenshot does not match the viewport.
Image render_som(const Image& screenshot, const OrderedView& view, const EnvironmentState& state);

struct LabelPlacement {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

/// Where render_som puts the label for `id` on a box.
LabelPlacement label_placement(const BoundingBox& box, ElementId id, int image_width, int image_height);

struct Observation {
    std::optional<std::string> text;
    std::optional<Image> image;
    std::map<int, std::size_t> id_map;
};

/// Composes text, image and id map from the same presented ordering. A
/// screenshot is required when mask.include_screenshot is set; with SoM but
/// no screenshot, marks are drawn on a blank white canvas.
Observation build_observation(const EnvironmentState& state, const OrderedView& view, const AblationMask& mask,
                              const std::optional<Image>& screenshot);

} // namespace screenorder
