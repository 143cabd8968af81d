#include "screenorder/representation.hpp"

#include "screenorder/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

namespace screenorder {

void apply_mask_token(AblationMask& mask, std::string_view token) {
    if (token == "no-tag") {
        mask.include_tag = false;
    } else if (token == "no-captions") {
        mask.include_captions = false;
    } else if (token == "no-alt-text") {
        mask.include_alt_text = false;
    } else if (token == "no-interact-text") {
        mask.include_interact_text = false;
    } else if (token == "no-static-text") {
        mask.include_static_text = false;
    } else if (token == "shuffle-order") {
        mask.shuffle_order = true;
    } else if (token == "no-text") {
        mask.include_text_representation = false;
    } else if (token == "no-screenshot") {
        mask.include_screenshot = false;
    } else if (token == "no-som") {
        mask.include_som = false;
    } else if (token != "full") {
        throw Error(ErrorKind::Config, "unknown mask token '" + std::string(token) + "'");
    }
}

nlohmann::json mask_to_json(const AblationMask& m) {
    return {{"include_tag", m.include_tag},
            {"include_captions", m.include_captions},
            {"include_alt_text", m.include_alt_text},
            {"include_interact_text", m.include_interact_text},
            {"include_static_text", m.include_static_text},
            {"shuffle_order", m.shuffle_order},
            {"shuffle_seed", m.shuffle_seed},
            {"include_text_representation", m.include_text_representation},
            {"include_screenshot", m.include_screenshot},
            {"include_som", m.include_som}};
}

AblationMask mask_from_json(const nlohmann::json& section, AblationMask m) {
    if (!section.is_object()) {
        throw Error(ErrorKind::Config, "mask section must be an object");
    }
    for (const auto& [key, value] : section.items()) {
        if (key == "shuffle_seed") {
            if (!value.is_number_unsigned()) {
                throw Error(ErrorKind::Config, "mask.shuffle_seed must be a non-negative integer");
            }
            m.shuffle_seed = value.get<std::uint64_t>();
            continue;
        }
        if (!value.is_boolean()) {
            throw Error(ErrorKind::Config, "mask." + key + " must be a boolean");
        }
        const bool v = value.get<bool>();
        if (key == "include_tag") m.include_tag = v;
        else if (key == "include_captions") m.include_captions = v;
        else if (key == "include_alt_text") m.include_alt_text = v;
        else if (key == "include_interact_text") m.include_interact_text = v;
        else if (key == "include_static_text") m.include_static_text = v;
        else if (key == "shuffle_order") m.shuffle_order = v;
        else if (key == "include_text_representation") m.include_text_representation = v;
        else if (key == "include_screenshot") m.include_screenshot = v;
        else if (key == "include_som") m.include_som = v;
        else throw Error(ErrorKind::Config, "unknown mask field '" + key + "'");
    }
    return m;
}

std::vector<std::pair<std::string, AblationMask>> ablation_presets(std::uint64_t shuffle_seed) {
    std::vector<std::pair<std::string, AblationMask>> presets;
    auto add = [&](std::string name, std::initializer_list<std::string_view> tokens) {
        AblationMask m;
        m.shuffle_seed = shuffle_seed;
        for (auto t : tokens) {
            apply_mask_token(m, t);
        }
        presets.emplace_back(std::move(name), m);
    };
    // Multimodal axes.
    add("full", {});
    add("text-only", {"no-screenshot", "no-som"});
    add("screenshot-text", {"no-som"});
    add("image-only", {"no-text"});
    // Text attributes.
    add("no-tag", {"no-tag"});
    add("no-captions", {"no-captions"});
    add("no-alt-text", {"no-alt-text"});
    add("no-interact-text", {"no-interact-text"});
    add("no-static-text", {"no-static-text"});
    add("no-interact-static-text", {"no-interact-text", "no-static-text"});
    add("shuffle-order", {"shuffle-order"});
    return presets;
}

namespace {

void check_view(const EnvironmentState& state, const OrderedView& view) {
    if (view.size() != state.size() || !is_bijection(view.ordering(), state.size())) {
        throw Error(ErrorKind::InconsistentView, "view covers " + std::to_string(view.size()) + " elements, state has " +
                                                     std::to_string(state.size()));
    }
    std::size_t interactable = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
        const bool has_id = view.id_of(i).has_value();
        if (has_id != state.elements[i].interactable) {
            throw Error(ErrorKind::InconsistentView, "element " + std::to_string(i + 1) +
                                                         (has_id ? " has an id but is not interactable"
                                                                 : " is interactable but has no id"));
        }
        interactable += has_id ? 1 : 0;
    }
    if (interactable != view.interactable_count()) {
        throw Error(ErrorKind::InconsistentView, "id map size mismatch");
    }
}

bool is_image(const Element& e) {
    if (!e.tag) {
        return false;
    }
    std::string tag = *e.tag;
    for (char& c : tag) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return tag == "IMG";
}

// Keeps every element on a single line.
std::string one_line(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c == '\n' || c == '\r' || c == '\t') {
            c = ' ';
        }
    }
    return out;
}

} // namespace

OrderedView presented_view(const EnvironmentState& state, const OrderedView& view, const AblationMask& mask) {
    check_view(state, view);
    if (!mask.shuffle_order) {
        return view;
    }
    return apply_ordering(state, order_random(state, mask.shuffle_seed));
}

std::string element_text(const Element& e, const AblationMask& mask) {
    if (e.interactable && !mask.include_interact_text) {
        return {};
    }
    if (is_image(e)) {
        std::string joined;
        auto append = [&](const std::optional<std::string>& part) {
            if (!part || part->empty()) {
                return;
            }
            if (!joined.empty()) {
                joined += ", ";
            }
            joined += *part;
        };
        if (mask.include_alt_text) append(e.alt_text);
        if (mask.include_captions) append(e.caption);
        return one_line(joined);
    }
    return one_line(e.text.value_or(""));
}

std::string serialize_text(const OrderedView& view, const EnvironmentState& state, const AblationMask& mask) {
    const OrderedView presented = presented_view(state, view, mask);
    std::string out;
    bool first = true;
    for (std::size_t index : presented.ordering().perm) {
        const Element& e = state.elements[index];
        if (!e.interactable && !mask.include_static_text) {
            continue;
        }
        if (!first) {
            out += '\n';
        }
        first = false;
        out += '[';
        if (e.interactable) {
            out += std::to_string(presented.id_of(index)->value);
        }
        out += "] [";
        if (mask.include_tag) {
            out += e.interactable ? one_line(e.tag.value_or("")) : std::string(kStaticTextTag);
        }
        out += "] [";
        out += element_text(e, mask);
        out += ']';
    }
    return out;
}

const std::array<Rgb, kPaletteSize>& som_palette() {
    static constexpr std::array<Rgb, kPaletteSize> palette{{{230, 25, 75},
                                                            {60, 180, 75},
                                                            {0, 130, 200},
                                                            {245, 130, 48},
                                                            {145, 30, 180},
                                                            {70, 200, 200},
                                                            {240, 50, 230},
                                                            {128, 128, 0},
                                                            {0, 128, 128},
                                                            {170, 110, 40},
                                                            {128, 0, 0},
                                                            {0, 0, 128}}};
    return palette;
}

Rgb som_color(ElementId id) {
    const auto slot = static_cast<std::size_t>(std::max(id.value, 1) - 1) % kPaletteSize;
    return som_palette()[slot];
}

namespace {

// 5x7 digit glyphs, one byte per row, bit 4 = leftmost column.
constexpr std::array<std::array<std::uint8_t, 7>, 10> kDigits{{
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
}};

constexpr int kGlyphScale = 2;
constexpr int kGlyphWidth = 5 * kGlyphScale;
constexpr int kGlyphHeight = 7 * kGlyphScale;
constexpr int kGlyphGap = kGlyphScale;
constexpr int kLabelPad = 2;
constexpr int kStroke = 2;
constexpr Rgb kLabelInk{255, 255, 255};

struct PixelBox {
    int x1, y1, x2, y2;
};

PixelBox to_pixels(const BoundingBox& b) {
    PixelBox p{static_cast<int>(std::floor(b.x1)), static_cast<int>(std::floor(b.y1)),
               static_cast<int>(std::ceil(b.x2)) - 1, static_cast<int>(std::ceil(b.y2)) - 1};
    p.x2 = std::max(p.x2, p.x1);
    p.y2 = std::max(p.y2, p.y1);
    return p;
}

} // namespace

LabelPlacement label_placement(const BoundingBox& box, ElementId id, int image_width, int image_height) {
    const auto digits = static_cast<int>(std::to_string(id.value).size());
    LabelPlacement label;
    label.width = 2 * kLabelPad + digits * kGlyphWidth + (digits - 1) * kGlyphGap;
    label.height = 2 * kLabelPad + kGlyphHeight;
    const PixelBox p = to_pixels(box);
    label.x = std::max(0, std::min(p.x1, image_width - label.width));
    label.y = std::max(0, std::min(p.y1, image_height - label.height));
    return label;
}

Image render_som(const Image& screenshot, const OrderedView& view, const EnvironmentState& state) {
    check_view(state, view);
    if (std::lround(state.viewport_width) != screenshot.width() ||
        std::lround(state.viewport_height) != screenshot.height()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "screenshot is " + std::to_string(screenshot.width()) + "x" + std::to_string(screenshot.height()) +
                        ", viewport is " + std::to_string(std::lround(state.viewport_width)) + "x" +
                        std::to_string(std::lround(state.viewport_height)));
    }
    Image out = screenshot;
    // Draw in id order so that higher ids end up on top.
    for (int id = 1; id <= static_cast<int>(view.interactable_count()); ++id) {
        const Element& e = state.elements[*view.index_of(ElementId{id})];
        const Rgb color = som_color(ElementId{id});
        const PixelBox p = to_pixels(e.bbox);
        out.fill_rect(p.x1, p.y1, p.x2, std::min(p.y1 + kStroke - 1, p.y2), color);
        out.fill_rect(p.x1, std::max(p.y2 - kStroke + 1, p.y1), p.x2, p.y2, color);
        out.fill_rect(p.x1, p.y1, std::min(p.x1 + kStroke - 1, p.x2), p.y2, color);
        out.fill_rect(std::max(p.x2 - kStroke + 1, p.x1), p.y1, p.x2, p.y2, color);

        const LabelPlacement label = label_placement(e.bbox, ElementId{id}, out.width(), out.height());
        out.fill_rect(label.x, label.y, label.x + label.width - 1, label.y + label.height - 1, color);
        const std::string text = std::to_string(id);
        for (std::size_t d = 0; d < text.size(); ++d) {
            const auto& glyph = kDigits[static_cast<std::size_t>(text[d] - '0')];
            const int gx = label.x + kLabelPad + static_cast<int>(d) * (kGlyphWidth + kGlyphGap);
            const int gy = label.y + kLabelPad;
            for (int row = 0; row < 7; ++row) {
                for (int col = 0; col < 5; ++col) {
                    if (glyph[static_cast<std::size_t>(row)] & (0x10 >> col)) {
                        out.fill_rect(gx + col * kGlyphScale, gy + row * kGlyphScale, gx + col * kGlyphScale + kGlyphScale - 1,
                                      gy + row * kGlyphScale + kGlyphScale - 1, kLabelInk);
                    }
                }
            }
        }
    }
    return out;
}

Observation build_observation(const EnvironmentState& state, const OrderedView& view, const AblationMask& mask,
                              const std::optional<Image>& screenshot) {
    const OrderedView presented = presented_view(state, view, mask);
    AblationMask fixed = mask;
    fixed.shuffle_order = false;

    Observation obs;
    if (mask.include_text_representation) {
        obs.text = serialize_text(presented, state, fixed);
    }
    if (mask.include_screenshot || mask.include_som) {
        Image base;
        if (mask.include_screenshot) {
            if (!screenshot) {
                throw Error(ErrorKind::ImageIo, "the mask includes the screenshot but none was supplied");
            }
            base = *screenshot;
        } else {
            base = Image(static_cast<int>(std::lround(state.viewport_width)),
                         static_cast<int>(std::lround(state.viewport_height)));
        }
        obs.image = mask.include_som ? render_som(base, presented, state) : base;
        if (!mask.include_som && (std::lround(state.viewport_width) != base.width() ||
                                  std::lround(state.viewport_height) != base.height())) {
            throw Error(ErrorKind::DimensionMismatch, "screenshot does not match the viewport");
        }
    }
    for (int id = 1; id <= static_cast<int>(presented.interactable_count()); ++id) {
        obs.id_map.emplace(id, *presented.index_of(ElementId{id}));
    }
    return obs;
}

} // namespace screenorder
