#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace screenorder {

/// Pixel rectangle with the origin at the top-left of the screenshot and y
/// growing downward. Valid boxes satisfy 0 <= x1 <= x2 and 0 <= y1 <= y2.
struct BoundingBox {
    double x1 = 0;
    double y1 = 0;
    double x2 = 0;
    double y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }

    bool operator==(const BoundingBox&) const = default;
};

struct Point {
    long x = 0;
    long y = 0;

    bool operator==(const Point&) const = default;
};

/// Integer pixel center, each coordinate rounded half-up.
Point center(const BoundingBox& box);

/// Inclusive containment test.
bool contains(const BoundingBox& box, Point p);

bool is_valid_box(const BoundingBox& box);

inline constexpr std::string_view kStaticTextTag = "StaticText";

/// One GUI element. Numeric ids are not stored here: they are derived from
/// the position of the element in an ordering (see ordering.hpp).
struct Element {
    bool interactable = false;
    BoundingBox bbox;
    std::set<std::string> actions;
    std::optional<std::string> tag;
    std::optional<std::string> text;
    std::optional<std::string> alt_text;
    std::optional<std::string> caption;
    bool is_static_text = false;

    bool operator==(const Element&) const = default;
};

/// Elements of one screen, in ingestion order. Element indices are 0-based
/// in memory; files and human-facing output use 1-based indices.
struct EnvironmentState {
    std::vector<Element> elements;
    double viewport_width = 0;
    double viewport_height = 0;
    std::optional<std::string> screenshot_path;

    std::size_t size() const { return elements.size(); }

    bool operator==(const EnvironmentState&) const = default;
};

struct Violation {
    enum class Kind { InvalidBox, InconsistentInteractability, ClampWarning, InvalidViewport };

    Kind kind;
    std::optional<std::size_t> element_index;
    std::string message;
};

std::string_view to_string(Violation::Kind kind);

/// Lists every invariant violation of `state`; empty iff the state is valid.
std::vector<Violation> validate_state(const EnvironmentState& state);

struct LoadResult {
    EnvironmentState state;
    /// Boxes clamped to the viewport during ingestion.
    std::vector<Violation> warnings;
};

/// Parses an element document (JSON text). Unknown fields are rejected.
/// Throws Error{MalformedFile | InvalidBox | InconsistentInteractability}.
LoadResult parse_elements(std::string_view document);
LoadResult load_elements_with_warnings(const std::filesystem::path& path);
EnvironmentState load_elements(const std::filesystem::path& path);

nlohmann::json elements_to_json(const EnvironmentState& state);
std::string serialize_elements(const EnvironmentState& state);
void write_elements(const std::filesystem::path& path, const EnvironmentState& state);

/// Clamps `box` into [0, w] x [0, h]. Returns true when anything moved.
bool clamp_to_viewport(BoundingBox& box, double width, double height);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

} // namespace screenorder
