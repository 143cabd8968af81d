#include "screenorder/core_model.hpp"

#include "screenorder/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace screenorder {

using nlohmann::json;

Point center(const BoundingBox& box) {
    auto half_up = [](double v) { return static_cast<long>(std::floor(v + 0.5)); };
    return {half_up((box.x1 + box.x2) / 2.0), half_up((box.y1 + box.y2) / 2.0)};
}

bool contains(const BoundingBox& box, Point p) {
    return box.x1 <= p.x && p.x <= box.x2 && box.y1 <= p.y && p.y <= box.y2;
}

bool is_valid_box(const BoundingBox& b) {
    for (double v : {b.x1, b.y1, b.x2, b.y2}) {
        if (!std::isfinite(v) || v < 0) {
            return false;
        }
    }
    return b.x1 <= b.x2 && b.y1 <= b.y2;
}

bool clamp_to_viewport(BoundingBox& box, double width, double height) {
    const BoundingBox before = box;
    box.x1 = std::clamp(box.x1, 0.0, width);
    box.x2 = std::clamp(box.x2, 0.0, width);
    box.y1 = std::clamp(box.y1, 0.0, height);
    box.y2 = std::clamp(box.y2, 0.0, height);
    return !(before == box);
}

std::string_view to_string(Violation::Kind kind) {
    switch (kind) {
    case Violation::Kind::InvalidBox: return "InvalidBox";
    case Violation::Kind::InconsistentInteractability: return "InconsistentInteractability";
    case Violation::Kind::ClampWarning: return "ClampWarning";
    case Violation::Kind::InvalidViewport: return "InvalidViewport";
    }
    return "Unknown";
}

namespace {

std::string box_string(const BoundingBox& b) {
    std::ostringstream out;
    out << '[' << b.x1 << ',' << b.y1 << ',' << b.x2 << ',' << b.y2 << ']';
    return out.str();
}

std::optional<std::string> interactability_problem(const Element& e) {
    if (!e.interactable && !e.actions.empty()) {
        return "non-interactable element carries actions";
    }
    if (e.interactable && e.actions.empty()) {
        return "interactable element has an empty action set";
    }
    if (e.interactable && e.is_static_text) {
        return "static text cannot be interactable";
    }
    return std::nullopt;
}

} // namespace

std::vector<Violation> validate_state(const EnvironmentState& state) {
    std::vector<Violation> report;
    const bool viewport_ok = std::isfinite(state.viewport_width) && std::isfinite(state.viewport_height) &&
                             state.viewport_width >= 0 && state.viewport_height >= 0;
    if (!viewport_ok) {
        report.push_back({Violation::Kind::InvalidViewport, std::nullopt, "viewport dimensions must be finite and >= 0"});
    }
    for (std::size_t i = 0; i < state.elements.size(); ++i) {
        const Element& e = state.elements[i];
        if (!is_valid_box(e.bbox)) {
            report.push_back({Violation::Kind::InvalidBox, i, "invalid box " + box_string(e.bbox)});
        } else if (viewport_ok) {
            BoundingBox clamped = e.bbox;
            if (clamp_to_viewport(clamped, state.viewport_width, state.viewport_height)) {
                report.push_back({Violation::Kind::ClampWarning, i,
                                  "box " + box_string(e.bbox) + " extends past the viewport"});
            }
        }
        if (auto problem = interactability_problem(e)) {
            report.push_back({Violation::Kind::InconsistentInteractability, i, *problem});
        }
    }
    return report;
}

namespace {

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::MalformedFile, where + ": " + what);
}

void reject_unknown(const json& object, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [key, value] : object.items()) {
        bool known = false;
        for (auto name : allowed) {
            known = known || key == name;
        }
        if (!known) {
            malformed(where, "unknown field '" + key + "'");
        }
    }
}

double number_field(const json& object, const char* key, const std::string& where) {
    auto it = object.find(key);
    if (it == object.end()) {
        malformed(where, std::string("missing field '") + key + "'");
    }
    if (!it->is_number()) {
        malformed(where + "/" + key, "expected a number");
    }
    return it->get<double>();
}

std::optional<std::string> optional_string(const json& object, const char* key, const std::string& where) {
    auto it = object.find(key);
    if (it == object.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_string()) {
        malformed(where + "/" + key, "expected a string");
    }
    return it->get<std::string>();
}

bool optional_bool(const json& object, const char* key, bool fallback, const std::string& where) {
    auto it = object.find(key);
    if (it == object.end()) {
        return fallback;
    }
    if (!it->is_boolean()) {
        malformed(where + "/" + key, "expected a boolean");
    }
    return it->get<bool>();
}

Element parse_element(const json& entry, const std::string& where) {
    if (!entry.is_object()) {
        malformed(where, "expected an object");
    }
    reject_unknown(entry, {"interactable", "bbox", "actions", "tag", "text", "alt_text", "caption", "static"}, where);

    Element e;
    auto interactable = entry.find("interactable");
    if (interactable == entry.end()) {
        malformed(where, "missing field 'interactable'");
    }
    if (!interactable->is_boolean()) {
        malformed(where + "/interactable", "expected a boolean");
    }
    e.interactable = interactable->get<bool>();

    auto bbox = entry.find("bbox");
    if (bbox == entry.end()) {
        malformed(where, "missing field 'bbox'");
    }
    if (!bbox->is_array() || bbox->size() != 4) {
        malformed(where + "/bbox", "expected [x1, y1, x2, y2]");
    }
    for (const auto& v : *bbox) {
        if (!v.is_number()) {
            malformed(where + "/bbox", "coordinates must be numbers");
        }
    }
    e.bbox = {(*bbox)[0].get<double>(), (*bbox)[1].get<double>(), (*bbox)[2].get<double>(),
              (*bbox)[3].get<double>()};

    if (auto actions = entry.find("actions"); actions != entry.end()) {
        if (!actions->is_array()) {
            malformed(where + "/actions", "expected an array of strings");
        }
        for (const auto& a : *actions) {
            if (!a.is_string()) {
                malformed(where + "/actions", "expected an array of strings");
            }
            e.actions.insert(a.get<std::string>());
        }
    }
    e.tag = optional_string(entry, "tag", where);
    e.text = optional_string(entry, "text", where);
    e.alt_text = optional_string(entry, "alt_text", where);
    e.caption = optional_string(entry, "caption", where);
    e.is_static_text = optional_bool(entry, "static", false, where);
    if (e.is_static_text && !e.tag) {
        e.tag = std::string(kStaticTextTag);
    }
    return e;
}

} // namespace

LoadResult parse_elements(std::string_view document) {
    json root;
    try {
        root = json::parse(document);
    } catch (const json::parse_error& err) {
        throw Error(ErrorKind::MalformedFile, err.what());
    }
    if (!root.is_object()) {
        malformed("/", "expected an object");
    }
    reject_unknown(root, {"viewport", "screenshot", "elements"}, "/");

    LoadResult result;
    EnvironmentState& state = result.state;

    auto viewport = root.find("viewport");
    if (viewport == root.end() || !viewport->is_object()) {
        malformed("/viewport", "expected an object {w, h}");
    }
    reject_unknown(*viewport, {"w", "h"}, "/viewport");
    state.viewport_width = number_field(*viewport, "w", "/viewport");
    state.viewport_height = number_field(*viewport, "h", "/viewport");
    if (!std::isfinite(state.viewport_width) || !std::isfinite(state.viewport_height) || state.viewport_width < 0 ||
        state.viewport_height < 0) {
        malformed("/viewport", "dimensions must be finite and >= 0");
    }
    state.screenshot_path = optional_string(root, "screenshot", "");

    auto elements = root.find("elements");
    if (elements == root.end() || !elements->is_array()) {
        malformed("/elements", "expected an array");
    }
    state.elements.reserve(elements->size());
    for (std::size_t i = 0; i < elements->size(); ++i) {
        const std::string where = "/elements/" + std::to_string(i);
        Element e = parse_element((*elements)[i], where);
        // Boxes may use any finite coordinates as long as they are ordered;
        // overflow (including negatives) is clamped with a warning.
        const BoundingBox& b = e.bbox;
        const bool finite =
            std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2);
        if (!finite || b.x2 < b.x1 || b.y2 < b.y1) {
            throw Error(ErrorKind::InvalidBox, where + "/bbox: " + box_string(b));
        }
        if (auto problem = interactability_problem(e)) {
            throw Error(ErrorKind::InconsistentInteractability, where + ": " + *problem);
        }
        BoundingBox clamped = e.bbox;
        if (clamp_to_viewport(clamped, state.viewport_width, state.viewport_height)) {
            result.warnings.push_back({Violation::Kind::ClampWarning, i,
                                       "box " + box_string(e.bbox) + " clamped to " + box_string(clamped)});
            e.bbox = clamped;
        }
        state.elements.push_back(std::move(e));
    }
    return result;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MalformedFile, "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::MalformedFile, "cannot write " + path.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

LoadResult load_elements_with_warnings(const std::filesystem::path& path) {
    return parse_elements(read_text_file(path));
}

EnvironmentState load_elements(const std::filesystem::path& path) {
    return load_elements_with_warnings(path).state;
}

nlohmann::json elements_to_json(const EnvironmentState& state) {
    json root;
    root["viewport"] = {{"w", state.viewport_width}, {"h", state.viewport_height}};
    if (state.screenshot_path) {
        root["screenshot"] = *state.screenshot_path;
    }
    json elements = json::array();
    for (const Element& e : state.elements) {
        json entry;
        entry["interactable"] = e.interactable;
        entry["bbox"] = {e.bbox.x1, e.bbox.y1, e.bbox.x2, e.bbox.y2};
        entry["actions"] = e.actions;
        if (e.tag) entry["tag"] = *e.tag;
        if (e.text) entry["text"] = *e.text;
        if (e.alt_text) entry["alt_text"] = *e.alt_text;
        if (e.caption) entry["caption"] = *e.caption;
        entry["static"] = e.is_static_text;
        elements.push_back(std::move(entry));
    }
    root["elements"] = std::move(elements);
    return root;
}

std::string serialize_elements(const EnvironmentState& state) {
    return elements_to_json(state).dump(2) + "\n";
}

void write_elements(const std::filesystem::path& path, const EnvironmentState& state) {
    write_text_file(path, serialize_elements(state));
}

} // namespace screenorder
