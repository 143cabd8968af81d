#pragma once

#include "screenorder/core_model.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace screenorder::dom {

inline constexpr std::string_view kDocumentTag = "#document";
inline constexpr std::string_view kTextTag = "#text";

/// Parsed document node. Text runs are kept as "#text" children so that
/// document order is exact; `text` on an element holds the concatenation of
/// its direct text children.
struct DomNode {
    std::string tag;
    std::map<std::string, std::string> attributes;
    std::string text;
    std::vector<DomNode> children;
    std::optional<BoundingBox> layout_box;

    bool is_text() const { return tag == kTextTag; }
    const std::string* attribute(std::string_view name) const;

    bool operator==(const DomNode&) const = default;
};

/// Tolerant parse: unknown or misnested markup never fails, unclosed
/// elements are closed when an ancestor closes, and the usual implied end
/// tags (p, li, option, dt/dd, tr/td/th) are honoured. Throws
/// Error{EncodingError} when `source` is not valid UTF-8.
DomNode parse_html(std::string_view source);

std::string serialize_html(const DomNode& node);

std::string collapse_whitespace(std::string_view text);

/// Concatenated text of all descendant text nodes, whitespace collapsed.
std::string descendant_text(const DomNode& node);

struct InteractabilityRules {
    std::set<std::string> tags{"a", "button", "input", "select", "textarea", "option"};
    /// input types that accept typing; an input without a type is "text".
    std::set<std::string> text_entry_types{"text", "search", "email", "password", "url", "tel", "number"};
    bool onclick_is_interactable = true;
    bool role_button_is_interactable = true;
};

struct Classification {
    bool interactable = false;
    std::set<std::string> actions;

    bool operator==(const Classification&) const = default;
};

Classification classify_interactable(const DomNode& node, const InteractabilityRules& rules = {});

/// Node path -> box, e.g. "/html[1]/body[1]/p[2]" (1-based index among
/// same-tag siblings). Text nodes use ".../text()[k]".
using Layout = std::map<std::string, BoundingBox>;

Layout parse_layout(std::string_view document);

/// Copies sidecar boxes onto the matching nodes.
void attach_layout(DomNode& root, const Layout& layout);

/// Synthetic flow layout constants.
inline constexpr double kLineHeight = 20;
inline constexpr double kCharWidth = 8;

struct ExtractOptions {
    double viewport_width = 1280;
    double viewport_height = 720;
    /// Used only when no node in the tree carries a layout box.
    bool synthetic_layout = true;
    InteractabilityRules rules;
};

/// Emits elements in pre-order: interactable nodes (text folded in from
/// their descendants), images, and non-empty text runs outside interactable
/// nodes. Throws Error{MissingLayout} when an emitted element has no box.
EnvironmentState extract_elements(const DomNode& root, const ExtractOptions& options);

} // namespace screenorder::dom
