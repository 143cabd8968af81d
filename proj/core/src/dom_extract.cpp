#include "screenorder/dom.hpp"

#include "screenorder/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <nlohmann/json.hpp>

namespace screenorder::dom {

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    bool space = false;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f') {
            space = !out.empty();
            continue;
        }
        if (space) {
            out += ' ';
            space = false;
        }
        out += c;
    }
    return out;
}

namespace {

void gather_text(const DomNode& node, std::string& out) {
    if (node.is_text()) {
        out += node.text;
        out += ' ';
        return;
    }
    if (node.tag == "script" || node.tag == "style") {
        return;
    }
    for (const DomNode& child : node.children) {
        gather_text(child, out);
    }
}

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::size_t codepoints(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

constexpr std::array kSkippedTags{"head", "script", "style", "template", "noscript", "meta", "link", "title"};
constexpr std::array kBlockTags{"html",   "body",  "div",     "p",      "h1",       "h2",     "h3",   "h4",
                                "h5",     "h6",    "ul",      "ol",     "li",       "table",  "tr",   "form",
                                "section", "article", "header", "footer", "nav",    "main",   "aside", "blockquote",
                                "pre",    "dl",    "dt",      "dd",     "fieldset", "figure", "figcaption", "hr"};

template <std::size_t N>
bool one_of(std::string_view tag, const std::array<const char*, N>& set) {
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return tag == s; });
}

std::string input_type(const DomNode& node) {
    const std::string* type = node.attribute("type");
    return type && !type->empty() ? lower(*type) : std::string("text");
}

} // namespace

std::string descendant_text(const DomNode& node) {
    std::string raw;
    gather_text(node, raw);
    return collapse_whitespace(raw);
}

Classification classify_interactable(const DomNode& node, const InteractabilityRules& rules) {
    Classification out;
    if (node.is_text() || node.tag == kDocumentTag) {
        return out;
    }
    if (node.tag == "input" && input_type(node) == "hidden") {
        return out;
    }
    const std::string* role = node.attribute("role");
    out.interactable = rules.tags.contains(node.tag) ||
                       (rules.onclick_is_interactable && node.attribute("onclick") != nullptr) ||
                       (rules.role_button_is_interactable && role && lower(*role) == "button");
    if (!out.interactable) {
        return out;
    }
    out.actions.insert("click");
    const bool text_entry =
        node.tag == "textarea" || (node.tag == "input" && rules.text_entry_types.contains(input_type(node)));
    if (text_entry) {
        out.actions.insert("type");
    }
    return out;
}

Layout parse_layout(std::string_view document) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& err) {
        throw Error(ErrorKind::MalformedFile, std::string("layout: ") + err.what());
    }
    if (!root.is_object()) {
        throw Error(ErrorKind::MalformedFile, "layout: expected an object of node path -> [x1, y1, x2, y2]");
    }
    Layout layout;
    for (const auto& [path, box] : root.items()) {
        if (!box.is_array() || box.size() != 4 ||
            !std::all_of(box.begin(), box.end(), [](const auto& v) { return v.is_number(); })) {
            throw Error(ErrorKind::MalformedFile, "layout/" + path + ": expected [x1, y1, x2, y2]");
        }
        BoundingBox b{box[0].template get<double>(), box[1].template get<double>(), box[2].template get<double>(),
                      box[3].template get<double>()};
        if (b.x2 < b.x1 || b.y2 < b.y1) {
            throw Error(ErrorKind::InvalidBox, "layout/" + path);
        }
        layout.emplace(path, b);
    }
    return layout;
}

namespace {

// Calls visit(node, path) for every node below `node` in pre-order.
template <typename Visit>
void walk_paths(DomNode& node, const std::string& path, Visit& visit) {
    std::map<std::string, int> seen;
    for (DomNode& child : node.children) {
        const std::string step = child.is_text() ? "text()" : child.tag;
        const int k = ++seen[step];
        const std::string child_path = path + "/" + step + "[" + std::to_string(k) + "]";
        visit(child, child_path);
        walk_paths(child, child_path, visit);
    }
}

bool has_any_box(const DomNode& node) {
    if (node.layout_box) {
        return true;
    }
    return std::any_of(node.children.begin(), node.children.end(), [](const DomNode& c) { return has_any_box(c); });
}

struct Pending {
    Element element;
    std::optional<BoundingBox> box;
    int block = 0;
    bool break_before = false;
    double synthetic_width = 0;
};

class Extractor {
public:
    explicit Extractor(const ExtractOptions& options) : options_(options) {}

    void visit(const DomNode& node, bool inside_interactable, const std::optional<BoundingBox>& inherited, int block) {
        const std::optional<BoundingBox> box = node.layout_box ? node.layout_box : inherited;
        if (node.is_text()) {
            std::string text = collapse_whitespace(node.text);
            if (!inside_interactable && !text.empty()) {
                Element e;
                e.tag = std::string(kStaticTextTag);
                e.is_static_text = true;
                e.text = text;
                emit(std::move(e), box, block, kCharWidth * static_cast<double>(codepoints(text)));
            }
            return;
        }
        if (one_of(node.tag, kSkippedTags)) {
            return;
        }
        if (node.tag == "br") {
            break_next_ = true;
            return;
        }
        if (node.tag != kDocumentTag && one_of(node.tag, kBlockTags)) {
            block = ++block_counter_;
        }

        const Classification c = classify_interactable(node, options_.rules);
        if (c.interactable) {
            Element e;
            e.interactable = true;
            e.actions = c.actions;
            e.tag = upper(node.tag);
            e.text = interactable_text(node);
            if (const std::string* alt = node.attribute("alt"); alt && node.tag == "img") {
                e.alt_text = *alt;
            }
            emit(std::move(e), box, block, synthetic_width(node));
            inside_interactable = true;
        } else if (node.tag == "img" && !inside_interactable) {
            Element e;
            e.tag = "IMG";
            if (const std::string* alt = node.attribute("alt")) {
                e.alt_text = *alt;
            }
            emit(std::move(e), box, block, synthetic_width(node));
        }
        for (const DomNode& child : node.children) {
            visit(child, inside_interactable, box, block);
        }
    }

    EnvironmentState finish(bool synthetic) {
        EnvironmentState state;
        state.viewport_width = options_.viewport_width;
        state.viewport_height = options_.viewport_height;
        if (synthetic) {
            layout_synthetic(state);
        } else {
            for (std::size_t i = 0; i < pending_.size(); ++i) {
                if (!pending_[i].box) {
                    throw Error(ErrorKind::MissingLayout,
                                "no layout box for extracted element " + std::to_string(i + 1));
                }
                pending_[i].element.bbox = *pending_[i].box;
                clamp_to_viewport(pending_[i].element.bbox, state.viewport_width, state.viewport_height);
            }
        }
        for (Pending& p : pending_) {
            state.elements.push_back(std::move(p.element));
        }
        return state;
    }

private:
    static std::string interactable_text(const DomNode& node) {
        if (node.tag == "input") {
            for (const char* name : {"value", "placeholder", "aria-label"}) {
                if (const std::string* v = node.attribute(name); v && !v->empty()) {
                    return collapse_whitespace(*v);
                }
            }
            return {};
        }
        std::string text = descendant_text(node);
        if (!text.empty()) {
            return text;
        }
        for (const char* name : {"aria-label", "title"}) {
            if (const std::string* v = node.attribute(name); v && !v->empty()) {
                return collapse_whitespace(*v);
            }
        }
        return {};
    }

    static double synthetic_width(const DomNode& node) {
        if (node.tag == "img") return 64;
        if (node.tag == "input" || node.tag == "select" || node.tag == "textarea") return 160;
        return kCharWidth * static_cast<double>(codepoints(descendant_text(node)));
    }

    void emit(Element e, const std::optional<BoundingBox>& box, int block, double width) {
        pending_.push_back({std::move(e), box, block, break_next_, width});
        break_next_ = false;
    }

    // Left-aligned flow: elements share a line while they belong to the same
    // block and fit; each line is kLineHeight tall.
    void layout_synthetic(EnvironmentState& state) {
        const double max_x = state.viewport_width;
        double x = 0;
        int line = -1;
        int previous_block = -1;
        for (Pending& p : pending_) {
            const double width = std::min(std::max(p.synthetic_width, kCharWidth), max_x);
            const bool new_line = line < 0 || p.break_before || p.block != previous_block || x + width > max_x;
            if (new_line) {
                ++line;
                x = 0;
            }
            const double y = kLineHeight * line;
            p.element.bbox = {x, y, x + width, y + kLineHeight};
            x += width + kCharWidth;
            previous_block = p.block;
        }
        // The synthetic page is a full-page capture: grow the viewport to fit.
        const double content_height = kLineHeight * (line + 1);
        state.viewport_height = std::max(state.viewport_height, content_height);
    }

    const ExtractOptions& options_;
    std::vector<Pending> pending_;
    int block_counter_ = 0;
    bool break_next_ = false;
};

} // namespace

void attach_layout(DomNode& root, const Layout& layout) {
    auto assign = [&](DomNode& node, const std::string& path) {
        if (auto it = layout.find(path); it != layout.end()) {
            node.layout_box = it->second;
        }
    };
    walk_paths(root, "", assign);
}

EnvironmentState extract_elements(const DomNode& root, const ExtractOptions& options) {
    const bool snapshot = has_any_box(root);
    if (!snapshot && !options.synthetic_layout) {
        throw Error(ErrorKind::MissingLayout, "document carries no layout boxes and synthetic layout is disabled");
    }
    Extractor extractor(options);
    extractor.visit(root, false, std::nullopt, 0);
    return extractor.finish(!snapshot);
}

} // namespace screenorder::dom
