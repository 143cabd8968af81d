#include "screenorder/dom.hpp"

#include "screenorder/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>

namespace screenorder::dom {

const std::string* DomNode::attribute(std::string_view name) const {
    auto it = attributes.find(std::string(name));
    return it == attributes.end() ? nullptr : &it->second;
}

namespace {

constexpr std::array kVoidTags{"area", "base", "br",    "col",   "embed", "hr",  "img",
                               "input", "link", "meta", "param", "source", "track", "wbr"};
constexpr std::array kRawTextTags{"script", "style"};
constexpr std::array kEscapableRawTextTags{"textarea", "title"};
// Start tags that close an open <p>.
constexpr std::array kClosesParagraph{"address", "article", "aside", "blockquote", "div",  "dl",     "fieldset",
                                      "footer",  "form",    "h1",    "h2",         "h3",   "h4",     "h5",
                                      "h6",      "header",  "hr",    "main",       "nav",  "ol",     "p",
                                      "pre",     "section", "table", "ul",         "figure", "details"};

template <std::size_t N>
bool one_of(std::string_view tag, const std::array<const char*, N>& set) {
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return tag == s; });
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

void validate_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            throw Error(ErrorKind::EncodingError, "invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        if (i + len > s.size()) {
            throw Error(ErrorKind::EncodingError, "truncated UTF-8 sequence at offset " + std::to_string(i));
        }
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                throw Error(ErrorKind::EncodingError, "invalid UTF-8 continuation at offset " + std::to_string(i + k));
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
        if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            throw Error(ErrorKind::EncodingError, "invalid UTF-8 code point at offset " + std::to_string(i));
        }
        i += len;
    }
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        cp = 0xFFFD;
    }
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

std::string decode_entities(std::string_view s) {
    struct Named {
        std::string_view name;
        std::uint32_t cp;
    };
    static constexpr std::array<Named, 8> kNamed{{{"amp", '&'},
                                                 {"lt", '<'},
                                                 {"gt", '>'},
                                                 {"quot", '"'},
                                                 {"apos", '\''},
                                                 {"nbsp", 0xA0},
                                                 {"copy", 0xA9},
                                                 {"hellip", 0x2026}}};
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out += s[i++];
            continue;
        }
        const std::size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out += s[i++];
            continue;
        }
        const std::string_view body = s.substr(i + 1, semi - i - 1);
        bool decoded = false;
        if (body.size() >= 2 && body[0] == '#') {
            const bool hex = body[1] == 'x' || body[1] == 'X';
            const std::string_view digits = body.substr(hex ? 2 : 1);
            std::uint32_t cp = 0;
            bool ok = !digits.empty();
            for (char c : digits) {
                const int v = hex ? (std::isxdigit(static_cast<unsigned char>(c))
                                         ? (std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                                                                                        : (std::tolower(c) - 'a' + 10))
                                         : -1)
                                  : (std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : -1);
                if (v < 0 || cp > 0x10FFFF) {
                    ok = false;
                    break;
                }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
            }
            if (ok) {
                append_utf8(out, cp);
                decoded = true;
            }
        } else {
            for (const Named& n : kNamed) {
                if (body == n.name) {
                    append_utf8(out, n.cp);
                    decoded = true;
                    break;
                }
            }
        }
        if (decoded) {
            i = semi + 1;
        } else {
            out += s[i++];
        }
    }
    return out;
}

class TreeBuilder {
public:
    TreeBuilder() {
        root_.tag = std::string(kDocumentTag);
        stack_.push_back(&root_);
    }

    void text(std::string content) {
        if (content.empty()) {
            return;
        }
        DomNode& parent = *stack_.back();
        if (!parent.children.empty() && parent.children.back().is_text()) {
            parent.children.back().text += content;
            return;
        }
        DomNode node;
        node.tag = std::string(kTextTag);
        node.text = std::move(content);
        parent.children.push_back(std::move(node));
    }

    /// Returns true when the element stays open (not void).
    bool start(std::string tag, std::map<std::string, std::string> attributes) {
        apply_implied_end_tags(tag);
        DomNode& parent = *stack_.back();
        DomNode node;
        node.tag = tag;
        node.attributes = std::move(attributes);
        parent.children.push_back(std::move(node));
        if (one_of(tag, kVoidTags)) {
            return false;
        }
        stack_.push_back(&parent.children.back());
        return true;
    }

    void end(std::string_view tag) {
        for (std::size_t k = stack_.size(); k-- > 1;) {
            if (stack_[k]->tag == tag) {
                stack_.resize(k);
                return;
            }
        }
        // Stray end tag: ignored.
    }

    DomNode finish() {
        stack_.clear();
        fill_direct_text(root_);
        return std::move(root_);
    }

private:
    bool open_until(std::string_view tag, std::initializer_list<std::string_view> barriers) const {
        for (std::size_t k = stack_.size(); k-- > 1;) {
            if (stack_[k]->tag == tag) {
                return true;
            }
            for (auto b : barriers) {
                if (stack_[k]->tag == b) {
                    return false;
                }
            }
        }
        return false;
    }

    void apply_implied_end_tags(std::string_view tag) {
        if (one_of(tag, kClosesParagraph) && open_until("p", {"button", "table", "td", "th", "li", "div"})) {
            end("p");
        }
        if (tag == "li" && open_until("li", {"ul", "ol"})) {
            end("li");
        }
        if ((tag == "dt" || tag == "dd")) {
            if (open_until("dt", {"dl"})) end("dt");
            if (open_until("dd", {"dl"})) end("dd");
        }
        if (tag == "option" && open_until("option", {"select", "datalist"})) {
            end("option");
        }
        if ((tag == "td" || tag == "th" || tag == "tr")) {
            if (open_until("td", {"table", "tr"})) end("td");
            if (open_until("th", {"table", "tr"})) end("th");
        }
        if (tag == "tr" && open_until("tr", {"table"})) {
            end("tr");
        }
    }

    static void fill_direct_text(DomNode& node) {
        if (node.is_text()) {
            return;
        }
        node.text.clear();
        for (DomNode& child : node.children) {
            if (child.is_text()) {
                node.text += child.text;
            } else {
                fill_direct_text(child);
            }
        }
    }

    DomNode root_;
    std::vector<DomNode*> stack_;
};

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.';
}

std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from) {
    for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size() && match; ++k) {
            match = std::tolower(static_cast<unsigned char>(haystack[i + k])) == needle[k];
        }
        if (match) {
            return i;
        }
    }
    return std::string_view::npos;
}

} // namespace

DomNode parse_html(std::string_view source) {
    validate_utf8(source);
    if (source.substr(0, 3) == "\xEF\xBB\xBF") {
        source.remove_prefix(3);
    }

    TreeBuilder builder;
    std::size_t i = 0;
    const std::size_t n = source.size();
    std::string pending;

    auto flush_text = [&] {
        builder.text(decode_entities(pending));
        pending.clear();
    };

    while (i < n) {
        if (source[i] != '<') {
            pending += source[i++];
            continue;
        }
        if (source.compare(i, 4, "<!--") == 0) {
            flush_text();
            const std::size_t close = source.find("-->", i + 4);
            i = close == std::string_view::npos ? n : close + 3;
            continue;
        }
        if (i + 1 < n && (source[i + 1] == '!' || source[i + 1] == '?')) {
            flush_text();
            const std::size_t close = source.find('>', i + 2);
            i = close == std::string_view::npos ? n : close + 1;
            continue;
        }
        if (i + 1 < n && source[i + 1] == '/') {
            std::size_t j = i + 2;
            while (j < n && is_name_char(source[j])) ++j;
            if (j == i + 2) {
                // "</" not followed by a name: skip the bogus tag.
                flush_text();
                const std::size_t close = source.find('>', i + 2);
                i = close == std::string_view::npos ? n : close + 1;
                continue;
            }
            flush_text();
            builder.end(lower(source.substr(i + 2, j - i - 2)));
            const std::size_t close = source.find('>', j);
            i = close == std::string_view::npos ? n : close + 1;
            continue;
        }
        if (i + 1 >= n || !std::isalpha(static_cast<unsigned char>(source[i + 1]))) {
            pending += source[i++];
            continue;
        }

        // Start tag.
        flush_text();
        std::size_t j = i + 1;
        while (j < n && is_name_char(source[j])) ++j;
        std::string tag = lower(source.substr(i + 1, j - i - 1));
        std::map<std::string, std::string> attributes;
        while (j < n) {
            while (j < n && (is_space(source[j]) || source[j] == '/')) ++j;
            if (j >= n || source[j] == '>') break;
            std::size_t k = j;
            while (k < n && !is_space(source[k]) && source[k] != '=' && source[k] != '>' && source[k] != '/') ++k;
            if (k == j) {
                ++j;
                continue;
            }
            std::string name = lower(source.substr(j, k - j));
            j = k;
            while (j < n && is_space(source[j])) ++j;
            std::string value;
            if (j < n && source[j] == '=') {
                ++j;
                while (j < n && is_space(source[j])) ++j;
                if (j < n && (source[j] == '"' || source[j] == '\'')) {
                    const char quote = source[j];
                    const std::size_t close = source.find(quote, j + 1);
                    const std::size_t stop = close == std::string_view::npos ? n : close;
                    value = decode_entities(source.substr(j + 1, stop - j - 1));
                    j = close == std::string_view::npos ? n : close + 1;
                } else {
                    std::size_t v = j;
                    while (v < n && !is_space(source[v]) && source[v] != '>') ++v;
                    value = decode_entities(source.substr(j, v - j));
                    j = v;
                }
            }
            attributes.emplace(std::move(name), std::move(value));
        }
        i = j < n ? j + 1 : n;

        const bool open = builder.start(tag, std::move(attributes));
        if (open && (one_of(tag, kRawTextTags) || one_of(tag, kEscapableRawTextTags))) {
            const std::string closing = "</" + tag;
            const std::size_t close = find_ci(source, closing, i);
            const std::size_t stop = close == std::string_view::npos ? n : close;
            const std::string_view body = source.substr(i, stop - i);
            builder.text(one_of(tag, kRawTextTags) ? std::string(body) : decode_entities(body));
            builder.end(tag);
            if (close == std::string_view::npos) {
                i = n;
            } else {
                const std::size_t gt = source.find('>', close);
                i = gt == std::string_view::npos ? n : gt + 1;
            }
        }
    }
    flush_text();
    return builder.finish();
}

namespace {

std::string escape(std::string_view s, bool attribute) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"':
            if (attribute) {
                out += "&quot;";
            } else {
                out += c;
            }
            break;
        default: out += c;
        }
    }
    return out;
}

void serialize_into(const DomNode& node, std::string& out, bool raw_parent) {
    if (node.is_text()) {
        out += raw_parent ? node.text : escape(node.text, false);
        return;
    }
    const bool document = node.tag == kDocumentTag;
    if (!document) {
        out += '<';
        out += node.tag;
        for (const auto& [name, value] : node.attributes) {
            out += ' ';
            out += name;
            out += "=\"";
            out += escape(value, true);
            out += '"';
        }
        out += '>';
        if (one_of(node.tag, kVoidTags)) {
            return;
        }
    }
    const bool raw = one_of(node.tag, kRawTextTags);
    for (const DomNode& child : node.children) {
        serialize_into(child, out, raw);
    }
    if (!document) {
        out += "</";
        out += node.tag;
        out += '>';
    }
}

} // namespace

std::string serialize_html(const DomNode& node) {
    std::string out;
    serialize_into(node, out, false);
    return out;
}

} // namespace screenorder::dom
