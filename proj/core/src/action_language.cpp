#include "screenorder/action_language.hpp"

#include "screenorder/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

#include <nlohmann/json.hpp>

namespace screenorder {

std::string_view to_string(Dialect dialect) {
    return dialect == Dialect::OmniAct ? "omniact" : "vwa";
}

Dialect parse_dialect(std::string_view name) {
    if (name == "omniact") return Dialect::OmniAct;
    if (name == "vwa") return Dialect::Vwa;
    throw Error(ErrorKind::Config, "unknown dialect '" + std::string(name) + "' (expected omniact or vwa)");
}

namespace {

constexpr std::array kAllVerbs{Verb::Click,  Verb::DoubleClick, Verb::RightClick, Verb::Hover,    Verb::Drag,
                               Verb::Scroll, Verb::HorizontalScroll, Verb::Press, Verb::Hotkey,   Verb::Write,
                               Verb::Type,   Verb::NewTab,      Verb::TabFocus,   Verb::TabClose, Verb::Goto,
                               Verb::GoBack, Verb::GoForward,   Verb::Stop};

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string_view trim(std::string_view s) {
    auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && space(s.front())) s.remove_prefix(1);
    while (!s.empty() && space(s.back())) s.remove_suffix(1);
    return s;
}

// "Double Click" / "double-click" / "double_click" -> "double_click".
std::string normalize_verb(std::string_view raw) {
    std::string out;
    for (char c : trim(raw)) {
        if (c == ' ' || c == '_' || c == '-' || c == '\t') {
            if (!out.empty() && out.back() != '_') out += '_';
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::optional<Verb> lookup_verb(std::string_view normalized) {
    for (Verb v : kAllVerbs) {
        if (normalized == verb_name(v)) return v;
    }
    struct Alias {
        std::string_view name;
        Verb verb;
    };
    static constexpr std::array<Alias, 9> kAliases{{{"move", Verb::Hover},
                                                    {"move/hover", Verb::Hover},
                                                    {"doubleclick", Verb::DoubleClick},
                                                    {"rightclick", Verb::RightClick},
                                                    {"keyboard_hotkey", Verb::Hotkey},
                                                    {"hscroll", Verb::HorizontalScroll},
                                                    {"newtab", Verb::NewTab},
                                                    {"goback", Verb::GoBack},
                                                    {"goforward", Verb::GoForward}}};
    for (const Alias& a : kAliases) {
        if (normalized == a.name) return a.verb;
    }
    return std::nullopt;
}

std::optional<int> parse_id(std::string_view s) {
    s = trim(s);
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return value;
}

[[noreturn]] void arity(Verb verb, const std::string& what) {
    throw Error(ErrorKind::ArityError, std::string(verb_name(verb)) + ": " + what);
}

ElementId require_id(Verb verb, const std::string& arg) {
    auto id = parse_id(arg);
    if (!id) {
        arity(verb, "expected a numeric element id, got '" + arg + "'");
    }
    return ElementId{*id};
}

void require_count(Verb verb, const std::vector<std::string>& args, std::size_t count) {
    if (args.size() != count) {
        arity(verb, "expected " + std::to_string(count) + " bracketed argument(s), got " + std::to_string(args.size()));
    }
}

void require_direction(Verb verb, const std::string& arg, std::string_view a, std::string_view b) {
    const std::string v = lower(trim(arg));
    if (v != a && v != b) {
        arity(verb, "expected " + std::string(a) + " or " + std::string(b) + ", got '" + arg + "'");
    }
}

// Moves the raw bracket list into the typed command, checking arity.
ActionCommand shape(Verb verb, Dialect dialect, std::vector<std::string> args) {
    ActionCommand cmd;
    cmd.verb = verb;
    switch (verb) {
    case Verb::Click:
    case Verb::DoubleClick:
    case Verb::RightClick:
    case Verb::Hover:
        require_count(verb, args, 1);
        cmd.target_id = require_id(verb, args[0]);
        break;
    case Verb::Drag:
        require_count(verb, args, 2);
        cmd.target_id = require_id(verb, args[0]);
        require_id(verb, args[1]);
        cmd.args = {args[1]};
        break;
    case Verb::Scroll:
        require_count(verb, args, 1);
        require_direction(verb, args[0], "up", "down");
        cmd.args = std::move(args);
        break;
    case Verb::HorizontalScroll:
        require_count(verb, args, 1);
        require_direction(verb, args[0], "left", "right");
        cmd.args = std::move(args);
        break;
    case Verb::Press:
    case Verb::Write:
    case Verb::Goto:
        require_count(verb, args, 1);
        cmd.args = std::move(args);
        break;
    case Verb::Type:
        if (dialect == Dialect::Vwa) {
            require_count(verb, args, 2);
            cmd.target_id = require_id(verb, args[0]);
            cmd.args = {args[1]};
        } else {
            require_count(verb, args, 1);
            cmd.args = std::move(args);
        }
        break;
    case Verb::Hotkey:
        if (args.size() < 2) {
            arity(verb, "expected at least 2 keys");
        }
        cmd.args = std::move(args);
        break;
    case Verb::TabFocus:
        require_count(verb, args, 1);
        if (!parse_id(args[0])) {
            arity(verb, "expected a numeric tab index");
        }
        cmd.args = std::move(args);
        break;
    case Verb::NewTab:
    case Verb::TabClose:
    case Verb::GoBack:
    case Verb::GoForward:
        require_count(verb, args, 0);
        break;
    case Verb::Stop:
        if (args.size() > 1) {
            arity(verb, "expected at most one answer");
        }
        cmd.args = std::move(args);
        break;
    }
    return cmd;
}

} // namespace

std::string_view verb_name(Verb verb) {
    switch (verb) {
    case Verb::Click: return "click";
    case Verb::DoubleClick: return "double_click";
    case Verb::RightClick: return "right_click";
    case Verb::Hover: return "hover";
    case Verb::Drag: return "drag";
    case Verb::Scroll: return "scroll";
    case Verb::HorizontalScroll: return "horizontal_scroll";
    case Verb::Press: return "press";
    case Verb::Hotkey: return "hotkey";
    case Verb::Write: return "write";
    case Verb::Type: return "type";
    case Verb::NewTab: return "new_tab";
    case Verb::TabFocus: return "tab_focus";
    case Verb::TabClose: return "tab_close";
    case Verb::Goto: return "goto";
    case Verb::GoBack: return "go_back";
    case Verb::GoForward: return "go_forward";
    case Verb::Stop: return "stop";
    }
    return "unknown";
}

bool dialect_allows(Dialect dialect, Verb verb) {
    switch (verb) {
    case Verb::Click:
    case Verb::Hover:
    case Verb::Scroll:
    case Verb::Press:
    case Verb::Type:
        return true;
    case Verb::DoubleClick:
    case Verb::RightClick:
    case Verb::Drag:
    case Verb::HorizontalScroll:
    case Verb::Hotkey:
    case Verb::Write:
        return dialect == Dialect::OmniAct;
    case Verb::NewTab:
    case Verb::TabFocus:
    case Verb::TabClose:
    case Verb::Goto:
    case Verb::GoBack:
    case Verb::GoForward:
    case Verb::Stop:
        return dialect == Dialect::Vwa;
    }
    return false;
}

bool is_mouse_verb(Verb verb) {
    return verb == Verb::Click || verb == Verb::DoubleClick || verb == Verb::RightClick || verb == Verb::Hover ||
           verb == Verb::Drag;
}

bool is_key_verb(Verb verb) {
    return verb == Verb::Press || verb == Verb::Hotkey || verb == Verb::Scroll || verb == Verb::HorizontalScroll;
}

ActionCommand parse_action(std::string_view line, Dialect dialect) {
    line = trim(line);
    const std::size_t first_bracket = line.find('[');
    const std::string_view head = line.substr(0, first_bracket);

    // The verb may span several words ("double click"); anything left over
    // before the first bracket is an unbracketed argument.
    std::optional<Verb> verb;
    std::size_t verb_end = 0;
    std::size_t pos = 0;
    for (int words = 0; words < 3 && pos < head.size(); ++words) {
        while (pos < head.size() && head[pos] == ' ') ++pos;
        std::size_t end = head.find(' ', pos);
        end = end == std::string_view::npos ? head.size() : end;
        if (auto v = lookup_verb(normalize_verb(head.substr(0, end)))) {
            verb = v;
            verb_end = end;
        }
        pos = end;
    }
    if (!verb) {
        throw Error(ErrorKind::UnknownVerb, "unknown action '" + std::string(trim(head)) + "'");
    }
    if (!trim(head.substr(verb_end)).empty()) {
        throw Error(ErrorKind::MalformedBrackets,
                    "arguments must be bracketed: '" + std::string(line) + "'");
    }
    if (!dialect_allows(dialect, *verb)) {
        throw Error(ErrorKind::UnknownVerb, std::string(verb_name(*verb)) + " is not an action of the " +
                                                std::string(to_string(dialect)) + " dialect");
    }

    std::vector<std::string> args;
    std::size_t i = first_bracket == std::string_view::npos ? line.size() : first_bracket;
    while (i < line.size()) {
        if (line[i] == ' ' || line[i] == '\t') {
            ++i;
            continue;
        }
        if (line[i] != '[') {
            throw Error(ErrorKind::MalformedBrackets, "unexpected text after arguments: '" + std::string(line) + "'");
        }
        const std::size_t close = line.find(']', i + 1);
        if (close == std::string_view::npos) {
            throw Error(ErrorKind::MalformedBrackets, "unclosed bracket: '" + std::string(line) + "'");
        }
        const std::string_view body = line.substr(i + 1, close - i - 1);
        if (body.find('[') != std::string_view::npos) {
            throw Error(ErrorKind::MalformedBrackets, "nested bracket: '" + std::string(line) + "'");
        }
        args.emplace_back(body);
        i = close + 1;
    }
    return shape(*verb, dialect, std::move(args));
}

std::vector<ActionCommand> parse_response(std::string_view response, Dialect dialect) {
    std::size_t start = 0;
    const std::string lowered = lower(response);
    if (const std::size_t phrase = lowered.rfind("in summary"); phrase != std::string::npos) {
        start = phrase;
    }
    std::vector<std::size_t> fences;
    for (std::size_t at = response.find("```", start); at != std::string_view::npos;
         at = response.find("```", at + 3)) {
        fences.push_back(at);
    }
    if (fences.size() < 2) {
        throw Error(ErrorKind::NoActionBlock, "no ``` action block in the response");
    }
    const std::size_t pairs = fences.size() / 2;
    const std::size_t open = fences[2 * (pairs - 1)] + 3;
    const std::size_t close = fences[2 * (pairs - 1) + 1];
    std::string_view block = response.substr(open, close - open);

    std::vector<std::string_view> lines;
    for (std::size_t from = 0; from <= block.size();) {
        std::size_t nl = block.find('\n', from);
        nl = nl == std::string_view::npos ? block.size() : nl;
        lines.push_back(block.substr(from, nl - from));
        from = nl + 1;
    }
    // An info string such as ```text on the opening line is not an action.
    if (lines.size() > 1) {
        const std::string_view info = trim(lines.front());
        const bool word = !info.empty() && std::all_of(info.begin(), info.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '+';
        });
        if (word && !lookup_verb(normalize_verb(info))) {
            lines.front() = {};
        }
    }

    std::vector<ActionCommand> commands;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        if (trim(lines[k]).empty()) {
            continue;
        }
        try {
            commands.push_back(parse_action(lines[k], dialect));
        } catch (const Error& err) {
            throw Error(err.kind(), "action line " + std::to_string(k + 1) + ": " +
                                        std::string(err.what()).substr(to_string(err.kind()).size() + 2));
        }
    }
    return commands;
}

std::string render_action(const ActionCommand& command) {
    std::string out(verb_name(command.verb));
    if (command.target_id) {
        out += " [" + std::to_string(command.target_id->value) + "]";
    }
    for (const std::string& arg : command.args) {
        out += " [" + arg + "]";
    }
    return out;
}

ResolvedTarget resolve_target(ElementId id, const OrderedView& view, const EnvironmentState& state) {
    const auto index = view.index_of(id);
    if (!index || *index >= state.size()) {
        throw Error(ErrorKind::UnknownId, "no element with id " + std::to_string(id.value) + " (" +
                                              std::to_string(view.interactable_count()) + " interactable elements)");
    }
    const Element& e = state.elements[*index];
    return {*index, &e, center(e.bbox)};
}

std::string python_string(std::string_view text) {
    std::string out = "'";
    for (char c : text) {
        if (c == '\\' || c == '\'') {
            out += '\\';
        }
        out += c;
    }
    out += '\'';
    return out;
}

namespace {

std::string xy(Point p) {
    return std::to_string(p.x) + ", " + std::to_string(p.y);
}

std::string key_list(const std::vector<std::string>& keys) {
    std::string out;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (i) out += ", ";
        out += python_string(keys[i]);
    }
    return out;
}

std::string press_call(const std::string& key) {
    // "ctrl+c" is a combination, a bare "+" is the plus key.
    if (key.size() > 1 && key.find('+') != std::string::npos) {
        std::vector<std::string> keys;
        std::size_t from = 0;
        for (std::size_t plus = key.find('+'); plus != std::string::npos; plus = key.find('+', from)) {
            keys.push_back(key.substr(from, plus - from));
            from = plus + 1;
        }
        keys.push_back(key.substr(from));
        if (std::none_of(keys.begin(), keys.end(), [](const std::string& k) { return k.empty(); })) {
            return "pyautogui.hotkey(" + key_list(keys) + ")";
        }
    }
    return "pyautogui.press(" + python_string(key) + ")";
}

} // namespace

std::string emit_pyautogui(const ActionCommand& cmd, Dialect dialect, const OrderedView& view,
                           const EnvironmentState& state) {
    if (!dialect_allows(dialect, cmd.verb)) {
        throw Error(ErrorKind::UnsupportedVerb, std::string(verb_name(cmd.verb)) + " is not available in the " +
                                                    std::string(to_string(dialect)) + " dialect");
    }
    auto target = [&]() {
        if (!cmd.target_id) {
            throw Error(ErrorKind::UnknownId, std::string(verb_name(cmd.verb)) + " needs an element id");
        }
        return resolve_target(*cmd.target_id, view, state).center;
    };
    auto arg = [&](std::size_t k) -> const std::string& {
        if (k >= cmd.args.size()) {
            throw Error(ErrorKind::ArityError, std::string(verb_name(cmd.verb)) + ": missing argument");
        }
        return cmd.args[k];
    };

    switch (cmd.verb) {
    case Verb::Click: return "pyautogui.click(" + xy(target()) + ")";
    case Verb::DoubleClick: return "pyautogui.doubleClick(" + xy(target()) + ")";
    case Verb::RightClick: return "pyautogui.rightClick(" + xy(target()) + ")";
    case Verb::Hover: return "pyautogui.moveTo(" + xy(target()) + ")";
    case Verb::Drag: {
        const Point from = target();
        const auto to_id = parse_id(arg(0));
        if (!to_id) {
            throw Error(ErrorKind::ArityError, "drag: drop target must be an element id");
        }
        const Point to = resolve_target(ElementId{*to_id}, view, state).center;
        return "pyautogui.moveTo(" + xy(from) + "); pyautogui.dragTo(" + xy(to) + ", button='left')";
    }
    case Verb::Scroll: {
        const bool up = lower(trim(arg(0))) == "up";
        return "pyautogui.scroll(" + std::to_string(up ? kScrollAmount : -kScrollAmount) + ")";
    }
    case Verb::HorizontalScroll: {
        const bool right = lower(trim(arg(0))) == "right";
        return "pyautogui.hscroll(" + std::to_string(right ? kScrollAmount : -kScrollAmount) + ")";
    }
    case Verb::Press: return press_call(arg(0));
    case Verb::Hotkey: return "pyautogui.hotkey(" + key_list(cmd.args) + ")";
    case Verb::Write: return "pyautogui.write(" + python_string(arg(0)) + ")";
    case Verb::Type:
        if (dialect == Dialect::Vwa) {
            return "pyautogui.click(" + xy(target()) + "); pyautogui.write(" + python_string(arg(0)) + ")";
        }
        return "pyautogui.write(" + python_string(arg(0)) + ")";
    case Verb::NewTab: return "browser.new_tab()";
    case Verb::TabFocus: return "browser.tab_focus(" + std::to_string(*parse_id(arg(0))) + ")";
    case Verb::TabClose: return "browser.tab_close()";
    case Verb::Goto: return "browser.goto(" + python_string(arg(0)) + ")";
    case Verb::GoBack: return "browser.go_back()";
    case Verb::GoForward: return "browser.go_forward()";
    case Verb::Stop: return cmd.args.empty() ? "browser.stop()" : "browser.stop(" + python_string(arg(0)) + ")";
    }
    throw Error(ErrorKind::UnsupportedVerb, "unhandled verb");
}

nlohmann::json command_to_json(const ActionCommand& command) {
    nlohmann::json out;
    out["verb"] = std::string(verb_name(command.verb));
    out["target_id"] = command.target_id ? nlohmann::json(command.target_id->value) : nlohmann::json(nullptr);
    out["args"] = command.args;
    return out;
}

ActionCommand command_from_json(const nlohmann::json& record) {
    if (!record.is_object() || !record.contains("verb") || !record["verb"].is_string()) {
        throw Error(ErrorKind::MalformedFile, "command record needs a string 'verb'");
    }
    auto verb = lookup_verb(normalize_verb(record["verb"].get<std::string>()));
    if (!verb) {
        throw Error(ErrorKind::UnknownVerb, record["verb"].get<std::string>());
    }
    ActionCommand cmd;
    cmd.verb = *verb;
    if (auto it = record.find("target_id"); it != record.end() && !it->is_null()) {
        if (!it->is_number_integer()) {
            throw Error(ErrorKind::MalformedFile, "target_id must be an integer");
        }
        cmd.target_id = ElementId{it->get<int>()};
    }
    if (auto it = record.find("args"); it != record.end()) {
        cmd.args = it->get<std::vector<std::string>>();
    }
    return cmd;
}

} // namespace screenorder
