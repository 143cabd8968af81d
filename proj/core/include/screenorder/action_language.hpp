#pragma once

#include "screenorder/core_model.hpp"
#include "screenorder/ordering.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace screenorder {

/// Which action vocabulary is in force: desktop (OmniACT) or web (VWA).
enum class Dialect { OmniAct, Vwa };

std::string_view to_string(Dialect dialect);
Dialect parse_dialect(std::string_view name);

enum class Verb {
    Click,
    DoubleClick,
    RightClick,
    Hover,
    Drag,
    Scroll,
    HorizontalScroll,
    Press,
    Hotkey,
    Write,
    Type,
    NewTab,
    TabFocus,
    TabClose,
    Goto,
    GoBack,
    GoForward,
    Stop,
};

/// Canonical spelling, e.g. "double_click".
std::string_view verb_name(Verb verb);
bool dialect_allows(Dialect dialect, Verb verb);
/// Verbs whose argument is an element on screen.
bool is_mouse_verb(Verb verb);
/// Verbs whose arguments are key names (compared case-insensitively).
bool is_key_verb(Verb verb);

/// One parsed high-level action. Element references live in `target_id`
/// (for drag, the drop target is args[0]); everything else is in `args`
/// verbatim.
struct ActionCommand {
    Verb verb = Verb::Click;
    std::optional<ElementId> target_id;
    std::vector<std::string> args;

    bool operator==(const ActionCommand&) const = default;
};

/// `verb [arg] [arg] ...`. Throws Error{UnknownVerb | ArityError | MalformedBrackets}.
ActionCommand parse_action(std::string_view line, Dialect dialect);

/// Parses the last ``` block following "In summary" (or the last block in the
/// text when the phrase is absent). Throws Error{NoActionBlock}; per-line
/// parse errors are rethrown with their line number within the block.
std::vector<ActionCommand> parse_response(std::string_view response, Dialect dialect);

/// Inverse of parse_action.
std::string render_action(const ActionCommand& command);

struct ResolvedTarget {
    std::size_t index = 0;
    const Element* element = nullptr;
    Point center;
};

/// Throws Error{UnknownId}.
ResolvedTarget resolve_target(ElementId id, const OrderedView& view, const EnvironmentState& state);

inline constexpr int kScrollAmount = 300;

/// Single line of pyautogui code (browser-level verbs emit symbolic
/// `browser.*` calls). Throws Error{UnknownId | UnsupportedVerb}.
std::string emit_pyautogui(const ActionCommand& command, Dialect dialect, const OrderedView& view,
                           const EnvironmentState& state);

/// Python single-quoted string literal.
std::string python_string(std::string_view text);

nlohmann::json command_to_json(const ActionCommand& command);
ActionCommand command_from_json(const nlohmann::json& record);

} // namespace screenorder
