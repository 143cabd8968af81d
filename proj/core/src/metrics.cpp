#include "screenorder/metrics.hpp"

#include "screenorder/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace screenorder {

using nlohmann::json;

bool GoldTask::has_target_boxes() const {
    return std::any_of(target_boxes.begin(), target_boxes.end(), [](const auto& b) { return b.has_value(); });
}

void GoldTask::validate() const {
    if (target_boxes.size() != commands.size() || parameters.size() != commands.size()) {
        throw Error(ErrorKind::MalformedFile, "task " + task_id + ": actions, target_boxes and parameters lengths differ");
    }
}

int sequence_score(std::span<const ActionCommand> predicted, const GoldTask& gold) {
    if (predicted.size() != gold.commands.size()) {
        return 0;
    }
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        if (predicted[k].verb != gold.commands[k].verb) {
            return 0;
        }
    }
    return 1;
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string trimmed(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

// The argument compared against the gold parameter; drag's drop target is
// checked as an element instead.
std::optional<std::string> parameter_of(const ActionCommand& cmd) {
    if (cmd.verb == Verb::Drag || cmd.args.empty()) {
        return std::nullopt;
    }
    if (cmd.verb == Verb::Hotkey) {
        std::string joined;
        for (std::size_t i = 0; i < cmd.args.size(); ++i) {
            if (i) joined += '+';
            joined += cmd.args[i];
        }
        return joined;
    }
    return cmd.args.front();
}

bool element_matches(const ActionCommand& pred, const ActionCommand& gold, const std::optional<BoundingBox>& box,
                     const std::optional<ScoringContext>& context) {
    if (!gold.target_id && !box) {
        return true;
    }
    if (!pred.target_id) {
        return false;
    }
    if (box) {
        try {
            const Point c = resolve_target(*pred.target_id, *context->view, *context->state).center;
            return contains(*box, c);
        } catch (const Error& err) {
            if (err.kind() == ErrorKind::UnknownId) {
                return false;
            }
            throw;
        }
    }
    return pred.target_id == gold.target_id;
}

bool parameter_matches(const ActionCommand& pred, const ActionCommand& gold, const std::optional<std::string>& expected) {
    if (gold.verb == Verb::Drag) {
        if (pred.args.empty() || gold.args.empty()) {
            return pred.args.size() == gold.args.size();
        }
        return trimmed(pred.args.front()) == trimmed(gold.args.front());
    }
    const std::optional<std::string> want = expected ? expected : parameter_of(gold);
    const std::optional<std::string> got = parameter_of(pred);
    if (!want) {
        return true;
    }
    if (!got) {
        return false;
    }
    return is_key_verb(gold.verb) ? lower(trimmed(*got)) == lower(trimmed(*want)) : *got == *want;
}

} // namespace

int action_score(std::span<const ActionCommand> predicted, const GoldTask& gold,
                 const std::optional<ScoringContext>& context) {
    gold.validate();
    if (gold.has_target_boxes() && (!context || !context->state || !context->view)) {
        throw Error(ErrorKind::MissingState, "task " + gold.task_id + " has target boxes but no element state");
    }
    if (sequence_score(predicted, gold) == 0) {
        return 0;
    }
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        const ActionCommand& g = gold.commands[k];
        if (!element_matches(predicted[k], g, gold.target_boxes[k], context)) {
            return 0;
        }
        if (!parameter_matches(predicted[k], g, gold.parameters[k])) {
            return 0;
        }
    }
    return 1;
}

ScoreReport aggregate(std::vector<TaskScore> tasks) {
    if (tasks.empty()) {
        throw Error(ErrorKind::EmptySet, "no tasks to aggregate");
    }
    ScoreReport report;
    double seq = 0, act = 0;
    for (const TaskScore& t : tasks) {
        seq += t.sequence;
        act += t.action;
    }
    report.sequence_mean = seq / static_cast<double>(tasks.size());
    report.action_mean = act / static_cast<double>(tasks.size());
    report.tasks = std::move(tasks);
    return report;
}

namespace {

json parse_json(std::string_view document, const std::string& what) {
    try {
        return json::parse(document);
    } catch (const json::parse_error& err) {
        throw Error(ErrorKind::MalformedFile, what + ": " + err.what());
    }
}

const json& tasks_array(const json& root, const std::string& what) {
    if (!root.is_object() || !root.contains("tasks") || !root["tasks"].is_array()) {
        throw Error(ErrorKind::MalformedFile, what + ": expected {\"tasks\": [...]}");
    }
    return root["tasks"];
}

std::string task_id_of(const json& task, const std::string& where) {
    auto it = task.find("task_id");
    if (it == task.end()) {
        throw Error(ErrorKind::MalformedFile, where + ": missing task_id");
    }
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw Error(ErrorKind::MalformedFile, where + ": task_id must be a string or integer");
}

} // namespace

std::vector<GoldTask> parse_gold_tasks(std::string_view document, const std::filesystem::path& base_dir) {
    const json root = parse_json(document, "gold file");
    const json& tasks = tasks_array(root, "gold file");
    std::vector<GoldTask> out;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const json& t = tasks[i];
        const std::string where = "gold/tasks/" + std::to_string(i);
        if (!t.is_object()) {
            throw Error(ErrorKind::MalformedFile, where + ": expected an object");
        }
        GoldTask g;
        g.task_id = task_id_of(t, where);
        g.dialect = parse_dialect(t.value("dialect", std::string("omniact")));
        if (!t.contains("actions") || !t["actions"].is_array()) {
            throw Error(ErrorKind::MalformedFile, where + ": missing actions array");
        }
        for (const json& a : t["actions"]) {
            if (!a.is_string()) {
                throw Error(ErrorKind::MalformedFile, where + ": actions must be strings");
            }
            g.commands.push_back(parse_action(a.get<std::string>(), g.dialect));
        }
        g.target_boxes.assign(g.commands.size(), std::nullopt);
        g.parameters.assign(g.commands.size(), std::nullopt);
        if (auto boxes = t.find("target_boxes"); boxes != t.end()) {
            if (!boxes->is_array() || boxes->size() != g.commands.size()) {
                throw Error(ErrorKind::MalformedFile, where + ": target_boxes must match actions in length");
            }
            for (std::size_t k = 0; k < boxes->size(); ++k) {
                const json& b = (*boxes)[k];
                if (b.is_null()) continue;
                if (!b.is_array() || b.size() != 4) {
                    throw Error(ErrorKind::MalformedFile, where + ": target box must be [x1, y1, x2, y2]");
                }
                g.target_boxes[k] = BoundingBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                                b[3].get<double>()};
            }
        }
        if (auto params = t.find("parameters"); params != t.end()) {
            if (!params->is_array() || params->size() != g.commands.size()) {
                throw Error(ErrorKind::MalformedFile, where + ": parameters must match actions in length");
            }
            for (std::size_t k = 0; k < params->size(); ++k) {
                if (!(*params)[k].is_null()) {
                    g.parameters[k] = (*params)[k].get<std::string>();
                }
            }
        }
        if (auto e = t.find("elements"); e != t.end() && e->is_string()) {
            g.elements_path = base_dir / e->get<std::string>();
        }
        if (auto o = t.find("ordering"); o != t.end() && o->is_string()) {
            g.ordering_path = base_dir / o->get<std::string>();
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GoldTask> load_gold_tasks(const std::filesystem::path& path) {
    return parse_gold_tasks(read_text_file(path), path.parent_path());
}

std::vector<Prediction> parse_predictions(std::string_view document) {
    const json root = parse_json(document, "prediction file");
    const json& tasks = tasks_array(root, "prediction file");
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const json& t = tasks[i];
        const std::string where = "predictions/tasks/" + std::to_string(i);
        Prediction p;
        p.task_id = task_id_of(t, where);
        if (auto a = t.find("actions"); a != t.end()) {
            p.actions = a->get<std::vector<std::string>>();
        }
        if (auto r = t.find("response"); r != t.end()) {
            p.response = r->get<std::string>();
        }
        if (!p.actions && !p.response) {
            throw Error(ErrorKind::MalformedFile, where + ": needs actions or response");
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    return parse_predictions(read_text_file(path));
}

ScoreReport evaluate(std::span<const GoldTask> gold, std::span<const Prediction> predictions,
                     const std::optional<EnvironmentState>& fallback_state,
                     const std::optional<Ordering>& fallback_ordering) {
    std::map<std::string, const Prediction*> by_id;
    for (const Prediction& p : predictions) {
        by_id.emplace(p.task_id, &p);
    }
    std::vector<TaskScore> scores;
    for (const GoldTask& g : gold) {
        TaskScore score;
        score.task_id = g.task_id;
        auto it = by_id.find(g.task_id);
        if (it == by_id.end()) {
            score.note = "no prediction";
            scores.push_back(std::move(score));
            continue;
        }
        std::vector<ActionCommand> predicted;
        try {
            if (it->second->actions) {
                for (const std::string& line : *it->second->actions) {
                    predicted.push_back(parse_action(line, g.dialect));
                }
            } else {
                predicted = parse_response(*it->second->response, g.dialect);
            }
        } catch (const Error& err) {
            score.note = std::string("unparseable prediction: ") + err.what();
            scores.push_back(std::move(score));
            continue;
        }

        std::optional<EnvironmentState> state;
        std::optional<OrderedView> view;
        if (g.elements_path) {
            state = load_elements(*g.elements_path);
        } else if (fallback_state) {
            state = fallback_state;
        }
        if (state) {
            Ordering ordering = g.ordering_path ? load_ordering(*g.ordering_path, state->size())
                                : fallback_ordering && !g.elements_path ? *fallback_ordering
                                                                         : identity_ordering(state->size());
            view = apply_ordering(*state, ordering);
        }
        std::optional<ScoringContext> context;
        if (state && view) {
            context = ScoringContext{&*state, &*view};
        }
        score.sequence = sequence_score(predicted, g);
        score.action = action_score(predicted, g, context);
        scores.push_back(std::move(score));
    }
    return aggregate(std::move(scores));
}

json report_to_json(const ScoreReport& report) {
    json tasks = json::array();
    for (const TaskScore& t : report.tasks) {
        json entry{{"task_id", t.task_id}, {"sequence_score", t.sequence}, {"action_score", t.action}};
        if (!t.note.empty()) {
            entry["note"] = t.note;
        }
        tasks.push_back(std::move(entry));
    }
    return {{"tasks", std::move(tasks)},
            {"aggregate",
             {{"tasks", report.tasks.size()},
              {"sequence_score", report.sequence_mean},
              {"action_score", report.action_mean}}}};
}

std::string report_table(const ScoreReport& report) {
    std::size_t width = 7;
    for (const TaskScore& t : report.tasks) {
        width = std::max(width, t.task_id.size());
    }
    std::ostringstream out;
    auto row = [&](const std::string& id, const std::string& seq, const std::string& act, const std::string& note) {
        out << id << std::string(width - id.size() + 2, ' ') << seq << std::string(10 - std::min<std::size_t>(seq.size(), 9), ' ')
            << act;
        if (!note.empty()) {
            out << std::string(10 - std::min<std::size_t>(act.size(), 9), ' ') << note;
        }
        out << '\n';
    };
    row("task", "sequence", "action", "");
    for (const TaskScore& t : report.tasks) {
        row(t.task_id, std::to_string(t.sequence), std::to_string(t.action), t.note);
    }
    char seq[32], act[32];
    std::snprintf(seq, sizeof seq, "%.4f", report.sequence_mean);
    std::snprintf(act, sizeof act, "%.4f", report.action_mean);
    row("mean", seq, act, "");
    return out.str();
}

} // namespace screenorder
