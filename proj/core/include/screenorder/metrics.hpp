#pragma once

#include "screenorder/action_language.hpp"
#include "screenorder/core_model.hpp"
#include "screenorder/ordering.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace screenorder {

struct GoldTask {
    std::string task_id;
    Dialect dialect = Dialect::OmniAct;
    std::vector<ActionCommand> commands;
    /// Per command: box the predicted click must land in.
    std::vector<std::optional<BoundingBox>> target_boxes;
    /// Per command: expected parameter string (overrides the gold args).
    std::vector<std::optional<std::string>> parameters;
    /// Optional element / ordering files the predictions were emitted against.
    std::optional<std::filesystem::path> elements_path;
    std::optional<std::filesystem::path> ordering_path;

    bool has_target_boxes() const;
    /// Throws Error{MalformedFile} when the per-command lists disagree in length.
    void validate() const;
};

/// State and ordering used to turn predicted ids into screen coordinates.
struct ScoringContext {
    const EnvironmentState* state = nullptr;
    const OrderedView* view = nullptr;
};

/// 1 iff the verb sequences are equal (order-sensitive, arguments ignored).
int sequence_score(std::span<const ActionCommand> predicted, const GoldTask& gold);

/// 1 iff sequence_score is 1 and every position matches its element
/// (center inside the gold box, or equal ids without a box) and its
/// parameter (key names case-insensitive, free text case-sensitive).
/// Throws Error{MissingState} when gold boxes exist and `context` is empty.
int action_score(std::span<const ActionCommand> predicted, const GoldTask& gold,
                 const std::optional<ScoringContext>& context = std::nullopt);

struct TaskScore {
    std::string task_id;
    int sequence = 0;
    int action = 0;
    std::string note;
};

struct ScoreReport {
    std::vector<TaskScore> tasks;
    double sequence_mean = 0;
    double action_mean = 0;
};

/// Unweighted means over tasks. Throws Error{EmptySet}.
ScoreReport aggregate(std::vector<TaskScore> tasks);

/// Gold file: {"tasks": [{"task_id", "dialect", "actions": ["click [1]", ...],
/// "target_boxes": [[x1,y1,x2,y2] | null, ...], "parameters": [string | null, ...],
/// "elements": path?, "ordering": path?}]}. Relative paths resolve against
/// the gold file's directory.
std::vector<GoldTask> load_gold_tasks(const std::filesystem::path& path);
std::vector<GoldTask> parse_gold_tasks(std::string_view document, const std::filesystem::path& base_dir = {});

/// Prediction file: {"tasks": [{"task_id", "actions": [...]} or {"task_id", "response": "..."}]}.
struct Prediction {
    std::string task_id;
    std::optional<std::vector<std::string>> actions;
    std::optional<std::string> response;
};

std::vector<Prediction> load_predictions(const std::filesystem::path& path);
std::vector<Prediction> parse_predictions(std::string_view document);

/// Scores every gold task against its prediction. Missing or unparseable
/// predictions score 0 with a note. `fallback_state` is used for tasks that
/// do not name their own element file.
ScoreReport evaluate(std::span<const GoldTask> gold, std::span<const Prediction> predictions,
                     const std::optional<EnvironmentState>& fallback_state = std::nullopt,
                     const std::optional<Ordering>& fallback_ordering = std::nullopt);

nlohmann::json report_to_json(const ScoreReport& report);
std::string report_table(const ScoreReport& report);

} // namespace screenorder
