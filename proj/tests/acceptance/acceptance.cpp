// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each criterion also has a wall-clock budget.

#include "cli.hpp"

#include "screenorder/action_language.hpp"
#include "screenorder/core_model.hpp"
#include "screenorder/dom.hpp"
#include "screenorder/embedding.hpp"
#include "screenorder/metrics.hpp"
#include "screenorder/ordering.hpp"
#include "screenorder/representation.hpp"

#include "dom_oracle.hpp"
#include "fixtures.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace so = screenorder;
namespace fs = std::filesystem;
using so::tsne::Vec2;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<Outcome()> check;
};

fs::path cli_fixture(const std::string& name) {
    return so::testing::data_dir() / "cli" / name;
}

so::cli::Environment fixed_environment() {
    so::cli::Environment env;
    env.getenv = [](std::string_view) -> std::optional<std::string> { return std::nullopt; };
    static int tick = 0;
    env.timestamp = [] { return "run-" + std::to_string(++tick); };
    return env;
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int code = so::cli::run(args, o, e, fixed_environment());
    if (out) *out = o.str();
    return code;
}

// -------------------------------------------------------------------------

Outcome worked_example() {
    so::testing::TempDir tmp;
    std::string out;
    const int code = run_cli({"agent", cli_fixture("worked.json").string(), "--objective", "click the button",
                              "--backend", "mock:" + cli_fixture("worked_reply.txt").string(), "--out-dir",
                              (tmp / "run").string()},
                             &out);
    const std::string emitted = so::read_text_file(tmp / "run" / "emitted.py");
    const bool pass = code == 0 && out == "pyautogui.click(75, 75)\n" &&
                      emitted == "import pyautogui\npyautogui.click(75, 75)\n";
    return {pass, "emitted '" + out.substr(0, out.find('\n')) + "', exit " + std::to_string(code)};
}

Outcome format_fidelity() {
    so::EnvironmentState s;
    s.viewport_width = s.viewport_height = 100;
    so::Element img;
    img.interactable = true;
    img.actions = {"click"};
    img.bbox = {0, 0, 10, 10};
    img.tag = "IMG";
    img.alt_text = "alt text";
    img.caption = "caption";
    s.elements = {img, so::testing::static_text({0, 20, 10, 30}, "text")};
    const std::string got = so::serialize_text(so::apply_ordering(s, so::identity_ordering(2)), s, {});
    const std::string want = "[1] [IMG] [alt text, caption]\n[] [StaticText] [text]";
    return {got == want, got == want ? "2/2 lines byte-exact" : "got '" + got + "'"};
}

Outcome raster_correctness() {
    std::mt19937_64 rng(20240601);
    int agree = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        const so::EnvironmentState s = so::testing::random_state(rng, rng() % 51, 640, 240);
        auto key = [&](std::size_t i) {
            const so::BoundingBox& b = s.elements[i].bbox;
            const long cx = static_cast<long>(std::floor((b.x1 + b.x2) / 2 + 0.5));
            const long cy = static_cast<long>(std::floor((b.y1 + b.y2) / 2 + 0.5));
            return std::pair{static_cast<long>(std::floor(cy / 8.0)), cx};
        };
        std::vector<std::size_t> perm(s.size());
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = 1; i < perm.size(); ++i) {
            for (std::size_t j = i; j > 0 && key(perm[j]) < key(perm[j - 1]); --j) std::swap(perm[j], perm[j - 1]);
        }
        agree += so::order_raster(s).perm == perm;
    }
    return {agree == trials, std::to_string(agree) + "/" + std::to_string(trials) + " agree"};
}

Outcome random_uniformity() {
    so::EnvironmentState s;
    s.viewport_width = s.viewport_height = 100;
    for (int i = 0; i < 4; ++i) s.elements.push_back(so::testing::interactable({10.0 * i, 0, 10.0 * i + 5, 5}));
    std::map<std::vector<std::size_t>, int> counts;
    const int draws = 60000;
    for (int seed = 0; seed < draws; ++seed) ++counts[so::order_random(s, static_cast<std::uint64_t>(seed)).perm];
    const double expected = draws / 24.0;
    double chi2 = 0;
    for (const auto& [perm, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    chi2 += (24 - static_cast<double>(counts.size())) * expected;
    const double critical = boost::math::quantile(boost::math::chi_squared(23), 0.999);
    char buf[96];
    std::snprintf(buf, sizeof buf, "chi2 %.2f < %.2f, %zu permutations seen", chi2, critical, counts.size());
    return {counts.size() == 24 && chi2 < critical, buf};
}

std::vector<Vec2> random_points(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<Vec2> pts(n);
    for (Vec2& p : pts) p = {u(rng), u(rng)};
    return pts;
}

Outcome gradient_check() {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal(0, 2);
    const double h = 1e-5;
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng() % 4;
        const auto pts = random_points(rng, n);
        const so::tsne::AffinityMatrix p =
            so::tsne::pairwise_affinities(pts, so::tsne::effective_perplexity(30, n));
        std::vector<double> y(n);
        for (double& v : y) v = normal(rng);
        const auto g = so::tsne::kl_gradient(p, y);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> up = y, down = y;
            up[i] += h;
            down[i] -= h;
            const double fd = (so::tsne::kl_divergence(p, up) - so::tsne::kl_divergence(p, down)) / (2 * h);
            const double scale = std::max(std::abs(g[i]), std::abs(fd));
            const double rel = scale < 1e-9 ? 0 : std::abs(g[i] - fd) / scale;
            worst = std::max(worst, rel);
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max relative error %.2e", worst);
    return {worst < 1e-4, buf};
}

Outcome affinity_invariants() {
    std::mt19937_64 rng(5);
    double worst_sym = 0, worst_sum = 0, worst_diag = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng() % 40;
        const auto pts = random_points(rng, n);
        const auto p = so::tsne::pairwise_affinities(pts, so::tsne::effective_perplexity(30, n));
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            worst_diag = std::max(worst_diag, std::abs(p(i, i)));
            for (std::size_t j = 0; j < n; ++j) {
                total += p(i, j);
                worst_sym = std::max(worst_sym, std::abs(p(i, j) - p(j, i)));
            }
        }
        worst_sum = std::max(worst_sum, std::abs(total - 1));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "asymmetry %.1e, |sum-1| %.1e, diagonal %.1e", worst_sym, worst_sum, worst_diag);
    return {worst_sym <= 1e-12 && worst_sum <= 1e-12 && worst_diag == 0, buf};
}

double spearman_with_position(const std::vector<double>& z) {
    const std::size_t n = z.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
    double d2 = 0;
    for (std::size_t r = 0; r < n; ++r) d2 += (double(idx[r]) - double(r)) * (double(idx[r]) - double(r));
    return 1 - 6 * d2 / (double(n) * (double(n) * n - 1));
}

// Fraction of pairs adjacent in the 1D order that are among each other's k
// nearest 2D neighbours; 2D ties at the k-th distance count as neighbours.
double neighbor_preservation(const std::vector<Vec2>& pts, const std::vector<double>& z, std::size_t k) {
    const std::size_t n = pts.size();
    auto dist = [&](std::size_t a, std::size_t b) { return std::hypot(pts[a].x - pts[b].x, pts[a].y - pts[b].y); };
    auto is_near = [&](std::size_t i, std::size_t j) {
        std::vector<double> d;
        for (std::size_t m = 0; m < n; ++m) {
            if (m != i) d.push_back(dist(i, m));
        }
        std::sort(d.begin(), d.end());
        return dist(i, j) <= d[std::min(k, d.size()) - 1] + 1e-9;
    };
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
    std::size_t hits = 0;
    for (std::size_t r = 0; r + 1 < n; ++r) hits += is_near(order[r], order[r + 1]) && is_near(order[r + 1], order[r]);
    return static_cast<double>(hits) / static_cast<double>(n - 1);
}

// Frozen from the first green run of the grid fixture below.
constexpr double kGridNeighborBound = 1.0;

Outcome tsne_locality() {
    const so::tsne::TsneParams params;
    std::vector<Vec2> line;
    for (int i = 0; i < 10; ++i) line.push_back({37.0 * i, 11.0 * i});
    const auto line_z = so::tsne::run_tsne(line, params, 3).z;
    const double rho = std::abs(spearman_with_position(line_z));

    std::vector<Vec2> grid;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) grid.push_back({100.0 * c, 100.0 * r});
    const auto grid_z = so::tsne::run_tsne(grid, params, 3).z;
    const double score = neighbor_preservation(grid, grid_z, 3);
    const bool deterministic =
        so::tsne::run_tsne(grid, params, 3).z == grid_z && so::tsne::run_tsne(line, params, 3).z == line_z;

    char buf[128];
    std::snprintf(buf, sizeof buf, "|spearman| %.4f, grid neighbor preservation %.4f (bound %.4f), deterministic %s",
                  rho, score, kGridNeighborBound, deterministic ? "yes" : "no");
    return {rho >= 0.99 && score >= kGridNeighborBound && score >= 0.6 && deterministic, buf};
}

Outcome ordering_bijection() {
    std::mt19937_64 rng(99);
    int ok = 0, total = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        // Sizes 0 and 1 come first; t-SNE states stay small to bound the runtime.
        const std::size_t n = trial < 2 ? static_cast<std::size_t>(trial) : rng() % 40;
        const so::EnvironmentState s = so::testing::random_state(rng, n);
        for (auto kind : {so::OrderingMethod::Kind::Preorder, so::OrderingMethod::Kind::Random,
                          so::OrderingMethod::Kind::Raster, so::OrderingMethod::Kind::Tsne}) {
            so::OrderingMethod method;
            method.kind = kind;
            method.seed = rng();
            method.tsne.iterations = 250;
            const so::EnvironmentState& input =
                kind == so::OrderingMethod::Kind::Tsne && n > 12
                    ? so::testing::random_state(rng, n % 13)
                    : s;
            ++total;
            ok += so::is_bijection(so::compute_ordering(input, method), input.size());
        }
    }
    return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " valid permutations"};
}

so::ActionCommand random_command(std::mt19937_64& rng, so::Dialect dialect) {
    using so::Verb;
    std::vector<Verb> verbs;
    for (int v = 0; v <= static_cast<int>(Verb::Stop); ++v) {
        if (so::dialect_allows(dialect, static_cast<Verb>(v))) verbs.push_back(static_cast<Verb>(v));
    }
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABC0123456789 .,:'\"!?/+-_";
    auto text = [&] {
        std::string s;
        const std::size_t len = 1 + rng() % 16;
        for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
        while (s.front() == ' ') s.erase(s.begin());
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s.empty() ? std::string("k") : s;
    };
    auto id = [&] { return so::ElementId{1 + static_cast<int>(rng() % 9999)}; };
    so::ActionCommand c;
    c.verb = verbs[rng() % verbs.size()];
    switch (c.verb) {
    case Verb::Click:
    case Verb::DoubleClick:
    case Verb::RightClick:
    case Verb::Hover: c.target_id = id(); break;
    case Verb::Drag:
        c.target_id = id();
        c.args = {std::to_string(id().value)};
        break;
    case Verb::Scroll: c.args = {rng() % 2 ? "up" : "down"}; break;
    case Verb::HorizontalScroll: c.args = {rng() % 2 ? "left" : "right"}; break;
    case Verb::Hotkey:
        for (std::size_t k = 0, n = 2 + rng() % 3; k < n; ++k) c.args.push_back(text());
        break;
    case Verb::Type:
        if (dialect == so::Dialect::Vwa) c.target_id = id();
        c.args = {text()};
        break;
    case Verb::Press:
    case Verb::Write:
    case Verb::Goto: c.args = {text()}; break;
    case Verb::TabFocus: c.args = {std::to_string(rng() % 10)}; break;
    case Verb::Stop:
        if (rng() % 2) c.args = {text()};
        break;
    case Verb::NewTab:
    case Verb::TabClose:
    case Verb::GoBack:
    case Verb::GoForward: break;
    }
    return c;
}

Outcome grammar_round_trip() {
    std::mt19937_64 rng(4242);
    int ok = 0, total = 0;
    for (so::Dialect d : {so::Dialect::OmniAct, so::Dialect::Vwa}) {
        for (int i = 0; i < 1000; ++i) {
            const so::ActionCommand cmd = random_command(rng, d);
            ++total;
            try {
                ok += so::parse_action(so::render_action(cmd), d) == cmd;
            } catch (const so::Error&) {
            }
        }
    }
    return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " identical"};
}

Outcome metric_definitions() {
    // Two buttons; the gold box covers element 1 only.
    so::EnvironmentState s;
    s.viewport_width = s.viewport_height = 400;
    s.elements = {so::testing::interactable({50, 50, 100, 100}), so::testing::interactable({200, 50, 250, 100})};
    const so::OrderedView view = so::apply_ordering(s, so::identity_ordering(2));
    so::GoldTask gold;
    gold.task_id = "fixture";
    gold.commands = {so::parse_action("click [1]", so::Dialect::OmniAct)};
    gold.target_boxes = {so::BoundingBox{50, 50, 100, 100}};
    gold.parameters = {std::nullopt};
    const std::vector<so::ActionCommand> pred{so::parse_action("click [2]", so::Dialect::OmniAct)};
    const int seq = so::sequence_score(pred, gold);
    const int act = so::action_score(pred, gold, so::ScoringContext{&s, &view});

    const fs::path dir = so::testing::data_dir() / "metrics";
    const so::ScoreReport report =
        so::evaluate(so::load_gold_tasks(dir / "gold.json"), so::load_predictions(dir / "predictions.json"));
    const double seq_err = std::abs(report.sequence_mean - 5.0 / 8.0);
    const double act_err = std::abs(report.action_mean - 3.0 / 8.0);

    std::mt19937_64 rng(31337);
    static const std::vector<std::string> pool{"click [1]", "click [2]", "hover [1]", "write [a]", "write [A]",
                                               "press [Enter]", "press [enter]", "hotkey [a] [b]", "drag [1] [2]"};
    int violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        so::GoldTask g;
        g.task_id = "r";
        std::vector<so::ActionCommand> p;
        const std::size_t len = rng() % 3;
        for (std::size_t k = 0; k < len; ++k) {
            g.commands.push_back(so::parse_action(pool[rng() % pool.size()], so::Dialect::OmniAct));
            g.target_boxes.push_back(rng() % 2 ? std::optional<so::BoundingBox>(so::BoundingBox{40, 40, 110, 110})
                                               : std::nullopt);
            g.parameters.push_back(std::nullopt);
        }
        const std::size_t plen = rng() % 2 ? len : rng() % 3;
        for (std::size_t k = 0; k < plen; ++k) {
            so::ActionCommand c = so::parse_action(pool[rng() % pool.size()], so::Dialect::OmniAct);
            if (plen == len && rng() % 2) c.verb = g.commands[k].verb;
            p.push_back(c);
        }
        violations += so::action_score(p, g, so::ScoringContext{&s, &view}) > so::sequence_score(p, g);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "fixture seq %d / act %d, suite mean error %.1e / %.1e, %d violations of action <= sequence", seq,
                  act, seq_err, act_err, violations);
    return {seq == 1 && act == 0 && seq_err <= 1e-12 && act_err <= 1e-12 && violations == 0, buf};
}

Outcome preorder_oracle() {
    using namespace so::testing::dom_oracle;
    int agree = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const DomNode body = random_body(500000 + trial);
        const so::EnvironmentState s = so::dom::extract_elements(so::dom::parse_html(to_html(body)), {});
        agree += actual_listing(s) == expected_listing(body);
    }
    return {agree == 200, std::to_string(agree) + "/200 trees agree"};
}

Outcome end_to_end_determinism() {
    so::testing::TempDir tmp;
    for (const char* name : {"a", "b"}) {
        run_cli({"agent", cli_fixture("mixed.json").string(), "--objective", "search my orders", "--backend",
                 "mock:" + cli_fixture("multi_reply.json").string(), "--seed", "5", "--method", "tsne",
                 "--out-dir", (tmp / name).string()});
    }
    int files = 0, identical = 0;
    for (const auto& entry : fs::directory_iterator(tmp / "a")) {
        const std::string f = entry.path().filename().string();
        std::string a = so::read_text_file(tmp / "a" / f);
        std::string b = fs::exists(tmp / "b" / f) ? so::read_text_file(tmp / "b" / f) : std::string("\x01");
        if (f == "transcript.txt") {
            a = a.substr(a.find('\n'));
            b = b.substr(b.find('\n'));
        }
        ++files;
        identical += a == b;
    }
    return {files >= 6 && files == identical,
            std::to_string(identical) + "/" + std::to_string(files) + " files byte-identical"};
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"worked example, exact", 1, worked_example},
        {"format fidelity", 1, format_fidelity},
        {"raster correctness", 5, raster_correctness},
        {"random-ordering uniformity", 5, random_uniformity},
        {"t-SNE gradient check", 10, gradient_check},
        {"t-SNE affinity invariants", 5, affinity_invariants},
        {"t-SNE locality", 30, tsne_locality},
        {"ordering bijection", 60, ordering_bijection},
        {"grammar round-trip", 5, grammar_round_trip},
        {"metric definitions", 5, metric_definitions},
        {"pre-order oracle", 5, preorder_oracle},
        {"end-to-end determinism", 30, end_to_end_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool pass = outcome.pass && in_time;
        failed += !pass;
        std::printf("%s  %2zu  %-28s %s; %.3f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", i + 1, c.name.c_str(),
                    outcome.detail.c_str(), seconds, c.budget_seconds, in_time ? "" : " OVER BUDGET");
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
