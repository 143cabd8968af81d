#include "cli.hpp"

#include "screenorder/core_model.hpp"
#include "screenorder/image.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sstream>

namespace screenorder::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using screenorder::testing::TempDir;

fs::path fixture(const std::string& name) {
    return screenorder::testing::data_dir() / "cli" / name;
}

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Environment test_environment(std::optional<std::string> api_key = std::nullopt) {
    Environment env;
    env.getenv = [api_key](std::string_view name) -> std::optional<std::string> {
        if (name == "OPENAI_API_KEY") return api_key;
        return std::nullopt;
    };
    static int clock = 0;
    env.timestamp = [] { return "t" + std::to_string(++clock); };
    return env;
}

Result run_cli(std::vector<std::string> args, const Environment& env = test_environment()) {
    std::ostringstream out, err;
    Result r;
    r.code = run(args, out, err, env);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<std::size_t> perm_of(const fs::path& ordering_file) {
    return json::parse(read_text_file(ordering_file)).at("perm").get<std::vector<std::size_t>>();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

TEST(CliExtract, FixturePageInPreOrder) {
    TempDir tmp;
    const Result r = run_cli({"extract", fixture("page.html").string(), "-o", (tmp / "e.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const EnvironmentState s = load_elements(tmp / "e.json");
    std::vector<std::string> listing;
    for (const Element& e : s.elements) {
        listing.push_back(e.tag.value_or("") + ":" + e.text.value_or(e.alt_text.value_or("")));
    }
    EXPECT_EQ(listing, (std::vector<std::string>{"StaticText:Shop", "A:Home", "StaticText:Welcome", "StaticText:back",
                                                 "INPUT:Search", "BUTTON:Go", "IMG:logo"}));
    EXPECT_TRUE(validate_state(s).empty());
}

TEST(CliExtract, MissingInput) {
    TempDir tmp;
    const Result r = run_cli({"extract", (tmp / "nope.html").string(), "-o", (tmp / "e.json").string()});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_FALSE(r.err.empty());
    EXPECT_FALSE(fs::exists(tmp / "e.json"));
}

TEST(CliExtract, EmptyPage) {
    TempDir tmp;
    const Result r = run_cli({"extract", fixture("empty.html").string(), "-o", (tmp / "e.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(load_elements(tmp / "e.json").size(), 0u);
}

TEST(CliExtract, NoSyntheticLayoutFails) {
    TempDir tmp;
    const Result r = run_cli({"extract", fixture("page.html").string(), "-o", (tmp / "e.json").string(),
                              "--no-synthetic-layout"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("MissingLayout"), std::string::npos) << r.err;
}

TEST(CliOrder, RasterOnAbcFixture) {
    TempDir tmp;
    const Result r =
        run_cli({"order", fixture("abc.json").string(), "--method", "raster", "--out", (tmp / "o.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    // File order is B, C, A; the 1-based perm lists A, B, C.
    EXPECT_EQ(perm_of(tmp / "o.json"), (std::vector<std::size_t>{3, 1, 2}));
}

TEST(CliOrder, RandomIsDeterministicPerSeed) {
    TempDir tmp;
    for (const char* name : {"a.json", "b.json"}) {
        ASSERT_EQ(run_cli({"order", fixture("mixed.json").string(), "--method", "random", "--seed", "7", "--out",
                           (tmp / name).string()})
                      .code,
                  kExitOk);
    }
    EXPECT_EQ(read_text_file(tmp / "a.json"), read_text_file(tmp / "b.json"));
}

TEST(CliOrder, TsneOnTwoElementsIsIdentity) {
    TempDir tmp;
    const Result r =
        run_cli({"order", fixture("pair.json").string(), "--method", "tsne", "--out", (tmp / "o.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(perm_of(tmp / "o.json"), (std::vector<std::size_t>{1, 2}));
}

TEST(CliOrder, BadFlags) {
    TempDir tmp;
    EXPECT_EQ(run_cli({"order", fixture("abc.json").string(), "--method", "spiral", "--out", (tmp / "o").string()})
                  .code,
              kExitUsage);
    EXPECT_EQ(run_cli({"order", fixture("abc.json").string(), "--raster-band", "0", "--out", (tmp / "o").string()})
                  .code,
              kExitUsage);
    EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run_cli({}).code, kExitUsage);
    EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
}

TEST(CliOrder, FlagsOverrideConfigFile) {
    TempDir tmp;
    write_text_file(tmp / "config.json", R"({"ordering": {"method": "preorder"}})");
    ASSERT_EQ(run_cli({"order", fixture("abc.json").string(), "--config", (tmp / "config.json").string(), "--out",
                       (tmp / "pre.json").string()})
                  .code,
              kExitOk);
    EXPECT_EQ(perm_of(tmp / "pre.json"), (std::vector<std::size_t>{1, 2, 3}));
    ASSERT_EQ(run_cli({"order", fixture("abc.json").string(), "--config", (tmp / "config.json").string(), "--method",
                       "raster", "--out", (tmp / "raster.json").string()})
                  .code,
              kExitOk);
    EXPECT_EQ(perm_of(tmp / "raster.json"), (std::vector<std::size_t>{3, 1, 2}));

    write_text_file(tmp / "bad.json", R"({"ordering": {"metod": "raster"}})");
    EXPECT_EQ(run_cli({"order", fixture("abc.json").string(), "--config", (tmp / "bad.json").string(), "--out",
                       (tmp / "x.json").string()})
                  .code,
              kExitUsage);
}

TEST(CliRender, FullMaskStartsAtIdOne) {
    TempDir tmp;
    const Result r = run_cli({"render", fixture("mixed.json").string(), "--out-text", (tmp / "o.txt").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const std::string text = read_text_file(tmp / "o.txt");
    EXPECT_EQ(text, "[] [StaticText] [Order history]\n"
                    "[1] [IMG] [alt text, caption]\n"
                    "[2] [BUTTON] [Reorder]\n"
                    "[] [StaticText] [Shipped]\n"
                    "[3] [INPUT] [Search orders]\n"
                    "[] [StaticText] [Help]\n"
                    "[4] [A] [Contact]\n");
    for (const std::string& line : lines_of(text)) {
        if (line.rfind("[] ", 0) != 0) {
            EXPECT_EQ(line.rfind("[1] [", 0), 0u) << line;
            break;
        }
    }
}

TEST(CliRender, NoStaticText) {
    TempDir tmp;
    const Result r = run_cli({"render", fixture("mixed.json").string(), "--out-text", (tmp / "o.txt").string(),
                              "--mask", "no-static-text"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const std::string text = read_text_file(tmp / "o.txt");
    EXPECT_EQ(text.find("[] [StaticText]"), std::string::npos);
    EXPECT_EQ(lines_of(text).size(), 4u);
}

TEST(CliRender, ShuffleIsDeterministicPerSeed) {
    TempDir tmp;
    std::vector<std::string> texts;
    for (const char* name : {"a.txt", "b.txt", "c.txt"}) {
        const std::string seed = std::string(name) == "c.txt" ? "4" : "3";
        ASSERT_EQ(run_cli({"render", fixture("mixed.json").string(), "--seed", seed, "--out-text",
                           (tmp / name).string(), "--mask", "shuffle-order"})
                      .code,
                  kExitOk);
        texts.push_back(read_text_file(tmp / name));
    }
    EXPECT_EQ(texts[0], texts[1]);
    EXPECT_NE(texts[0], texts[2]);
    // Ids are re-derived from the shuffled order.
    int next = 1;
    for (const std::string& line : lines_of(texts[0])) {
        if (line.rfind("[] ", 0) == 0) continue;
        EXPECT_EQ(line.rfind("[" + std::to_string(next++) + "] ", 0), 0u) << line;
    }
}

TEST(CliRender, SetOfMarkImage) {
    TempDir tmp;
    write_png(tmp / "shot.png", Image(400, 300, {200, 200, 200}));
    const Result r = run_cli({"render", fixture("mixed.json").string(), "--screenshot", (tmp / "shot.png").string(),
                              "--out-image", (tmp / "som.png").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const Image som = read_png(tmp / "som.png");
    EXPECT_EQ(som.width(), 400);
    EXPECT_NE(som, Image(400, 300, {200, 200, 200}));
}

TEST(CliRender, NeedsAnOutput) {
    EXPECT_EQ(run_cli({"render", fixture("mixed.json").string()}).code, kExitUsage);
}

TEST(CliAblate, WritesEveryPreset) {
    TempDir tmp;
    const Result r = run_cli({"ablate", fixture("mixed.json").string(), "--out-dir", (tmp / "out").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const json index = json::parse(read_text_file(tmp / "out" / "index.json"));
    ASSERT_FALSE(index.empty());
    for (const json& entry : index) {
        if (entry.contains("text")) {
            EXPECT_TRUE(fs::exists(tmp / "out" / entry["text"].get<std::string>()));
        }
    }
    EXPECT_TRUE(fs::exists(tmp / "out" / "config.json"));
}

TEST(CliEval, EmptyGoldIsAnError) {
    const Result r = run_cli({"eval", fixture("pred_same.json").string(), fixture("gold_empty.json").string()});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("EmptySet"), std::string::npos) << r.err;
}

TEST(CliEval, IdenticalPredictionsScoreOne) {
    TempDir tmp;
    const Result r = run_cli({"eval", fixture("pred_same.json").string(), fixture("gold.json").string(), "--out",
                              (tmp / "report.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const json report = json::parse(read_text_file(tmp / "report.json"));
    EXPECT_EQ(report["aggregate"]["sequence_score"], 1.0);
    EXPECT_EQ(report["aggregate"]["action_score"], 1.0);
    EXPECT_NE(r.out.find("1.0000"), std::string::npos) << r.out;
}

TEST(CliEval, MetricsFixtureSuite) {
    const auto dir = screenorder::testing::data_dir() / "metrics";
    TempDir tmp;
    const Result r = run_cli({"eval", (dir / "predictions.json").string(), (dir / "gold.json").string(), "--out",
                              (tmp / "report.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const json report = json::parse(read_text_file(tmp / "report.json"));
    EXPECT_NEAR(report["aggregate"]["sequence_score"].get<double>(), 5.0 / 8.0, 1e-12);
    EXPECT_NEAR(report["aggregate"]["action_score"].get<double>(), 3.0 / 8.0, 1e-12);
}

std::vector<std::string> agent_args(const std::string& elements, const std::string& reply, const fs::path& out) {
    return {"agent", fixture(elements).string(), "--objective", "press the button", "--backend",
            "mock:" + fixture(reply).string(), "--out-dir", out.string()};
}

TEST(CliAgent, WorkedExample) {
    TempDir tmp;
    const Result r = run_cli(agent_args("worked.json", "worked_reply.txt", tmp / "run"));
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out, "pyautogui.click(75, 75)\n");
    EXPECT_EQ(read_text_file(tmp / "run" / "emitted.py"), "import pyautogui\npyautogui.click(75, 75)\n");
    for (const char* file : {"config.json", "observation.txt", "prompt.json", "response.txt", "actions.json",
                             "transcript.txt"}) {
        EXPECT_TRUE(fs::exists(tmp / "run" / file)) << file;
    }
    const std::string transcript = read_text_file(tmp / "run" / "transcript.txt");
    EXPECT_EQ(transcript.rfind("# screenorder agent run ", 0), 0u);
    EXPECT_NE(transcript.find("== status\nok\n"), std::string::npos);
}

TEST(CliAgent, UnknownIdIsRecorded) {
    TempDir tmp;
    const Result r = run_cli(agent_args("mixed.json", "multi_reply.json", tmp / "run"));
    EXPECT_EQ(r.code, kExitTaskFailure);
    const std::string transcript = read_text_file(tmp / "run" / "transcript.txt");
    EXPECT_NE(transcript.find("click [1234]: UnknownId"), std::string::npos) << transcript;
    EXPECT_NE(transcript.find("pyautogui.write('sample text')"), std::string::npos);
    EXPECT_NE(transcript.find("pyautogui.press('enter')"), std::string::npos);
    EXPECT_NE(transcript.find("== status\nfailed\n"), std::string::npos);
    const json actions = json::parse(read_text_file(tmp / "run" / "actions.json"));
    ASSERT_EQ(actions["commands"].size(), 3u);
    EXPECT_TRUE(actions["commands"][0].contains("error"));
}

TEST(CliAgent, UnparseableReplyIsATaskFailure) {
    TempDir tmp;
    write_text_file(tmp / "reply.txt", "I am not sure what to do.");
    const Result r = run_cli({"agent", fixture("worked.json").string(), "--objective", "x", "--backend",
                              "mock:" + (tmp / "reply.txt").string(), "--out-dir", (tmp / "run").string()});
    EXPECT_EQ(r.code, kExitTaskFailure);
    EXPECT_NE(read_text_file(tmp / "run" / "transcript.txt").find("NoActionBlock"), std::string::npos);
}

TEST(CliAgent, HttpWithoutKey) {
    TempDir tmp;
    const Result r = run_cli({"agent", fixture("worked.json").string(), "--objective", "x", "--backend", "http",
                              "--out-dir", (tmp / "run").string()});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("AuthError"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(tmp / "run"));
}

TEST(CliAgent, ByteIdenticalAcrossRuns) {
    TempDir tmp;
    write_png(tmp / "shot.png", Image(400, 300, {240, 240, 240}));
    for (const char* name : {"a", "b"}) {
        std::vector<std::string> args = agent_args("mixed.json", "multi_reply.json", tmp / name);
        for (const char* extra : {"--seed", "11", "--method", "random", "--screenshot"}) args.emplace_back(extra);
        args.push_back((tmp / "shot.png").string());
        run_cli(args);
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(tmp / "a")) files.push_back(entry.path().filename().string());
    EXPECT_GE(files.size(), 8u);
    for (const std::string& f : files) {
        std::string a = read_text_file(tmp / "a" / f);
        std::string b = read_text_file(tmp / "b" / f);
        if (f == "transcript.txt") {
            a = a.substr(a.find('\n'));
            b = b.substr(b.find('\n'));
        }
        EXPECT_EQ(a, b) << f;
    }
    EXPECT_NE(read_text_file(tmp / "a" / "transcript.txt"), read_text_file(tmp / "b" / "transcript.txt"));
}

} // namespace
} // namespace screenorder::cli
