#include "fixtures.hpp"

#include "screenorder/core_model.hpp"

#include <gtest/gtest.h>

#include <random>

namespace screenorder {
namespace {

using testing::TempDir;

TEST(Center, WorkedExample) {
    EXPECT_EQ(center({50, 50, 100, 100}), (Point{75, 75}));
}

TEST(Center, DegenerateBox) {
    EXPECT_EQ(center({0, 0, 0, 0}), (Point{0, 0}));
}

TEST(Center, RoundsHalfUp) {
    EXPECT_EQ(center({0, 0, 5, 9}), (Point{3, 5}));
}

// Quarter-pixel corners in [0, 12]: the midpoint in eighths is exact in
// integers, so half-up rounding is floor((q1 + q2 + 4) / 8).
TEST(Center, ExhaustiveRoundingOracle) {
    auto oracle = [](int q1, int q2) { return static_cast<long>((q1 + q2 + 4) / 8); };
    for (int qx1 = 0; qx1 <= 48; ++qx1) {
        for (int qx2 = qx1; qx2 <= 48; ++qx2) {
            const BoundingBox box{qx1 / 4.0, qx2 / 4.0, qx2 / 4.0, qx2 / 4.0 + qx1 / 4.0};
            const Point c = center(box);
            ASSERT_EQ(c.x, oracle(qx1, qx2)) << qx1 << " " << qx2;
            ASSERT_EQ(c.y, oracle(qx2, qx1 + qx2)) << qx1 << " " << qx2;
        }
    }
}

TEST(Center, LiesInsideEveryBox) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coord(0, 2000);
    for (int i = 0; i < 20000; ++i) {
        double a = coord(rng), b = coord(rng), c = coord(rng), d = coord(rng);
        BoundingBox box{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
        // Non-integer boxes narrower than a pixel may have no integer point inside.
        box.x1 = std::floor(box.x1);
        box.y1 = std::floor(box.y1);
        box.x2 = std::ceil(box.x2);
        box.y2 = std::ceil(box.y2);
        ASSERT_TRUE(contains(box, center(box)));
    }
}

TEST(LoadElements, SingleInteractableEntry) {
    const LoadResult r = parse_elements(
        R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": true, "bbox": [50,50,100,100], "actions": ["click"]}]})");
    ASSERT_EQ(r.state.size(), 1u);
    EXPECT_TRUE(r.state.elements[0].interactable);
    EXPECT_EQ(r.state.elements[0].bbox, (BoundingBox{50, 50, 100, 100}));
    EXPECT_TRUE(r.warnings.empty());
}

TEST(LoadElements, EmptyList) {
    const LoadResult r = parse_elements(R"({"viewport": {"w": 10, "h": 10}, "elements": []})");
    EXPECT_EQ(r.state.size(), 0u);
}

TEST(LoadElements, InvertedBoxIsInvalid) {
    EXPECT_ERROR_KIND(parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": false, "bbox": [100,50,50,100]}]})"),
                      ErrorKind::InvalidBox);
}

TEST(LoadElements, InteractableWithoutActions) {
    EXPECT_ERROR_KIND(parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": true, "bbox": [0,0,1,1], "actions": []}]})"),
                      ErrorKind::InconsistentInteractability);
}

TEST(LoadElements, NonInteractableWithActions) {
    EXPECT_ERROR_KIND(parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": false, "bbox": [0,0,1,1], "actions": ["click"]}]})"),
                      ErrorKind::InconsistentInteractability);
}

TEST(LoadElements, RejectsUnknownFields) {
    EXPECT_ERROR_KIND(parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": false, "bbox": [0,0,1,1], "colour": "red"}]})"),
                      ErrorKind::MalformedFile);
    EXPECT_ERROR_KIND(parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [], "extra": 1})"),
                      ErrorKind::MalformedFile);
}

TEST(LoadElements, MalformedDocuments) {
    EXPECT_ERROR_KIND(parse_elements("{"), ErrorKind::MalformedFile);
    EXPECT_ERROR_KIND(parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [{"bbox": [0,0,1,1]}]})"),
                      ErrorKind::MalformedFile);
    EXPECT_ERROR_KIND(parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": true, "bbox": [0,0,1]}]})"),
                      ErrorKind::MalformedFile);
}

TEST(LoadElements, ErrorNamesTheField) {
    try {
        parse_elements(R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": true, "bbox": [0,0,1,1], "actions": ["click"]}, {"interactable": "yes", "bbox": [0,0,1,1]}]})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("elements/1"), std::string::npos) << e.what();
    }
}

TEST(LoadElements, StaticEntriesGetStaticTextTag) {
    const LoadResult r = parse_elements(
        R"({"viewport": {"w": 200, "h": 200}, "elements": [{"interactable": false, "bbox": [0,0,10,10], "text": "Hi", "static": true}]})");
    ASSERT_EQ(r.state.size(), 1u);
    EXPECT_EQ(r.state.elements[0].tag, std::string(kStaticTextTag));
    EXPECT_TRUE(r.state.elements[0].is_static_text);
}

TEST(LoadElements, OverflowingBoxIsClampedWithWarning) {
    const LoadResult r = parse_elements(
        R"({"viewport": {"w": 100, "h": 100}, "elements": [{"interactable": true, "bbox": [50,50,150,120], "actions": ["click"]}]})");
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_EQ(r.warnings[0].kind, Violation::Kind::ClampWarning);
    EXPECT_EQ(r.state.elements[0].bbox, (BoundingBox{50, 50, 100, 100}));
}

TEST(ValidateState, ValidStateHasEmptyReport) {
    EnvironmentState s;
    s.viewport_width = 300;
    s.viewport_height = 300;
    s.elements = {testing::interactable({0, 0, 10, 10}), testing::static_text({20, 20, 30, 30}, "x"),
                  testing::interactable({100, 100, 200, 200})};
    EXPECT_TRUE(validate_state(s).empty());
}

TEST(ValidateState, InteractableWithoutActions) {
    EnvironmentState s;
    s.viewport_width = 300;
    s.viewport_height = 300;
    Element e = testing::interactable({0, 0, 10, 10});
    e.actions.clear();
    s.elements = {e};
    const auto report = validate_state(s);
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report[0].kind, Violation::Kind::InconsistentInteractability);
    EXPECT_EQ(report[0].element_index, 0u);
}

TEST(ValidateState, BoxPastViewport) {
    EnvironmentState s;
    s.viewport_width = 100;
    s.viewport_height = 100;
    s.elements = {testing::interactable({50, 50, 150, 90})};
    const auto report = validate_state(s);
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report[0].kind, Violation::Kind::ClampWarning);
}

TEST(Serialization, RoundTripIsFieldByFieldEqual) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        EnvironmentState s = testing::random_state(rng, trial % 17);
        if (trial % 3 == 0 && !s.elements.empty()) {
            s.elements[0].tag = "IMG";
            s.elements[0].alt_text = "a \"quoted\" alt";
            s.elements[0].caption = "caption \xC3\xA9";
        }
        if (trial % 5 == 0) s.screenshot_path = "shot.png";
        const LoadResult back = parse_elements(serialize_elements(s));
        ASSERT_EQ(back.state, s);
        EXPECT_TRUE(validate_state(back.state).empty());
    }
}

TEST(Serialization, FileRoundTrip) {
    TempDir dir;
    std::mt19937_64 rng(9);
    const EnvironmentState s = testing::random_state(rng, 12);
    write_elements(dir / "elements.json", s);
    EXPECT_EQ(load_elements(dir / "elements.json"), s);
}

TEST(Serialization, MissingFile) {
    EXPECT_THROW(load_elements("/nonexistent/elements.json"), Error);
}

} // namespace
} // namespace screenorder
