#pragma once

#include "screenorder/core_model.hpp"
#include "screenorder/error.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

/// Expects `stmt` to throw screenorder::Error of the given kind.
#define EXPECT_ERROR_KIND(stmt, expected_kind)                                                                        \
    EXPECT_THROW(                                                                                                      \
        {                                                                                                              \
            try {                                                                                                      \
                stmt;                                                                                                  \
            } catch (const ::screenorder::Error& err_) {                                                               \
                EXPECT_EQ(err_.kind(), expected_kind) << err_.what();                                                  \
                throw;                                                                                                 \
            }                                                                                                          \
        },                                                                                                             \
        ::screenorder::Error)

namespace screenorder::testing {

inline std::filesystem::path data_dir() { return SCREENORDER_TEST_DATA_DIR; }
inline std::filesystem::path golden_dir() { return SCREENORDER_GOLDEN_DIR; }

inline Element interactable(BoundingBox box, std::string tag = "BUTTON", std::string text = {}) {
    Element e;
    e.interactable = true;
    e.bbox = box;
    e.actions = {"click"};
    e.tag = std::move(tag);
    if (!text.empty()) e.text = std::move(text);
    return e;
}

inline Element static_text(BoundingBox box, std::string text) {
    Element e;
    e.bbox = box;
    e.tag = std::string(kStaticTextTag);
    e.text = std::move(text);
    e.is_static_text = true;
    return e;
}

/// Integer-cornered boxes inside the viewport; roughly 70% interactable.
inline EnvironmentState random_state(std::mt19937_64& rng, std::size_t n, double w = 1280, double h = 720) {
    EnvironmentState s;
    s.viewport_width = w;
    s.viewport_height = h;
    std::uniform_int_distribution<int> xs(0, static_cast<int>(w)), ys(0, static_cast<int>(h));
    std::bernoulli_distribution coin(0.7);
    for (std::size_t i = 0; i < n; ++i) {
        int x1 = xs(rng), x2 = xs(rng), y1 = ys(rng), y2 = ys(rng);
        BoundingBox b{double(std::min(x1, x2)), double(std::min(y1, y2)), double(std::max(x1, x2)),
                      double(std::max(y1, y2))};
        s.elements.push_back(coin(rng) ? interactable(b, "BUTTON", "b" + std::to_string(i))
                                       : static_text(b, "t" + std::to_string(i)));
    }
    return s;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("screenorder_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace screenorder::testing
