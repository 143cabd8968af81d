#pragma once

#include "screenorder/core_model.hpp"
#include "screenorder/embedding.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace screenorder {

/// Numeric label shown to the language model. 1-based, interactable
/// elements only, assigned in presentation order.
struct ElementId {
    int value = 0;

    auto operator<=>(const ElementId&) const = default;
};

/// perm[k] is the element index presented at position k (0-based).
struct Ordering {
    std::vector<std::size_t> perm;

    bool operator==(const Ordering&) const = default;
};

bool is_bijection(const Ordering& ordering, std::size_t n);
Ordering identity_ordering(std::size_t n);

inline constexpr double kDefaultRasterBand = 8.0;

/// Fisher-Yates shuffle driven by `seed`.
Ordering order_random(const EnvironmentState& state, std::uint64_t seed);

/// Lexicographic sort on (floor(cy / band_height), cx) over box centers;
/// ties keep input order.
Ordering order_raster(const EnvironmentState& state, double band_height = kDefaultRasterBand);

/// Sorts elements by their 1D t-SNE coordinate (ascending, ties by index).
/// States with n <= 2 get the identity ordering.
Ordering order_tsne(const EnvironmentState& state, const tsne::TsneParams& params, std::uint64_t seed);

struct OrderingMethod {
    enum class Kind { Preorder, Random, Raster, Tsne };

    Kind kind = Kind::Preorder;
    std::uint64_t seed = 0;
    double band_height = kDefaultRasterBand;
    tsne::TsneParams tsne;
};

std::string_view to_string(OrderingMethod::Kind kind);
/// Throws Error{Config} for unknown names.
OrderingMethod::Kind parse_ordering_kind(std::string_view name);

Ordering compute_ordering(const EnvironmentState& state, const OrderingMethod& method);

/// An ordering together with the ids it induces.
class OrderedView {
public:
    const Ordering& ordering() const { return ordering_; }
    std::size_t size() const { return id_of_index_.size(); }
    std::size_t interactable_count() const { return index_of_id_.size(); }

    std::optional<ElementId> id_of(std::size_t index) const;
    std::optional<std::size_t> index_of(ElementId id) const;

    bool operator==(const OrderedView&) const = default;

private:
    friend OrderedView apply_ordering(const EnvironmentState& state, const Ordering& ordering);

    Ordering ordering_;
    std::vector<std::optional<ElementId>> id_of_index_;
    std::vector<std::size_t> index_of_id_;
};

/// Assigns ids 1..k to the interactable elements in presentation order.
/// Throws Error{InvalidPermutation} unless `ordering` is a bijection on the
/// state's element indices.
OrderedView apply_ordering(const EnvironmentState& state, const Ordering& ordering);

/// Ordering file: {method, seed, params, perm: [1-based indices], ids: {"index": id}}.
nlohmann::json ordering_to_json(const OrderingMethod& method, const OrderedView& view);
std::string serialize_ordering(const OrderingMethod& method, const OrderedView& view);

/// Reads the perm of an ordering file and validates it against `n` elements.
Ordering parse_ordering(std::string_view document, std::size_t n);
Ordering load_ordering(const std::filesystem::path& path, std::size_t n);

} // namespace screenorder
