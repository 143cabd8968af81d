#include "screenorder/ordering.hpp"

#include "screenorder/error.hpp"
#include "screenorder/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace screenorder {

using nlohmann::json;

bool is_bijection(const Ordering& ordering, std::size_t n) {
    if (ordering.perm.size() != n) {
        return false;
    }
    std::vector<char> seen(n, 0);
    for (std::size_t index : ordering.perm) {
        if (index >= n || seen[index]) {
            return false;
        }
        seen[index] = 1;
    }
    return true;
}

Ordering identity_ordering(std::size_t n) {
    Ordering out;
    out.perm.resize(n);
    std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});
    return out;
}

Ordering order_random(const EnvironmentState& state, std::uint64_t seed) {
    Ordering out = identity_ordering(state.size());
    Rng rng(seed);
    for (std::size_t i = out.perm.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(out.perm[i - 1], out.perm[j]);
    }
    return out;
}

Ordering order_raster(const EnvironmentState& state, double band_height) {
    if (!(band_height >= 1)) {
        throw Error(ErrorKind::Config, "raster band height must be >= 1");
    }
    struct Key {
        double band;
        long x;
    };
    std::vector<Key> keys;
    keys.reserve(state.size());
    for (const Element& e : state.elements) {
        const Point c = center(e.bbox);
        keys.push_back({std::floor(static_cast<double>(c.y) / band_height), c.x});
    }
    Ordering out = identity_ordering(state.size());
    std::stable_sort(out.perm.begin(), out.perm.end(), [&](std::size_t a, std::size_t b) {
        if (keys[a].band != keys[b].band) {
            return keys[a].band < keys[b].band;
        }
        return keys[a].x < keys[b].x;
    });
    return out;
}

Ordering order_tsne(const EnvironmentState& state, const tsne::TsneParams& params, std::uint64_t seed) {
    const std::size_t n = state.size();
    if (n <= 2) {
        return identity_ordering(n);
    }
    std::vector<tsne::Vec2> points;
    points.reserve(n);
    for (const Element& e : state.elements) {
        const Point c = center(e.bbox);
        points.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
    }
    const tsne::TsneResult result = tsne::run_tsne(points, params, seed);
    Ordering out = identity_ordering(n);
    std::stable_sort(out.perm.begin(), out.perm.end(),
                     [&](std::size_t a, std::size_t b) { return result.z[a] < result.z[b]; });
    return out;
}

std::string_view to_string(OrderingMethod::Kind kind) {
    switch (kind) {
    case OrderingMethod::Kind::Preorder: return "preorder";
    case OrderingMethod::Kind::Random: return "random";
    case OrderingMethod::Kind::Raster: return "raster";
    case OrderingMethod::Kind::Tsne: return "tsne";
    }
    return "unknown";
}

OrderingMethod::Kind parse_ordering_kind(std::string_view name) {
    for (auto kind : {OrderingMethod::Kind::Preorder, OrderingMethod::Kind::Random, OrderingMethod::Kind::Raster,
                      OrderingMethod::Kind::Tsne}) {
        if (name == to_string(kind)) {
            return kind;
        }
    }
    throw Error(ErrorKind::Config, "unknown ordering method '" + std::string(name) + "'");
}

Ordering compute_ordering(const EnvironmentState& state, const OrderingMethod& method) {
    switch (method.kind) {
    case OrderingMethod::Kind::Preorder: return identity_ordering(state.size());
    case OrderingMethod::Kind::Random: return order_random(state, method.seed);
    case OrderingMethod::Kind::Raster: return order_raster(state, method.band_height);
    case OrderingMethod::Kind::Tsne: return order_tsne(state, method.tsne, method.seed);
    }
    throw Error(ErrorKind::Config, "unhandled ordering method");
}

std::optional<ElementId> OrderedView::id_of(std::size_t index) const {
    return index < id_of_index_.size() ? id_of_index_[index] : std::nullopt;
}

std::optional<std::size_t> OrderedView::index_of(ElementId id) const {
    if (id.value < 1 || static_cast<std::size_t>(id.value) > index_of_id_.size()) {
        return std::nullopt;
    }
    return index_of_id_[static_cast<std::size_t>(id.value) - 1];
}

OrderedView apply_ordering(const EnvironmentState& state, const Ordering& ordering) {
    if (!is_bijection(ordering, state.size())) {
        throw Error(ErrorKind::InvalidPermutation, "ordering is not a permutation of " + std::to_string(state.size()) +
                                                       " element indices");
    }
    OrderedView view;
    view.ordering_ = ordering;
    view.id_of_index_.assign(state.size(), std::nullopt);
    for (std::size_t index : ordering.perm) {
        if (state.elements[index].interactable) {
            view.index_of_id_.push_back(index);
            view.id_of_index_[index] = ElementId{static_cast<int>(view.index_of_id_.size())};
        }
    }
    return view;
}

nlohmann::json ordering_to_json(const OrderingMethod& method, const OrderedView& view) {
    json out;
    out["method"] = std::string(to_string(method.kind));
    out["seed"] = method.seed;
    json params = json::object();
    if (method.kind == OrderingMethod::Kind::Raster) {
        params["band_height"] = method.band_height;
    } else if (method.kind == OrderingMethod::Kind::Tsne) {
        const tsne::TsneParams& p = method.tsne;
        params = {{"perplexity", p.perplexity},
                  {"early_exaggeration", p.early_exaggeration},
                  {"learning_rate", p.learning_rate},
                  {"iterations", p.iterations},
                  {"momentum_initial", p.momentum_initial},
                  {"momentum_final", p.momentum_final},
                  {"momentum_switch_iteration", p.momentum_switch_iteration},
                  {"exaggeration_end", p.exaggeration_end},
                  {"min_prob", p.min_prob}};
    }
    out["params"] = std::move(params);
    json perm = json::array();
    for (std::size_t index : view.ordering().perm) {
        perm.push_back(index + 1);
    }
    out["perm"] = std::move(perm);
    // Keys are 1-based element indices.
    json ids = json::object();
    for (int id = 1; id <= static_cast<int>(view.interactable_count()); ++id) {
        ids[std::to_string(*view.index_of(ElementId{id}) + 1)] = id;
    }
    out["ids"] = std::move(ids);
    return out;
}

std::string serialize_ordering(const OrderingMethod& method, const OrderedView& view) {
    return ordering_to_json(method, view).dump(2) + "\n";
}

Ordering parse_ordering(std::string_view document, std::size_t n) {
    json root;
    try {
        root = json::parse(document);
    } catch (const json::parse_error& err) {
        throw Error(ErrorKind::MalformedFile, err.what());
    }
    auto perm = root.find("perm");
    if (!root.is_object() || perm == root.end() || !perm->is_array()) {
        throw Error(ErrorKind::MalformedFile, "/perm: expected an array of 1-based indices");
    }
    Ordering out;
    for (const auto& v : *perm) {
        if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
            throw Error(ErrorKind::MalformedFile, "/perm: indices must be positive integers");
        }
        out.perm.push_back(v.get<std::size_t>() - 1);
    }
    if (!is_bijection(out, n)) {
        throw Error(ErrorKind::InvalidPermutation,
                    "ordering file perm is not a permutation of 1.." + std::to_string(n));
    }
    return out;
}

Ordering load_ordering(const std::filesystem::path& path, std::size_t n) {
    return parse_ordering(read_text_file(path), n);
}

} // namespace screenorder
