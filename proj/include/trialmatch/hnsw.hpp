#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trialmatch/lexical_index.hpp"

namespace trialmatch {

struct HnswParams {
    std::size_t M = 16;  // layer 0 links up to 2*M
    std::size_t ef_construction = 200;
    std::size_t ef_search = 100;
    std::uint64_t seed = 42;

    friend bool operator==(const HnswParams&, const HnswParams&) = default;
};

struct Neighbor {
    std::string id;
    double similarity = 0.0;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Hierarchical navigable small-world graph over unit vectors, scored by dot
/// product (cosine for normalized inputs). Single writer; once finalized the
/// graph is read-only and safe to search from many threads.
class HnswIndex {
public:
    explicit HnswIndex(std::size_t dimension = 0, HnswParams params = {});

    /// Throws DimensionMismatch, DuplicateDocId, IndexFinalized.
    void insert(const std::string& doc_id, std::span<const float> vector);

    /// Links any node the layer-0 walk from the entry point cannot reach, then
    /// freezes the index.
    void finalize();

    /// Up to k results by descending similarity, ties by ascending id. With a
    /// filter, only allowed ids are returned and the walk keeps going until ef
    /// allowed nodes are held. `ef` defaults to params().ef_search and is
    /// raised to k when smaller.
    std::vector<Neighbor> search(std::span<const float> query, std::size_t k, const IdFilter* allowed = nullptr,
                                 std::optional<std::size_t> ef = std::nullopt) const;

    std::size_t size() const { return ids_.size(); }
    std::size_t dimension() const { return dimension_; }
    const HnswParams& params() const { return params_; }
    bool finalized() const { return finalized_; }
    void set_ef_search(std::size_t ef) { params_.ef_search = ef; }

    bool contains(const std::string& doc_id) const { return numbers_.contains(doc_id); }
    std::span<const float> vector(const std::string& doc_id) const;
    const std::vector<std::string>& ids() const { return ids_; }

    /// Count of nodes reachable over layer-0 links from the entry point.
    std::size_t reachable_count() const;
    /// Largest layer-0 out-degree; repairs may push a node past 2*M.
    std::size_t max_layer0_degree() const;
    int max_level() const { return max_level_; }

    void save(std::ostream& out) const;
    static HnswIndex load(std::istream& in);

private:
    using Scored = std::pair<double, std::uint32_t>;

    std::span<const float> at(std::uint32_t node) const;
    double similarity(std::span<const float> q, std::uint32_t node) const;
    int draw_level();
    std::vector<Scored> search_layer(std::span<const float> q, const std::vector<std::uint32_t>& entry_points,
                                     std::size_t ef, int level, const IdFilter* allowed) const;
    std::vector<std::uint32_t> select_neighbors(std::vector<Scored> candidates, std::size_t m) const;
    std::size_t max_links(int level) const { return level == 0 ? 2 * params_.M : params_.M; }
    std::vector<char> reachable_mask() const;

    std::size_t dimension_;
    HnswParams params_;
    double level_mult_;
    std::uint64_t rng_state_;
    std::vector<float> data_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::uint32_t> numbers_;
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // [node][level]
    std::optional<std::uint32_t> entry_;
    int max_level_ = -1;
    bool finalized_ = false;
};

}  // namespace trialmatch
