#include "trialmatch/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <queue>

#include "binary_io.hpp"
#include "trialmatch/embed.hpp"
#include "trialmatch/error.hpp"

namespace trialmatch {

namespace {
constexpr std::string_view kMagic = "TMVX";
constexpr std::uint32_t kVersion = 1;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Per-thread visit marks; a fresh epoch per walk avoids clearing.
struct VisitMarks {
    std::vector<std::uint32_t> tags;
    std::uint32_t epoch = 0;

    void begin(std::size_t n) {
        if (tags.size() < n) tags.resize(n, 0);
        if (++epoch == 0) {
            std::fill(tags.begin(), tags.end(), 0);
            epoch = 1;
        }
    }
    bool visit(std::uint32_t node) {
        if (tags[node] == epoch) return false;
        tags[node] = epoch;
        return true;
    }
};

thread_local VisitMarks t_marks;

struct LessSim {
    bool operator()(const std::pair<double, std::uint32_t>& a, const std::pair<double, std::uint32_t>& b) const {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;
    }
};
struct GreaterSim {
    bool operator()(const std::pair<double, std::uint32_t>& a, const std::pair<double, std::uint32_t>& b) const {
        return LessSim{}(b, a);
    }
};
}  // namespace

HnswIndex::HnswIndex(std::size_t dimension, HnswParams params)
    : dimension_(dimension), params_(params), rng_state_(params.seed) {
    if (params_.M < 2) throw Error(Errc::InvalidArgument, "HNSW M must be at least 2");
    if (params_.ef_construction == 0 || params_.ef_search == 0) {
        throw Error(Errc::InvalidArgument, "HNSW ef values must be positive");
    }
    level_mult_ = 1.0 / std::log(static_cast<double>(params_.M));
}

std::span<const float> HnswIndex::at(std::uint32_t node) const {
    return {data_.data() + static_cast<std::size_t>(node) * dimension_, dimension_};
}

double HnswIndex::similarity(std::span<const float> q, std::uint32_t node) const { return dot(q, at(node)); }

std::span<const float> HnswIndex::vector(const std::string& doc_id) const {
    auto it = numbers_.find(doc_id);
    if (it == numbers_.end()) throw Error(Errc::UnknownDocId, "unknown document id: " + doc_id);
    return at(it->second);
}

int HnswIndex::draw_level() {
    // uniform in (0, 1]
    const double u = 1.0 - static_cast<double>(splitmix64(rng_state_) >> 11) * 0x1.0p-53;
    return static_cast<int>(std::floor(-std::log(u) * level_mult_));
}

std::vector<HnswIndex::Scored> HnswIndex::search_layer(std::span<const float> q,
                                                       const std::vector<std::uint32_t>& entry_points,
                                                       std::size_t ef, int level, const IdFilter* allowed) const {
    auto& marks = t_marks;
    marks.begin(ids_.size());
    auto is_allowed = [&](std::uint32_t node) { return !allowed || allowed->contains(ids_[node]); };

    std::priority_queue<Scored, std::vector<Scored>, LessSim> candidates;  // best on top
    std::priority_queue<Scored, std::vector<Scored>, GreaterSim> found;    // worst on top
    for (auto ep : entry_points) {
        if (!marks.visit(ep)) continue;
        const double s = similarity(q, ep);
        candidates.emplace(s, ep);
        if (is_allowed(ep)) {
            found.emplace(s, ep);
            if (found.size() > ef) found.pop();
        }
    }

    while (!candidates.empty()) {
        const auto [cs, c] = candidates.top();
        // stop only once ef allowed nodes are held; a filtered walk keeps
        // expanding through disallowed nodes until then
        if (found.size() >= ef && cs < found.top().first) break;
        candidates.pop();
        for (auto e : links_[c][static_cast<std::size_t>(level)]) {
            if (!marks.visit(e)) continue;
            const double s = similarity(q, e);
            if (found.size() < ef || s > found.top().first) {
                candidates.emplace(s, e);
                if (is_allowed(e)) {
                    found.emplace(s, e);
                    if (found.size() > ef) found.pop();
                }
            }
        }
    }

    std::vector<Scored> out;
    out.reserve(found.size());
    while (!found.empty()) {
        out.push_back(found.top());
        found.pop();
    }
    std::reverse(out.begin(), out.end());  // best first
    return out;
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(std::vector<Scored> candidates, std::size_t m) const {
    std::sort(candidates.begin(), candidates.end(), GreaterSim{});
    std::vector<std::uint32_t> chosen;
    for (const auto& [s, c] : candidates) {
        if (chosen.size() >= m) break;
        bool keep = true;
        for (auto r : chosen) {
            if (dot(at(c), at(r)) > s) {
                keep = false;
                break;
            }
        }
        if (keep) chosen.push_back(c);
    }
    return chosen;
}

void HnswIndex::insert(const std::string& doc_id, std::span<const float> vec) {
    if (finalized_) throw Error(Errc::IndexFinalized, "index is finalized; insert rejected for " + doc_id);
    if (vec.size() != dimension_) {
        throw Error(Errc::DimensionMismatch, "vector for " + doc_id + " has dimension " + std::to_string(vec.size()) +
                                                 ", index expects " + std::to_string(dimension_));
    }
    if (numbers_.contains(doc_id)) throw Error(Errc::DuplicateDocId, "duplicate document id: " + doc_id);

    const auto node = static_cast<std::uint32_t>(ids_.size());
    const int level = draw_level();
    ids_.push_back(doc_id);
    numbers_.emplace(doc_id, node);
    data_.insert(data_.end(), vec.begin(), vec.end());
    links_.emplace_back(static_cast<std::size_t>(level) + 1);

    if (!entry_) {
        entry_ = node;
        max_level_ = level;
        return;
    }

    const auto q = at(node);
    std::vector<std::uint32_t> eps{*entry_};
    for (int l = max_level_; l > level; --l) {
        auto w = search_layer(q, eps, 1, l, nullptr);
        eps = {w.front().second};
    }
    for (int l = std::min(level, max_level_); l >= 0; --l) {
        auto w = search_layer(q, eps, params_.ef_construction, l, nullptr);
        // layer 0 takes up to 2*M links from the start, as FAISS does
        auto chosen = select_neighbors(w, max_links(l));
        const auto lv = static_cast<std::size_t>(l);
        links_[node][lv] = chosen;
        for (auto e : chosen) {
            auto& list = links_[e][lv];
            list.push_back(node);
            if (list.size() > max_links(l)) {
                std::vector<Scored> pool;
                pool.reserve(list.size());
                for (auto x : list) pool.emplace_back(dot(at(e), at(x)), x);
                list = select_neighbors(std::move(pool), max_links(l));
            }
        }
        eps.clear();
        for (const auto& [s, n] : w) eps.push_back(n);
    }
    if (level > max_level_) {
        entry_ = node;
        max_level_ = level;
    }
}

std::vector<char> HnswIndex::reachable_mask() const {
    std::vector<char> seen(ids_.size(), 0);
    if (!entry_) return seen;
    std::deque<std::uint32_t> queue{*entry_};
    seen[*entry_] = 1;
    while (!queue.empty()) {
        auto n = queue.front();
        queue.pop_front();
        for (auto e : links_[n][0]) {
            if (!seen[e]) {
                seen[e] = 1;
                queue.push_back(e);
            }
        }
    }
    return seen;
}

std::size_t HnswIndex::reachable_count() const {
    auto mask = reachable_mask();
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::size_t HnswIndex::max_layer0_degree() const {
    std::size_t best = 0;
    for (const auto& node : links_) best = std::max(best, node[0].size());
    return best;
}

void HnswIndex::finalize() {
    if (finalized_) return;
    auto seen = reachable_mask();
    for (std::uint32_t u = 0; u < ids_.size(); ++u) {
        if (seen[u]) continue;
        // attach u under the closest node the walk can already reach
        auto w = search_layer(at(u), {*entry_}, params_.ef_construction, 0, nullptr);
        links_[w.front().second][0].push_back(u);
        std::deque<std::uint32_t> queue{u};
        seen[u] = 1;
        while (!queue.empty()) {
            auto n = queue.front();
            queue.pop_front();
            for (auto e : links_[n][0]) {
                if (!seen[e]) {
                    seen[e] = 1;
                    queue.push_back(e);
                }
            }
        }
    }
    finalized_ = true;
}

std::vector<Neighbor> HnswIndex::search(std::span<const float> query, std::size_t k, const IdFilter* allowed,
                                        std::optional<std::size_t> ef) const {
    if (query.size() != dimension_) {
        throw Error(Errc::DimensionMismatch, "query has dimension " + std::to_string(query.size()) +
                                                 ", index expects " + std::to_string(dimension_));
    }
    if (k == 0 || !entry_) return {};
    const std::size_t width = std::max(ef.value_or(params_.ef_search), k);

    std::vector<std::uint32_t> eps{*entry_};
    for (int l = max_level_; l > 0; --l) {
        auto w = search_layer(query, eps, 1, l, nullptr);
        eps = {w.front().second};
    }
    auto w = search_layer(query, eps, width, 0, allowed);

    std::vector<Neighbor> out;
    out.reserve(w.size());
    for (const auto& [s, n] : w) out.push_back({ids_[n], s});
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

void HnswIndex::save(std::ostream& out) const {
    binary::put_header(out, kMagic, kVersion);
    binary::put<std::uint64_t>(out, dimension_);
    binary::put<std::uint64_t>(out, params_.M);
    binary::put<std::uint64_t>(out, params_.ef_construction);
    binary::put<std::uint64_t>(out, params_.ef_search);
    binary::put<std::uint64_t>(out, params_.seed);
    binary::put<std::uint64_t>(out, rng_state_);
    binary::put<std::uint8_t>(out, finalized_ ? 1 : 0);
    binary::put<std::int32_t>(out, max_level_);
    binary::put<std::int64_t>(out, entry_ ? static_cast<std::int64_t>(*entry_) : -1);
    binary::put<std::uint64_t>(out, ids_.size());
    for (std::size_t n = 0; n < ids_.size(); ++n) {
        binary::put_string(out, ids_[n]);
        binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(links_[n].size()));
        for (const auto& level : links_[n]) {
            binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(level.size()));
            for (auto e : level) binary::put(out, e);
        }
    }
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(float)));
    if (!out) throw Error(Errc::Io, "failed writing vector index segment");
}

HnswIndex HnswIndex::load(std::istream& in) {
    binary::check_header(in, kMagic, kVersion);
    const auto dimension = binary::get<std::uint64_t>(in);
    HnswParams params;
    params.M = binary::get<std::uint64_t>(in);
    params.ef_construction = binary::get<std::uint64_t>(in);
    params.ef_search = binary::get<std::uint64_t>(in);
    params.seed = binary::get<std::uint64_t>(in);
    HnswIndex index(dimension, params);
    index.rng_state_ = binary::get<std::uint64_t>(in);
    index.finalized_ = binary::get<std::uint8_t>(in) != 0;
    index.max_level_ = binary::get<std::int32_t>(in);
    const auto entry = binary::get<std::int64_t>(in);
    const auto n = binary::get<std::uint64_t>(in);
    if (entry >= static_cast<std::int64_t>(n) || (entry < 0) != (n == 0)) {
        throw Error(Errc::IndexFormat, "bad entry point in vector segment");
    }
    if (entry >= 0) index.entry_ = static_cast<std::uint32_t>(entry);
    index.links_.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        auto id = binary::get_string(in);
        if (!index.numbers_.emplace(id, static_cast<std::uint32_t>(i)).second) {
            throw Error(Errc::IndexFormat, "duplicate document id in segment: " + id);
        }
        index.ids_.push_back(std::move(id));
        const auto levels = binary::get<std::uint32_t>(in);
        if (levels == 0 || static_cast<int>(levels) > index.max_level_ + 1) {
            throw Error(Errc::IndexFormat, "bad node level in vector segment");
        }
        index.links_[i].resize(levels);
        for (auto& level : index.links_[i]) {
            const auto count = binary::get<std::uint32_t>(in);
            level.reserve(count);
            for (std::uint32_t c = 0; c < count; ++c) {
                const auto e = binary::get<std::uint32_t>(in);
                if (e >= n) throw Error(Errc::IndexFormat, "neighbor out of range in vector segment");
                level.push_back(e);
            }
        }
    }
    index.data_.resize(n * dimension);
    if (!in.read(reinterpret_cast<char*>(index.data_.data()),
                 static_cast<std::streamsize>(index.data_.size() * sizeof(float)))) {
        throw Error(Errc::IndexFormat, "truncated vector data");
    }
    return index;
}

}  // namespace trialmatch
