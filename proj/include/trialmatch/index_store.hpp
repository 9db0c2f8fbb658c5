#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "trialmatch/hnsw.hpp"
#include "trialmatch/lexical_index.hpp"

namespace trialmatch {

/// Trial- and criterion-level indices built together over one corpus.
struct IndexSet {
    LexicalIndex trial_lexical;
    LexicalIndex criterion_lexical;
    HnswIndex trial_vectors;
    HnswIndex criterion_vectors;
    std::string embedder_backend;
};

inline constexpr int kIndexFormatVersion = 1;

/// Writes manifest.json plus one binary segment per index. Each file goes to
/// a temporary name first and is renamed into place.
void save_index_set(const IndexSet& set, const std::filesystem::path& dir);

/// Throws IndexFormat on a missing or inconsistent manifest or segment.
IndexSet load_index_set(const std::filesystem::path& dir);

/// Atomic whole-file write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace trialmatch
