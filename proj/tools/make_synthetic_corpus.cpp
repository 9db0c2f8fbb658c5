// Writes the deterministic synthetic trial corpus used by the end-to-end tests.

#include <iostream>

#include <nlohmann/json.hpp>

#include "trialmatch/synthetic.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_synthetic_corpus <out_dir>\n";
        return 2;
    }
    try {
        trialmatch::synthetic::write_corpus(trialmatch::synthetic::make_corpus(), argv[1]);
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "Io"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
