#pragma once

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "hcl/hierarchy.hpp"
#include "hcl/matrix.hpp"
#include "hcl/rng.hpp"

namespace hcl::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Matrix m(r, c);
    for (double& v : m.flat()) v = scale * standard_normal(rng);
    return m;
}

inline bool bit_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::memcmp(&a.flat()[i], &b.flat()[i], sizeof(double)) != 0) return false;
    return true;
}

// Scratch directory under the test's working directory, wiped on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::current_path() / "scratch" / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Random tree: every node gets 0..max_children children up to max_depth and
// 0..max_images owned images drawn from a shared id space, so images repeat
// across nodes.
inline std::vector<NodeSpec> random_tree_specs(Rng& rng, int max_depth, int max_children, int max_images,
                                               int image_space) {
    std::vector<NodeSpec> specs;
    struct Item {
        std::string id;
        int depth;
    };
    std::vector<Item> stack{{"root", 0}};
    specs.push_back({"root", "root", std::nullopt, {}});
    int counter = 0;
    while (!stack.empty()) {
        Item it = stack.back();
        stack.pop_back();
        if (it.depth >= max_depth) continue;
        const int kids = it.depth == 0 ? 2 + static_cast<int>(uniform_index(rng, max_children - 1))
                                       : static_cast<int>(uniform_index(rng, max_children + 1));
        for (int k = 0; k < kids; ++k) {
            NodeSpec s;
            s.id = "n" + std::to_string(counter++);
            s.name = s.id;
            s.parent = it.id;
            const int imgs = static_cast<int>(uniform_index(rng, max_images + 1));
            std::vector<std::string> chosen;
            for (int i = 0; i < imgs; ++i) {
                std::string img = "img" + std::to_string(uniform_index(rng, image_space));
                if (std::find(chosen.begin(), chosen.end(), img) == chosen.end()) chosen.push_back(img);
            }
            s.images = chosen;
            specs.push_back(s);
            stack.push_back({s.id, it.depth + 1});
        }
    }
    return specs;
}

}  // namespace hcl::test
