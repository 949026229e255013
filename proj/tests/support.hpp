#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nehari/graph.hpp"

namespace nehari::testing {

/// Random spanning tree plus `extra` chords; b, m in [0.5, 2], c in [0, 1].
inline WeightedGraph random_connected_graph(std::size_t n, std::uint64_t seed, std::size_t extra = 0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> w(0.5, 2.0);
    std::uniform_real_distribution<double> kill(0.0, 1.0);
    WeightedGraph::Builder b;
    for (std::size_t i = 0; i < n; ++i) {
        b.add_vertex(static_cast<std::int64_t>(i), w(rng), kill(rng));
    }
    std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        b.add_edge(i, j, w(rng));
        used[i][j] = used[j][i] = true;
    }
    std::size_t added = 0;
    for (std::size_t tries = 0; n > 2 && added < extra && tries < 100 * (extra + 1); ++tries) {
        const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        if (i == j || used[i][j]) {
            continue;
        }
        b.add_edge(i, j, w(rng));
        used[i][j] = used[j][i] = true;
        ++added;
    }
    return b.build();
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = normal(rng);
    }
    return v;
}

/// Weighted path 0 - 1 - ... with the given consecutive weights, m = 1, c = 0.
inline WeightedGraph weighted_path(const std::vector<double>& weights)
{
    WeightedGraph::Builder b;
    for (std::size_t i = 0; i <= weights.size(); ++i) {
        b.add_vertex(static_cast<std::int64_t>(i), 1.0);
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        b.add_edge(i, i + 1, weights[i]);
    }
    return b.build();
}

/// Dense Floyd-Warshall distances with edge length 1/b, an oracle for Dijkstra.
inline std::vector<std::vector<double>> floyd_warshall(const WeightedGraph& g)
{
    const std::size_t n = g.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, kInfinity));
    for (std::size_t x = 0; x < n; ++x) {
        d[x][x] = 0.0;
        for (const auto& e : g.neighbors(x)) {
            if (e.weight > 0.0 && e.to != x) {
                d[x][e.to] = std::min(d[x][e.to], 1.0 / e.weight);
            }
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
            }
        }
    }
    return d;
}

/// Fresh directory under the system temp path, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("nehari_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace nehari::testing
