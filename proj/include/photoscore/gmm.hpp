#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "photoscore/image.hpp"

namespace photoscore::detail {

// Full-covariance RGB Gaussian mixture with hard component assignment, as
// used by the GrabCut colour models.
class ColorGmm {
public:
    explicit ColorGmm(int components);

    int components() const noexcept { return static_cast<int>(comp_.size()); }
    double weight(int k) const { return comp_[static_cast<std::size_t>(k)].weight; }

    // -log(pi_k) + 0.5 log det(Sigma_k) + 0.5 d' Sigma_k^-1 d. Infinite for
    // components with zero weight.
    double component_cost(int k, const Rgb& z) const;
    // Lowest-cost component; ties go to the lowest index.
    int best_component(const Rgb& z) const;
    double cost(const Rgb& z) const;

    // Maximum-likelihood weights, means and covariances from hard
    // assignments. A component keeps its previous Gaussian when the new one
    // would not lower the cost of its assigned samples, so the summed cost
    // never increases across refits.
    void fit(std::span<const Rgb> samples, std::span<const int> assignment);

private:
    struct Component {
        double weight = 0;
        std::array<double, 3> mean{};
        std::array<double, 9> inverse{};
        double half_log_det = 0;
        bool has_gaussian = false;
    };

    double gaussian_cost(const Component& c, const Rgb& z) const;
    static bool set_covariance(Component& c, const std::array<double, 9>& cov);

    std::vector<Component> comp_;
};

// k-means with k-means++ seeding; labels ties to the lowest centre index.
std::vector<int> kmeans_assign(std::span<const Rgb> samples, int k, std::uint64_t seed,
                               int iterations = 10);

// Boykov-Kolmogorov max-flow on a graph with terminal (source/sink) links.
class MaxFlowGraph {
public:
    explicit MaxFlowGraph(int vertices);

    // Capacities source->v and v->sink; may be called more than once.
    void add_terminal_weights(int v, double source_cap, double sink_cap);
    void add_edge(int u, int v, double cap, double reverse_cap);

    double max_flow();
    // After max_flow(): true when v stays on the source side of the min cut.
    bool in_source_segment(int v) const;

private:
    struct Vertex {
        int next = -1;  // active-queue link, -1 when not queued
        int parent = 0;
        int first = 0;
        int ts = 0;
        int dist = 0;
        double weight = 0;  // >0 residual from source, <0 residual to sink
        std::uint8_t tree = 0;
    };
    struct Edge {
        int dst = 0;
        int next = 0;
        double weight = 0;
    };

    std::vector<Vertex> vtx_;
    std::vector<Edge> edges_;
    std::vector<bool> source_side_;
    double flow_ = 0;
};

}  // namespace photoscore::detail
