#include "photoscore/gmm.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>

#include "photoscore/error.hpp"
#include "photoscore/random.hpp"

namespace photoscore::detail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Added to every covariance diagonal; below one 8-bit quantization step.
constexpr double kCovarianceFloor = 1e-5;

double sq_dist(const Rgb& a, const Rgb& b) {
    const double dr = a.r - b.r, dg = a.g - b.g, db = a.b - b.b;
    return dr * dr + dg * dg + db * db;
}

}  // namespace

ColorGmm::ColorGmm(int components) {
    if (components < 1) throw Error("GMM needs at least one component");
    comp_.resize(static_cast<std::size_t>(components));
}

double ColorGmm::gaussian_cost(const Component& c, const Rgb& z) const {
    const double d0 = z.r - c.mean[0], d1 = z.g - c.mean[1], d2 = z.b - c.mean[2];
    const auto& m = c.inverse;
    const double q = d0 * (m[0] * d0 + m[1] * d1 + m[2] * d2) +
                     d1 * (m[3] * d0 + m[4] * d1 + m[5] * d2) +
                     d2 * (m[6] * d0 + m[7] * d1 + m[8] * d2);
    return c.half_log_det + 0.5 * q;
}

double ColorGmm::component_cost(int k, const Rgb& z) const {
    const Component& c = comp_[static_cast<std::size_t>(k)];
    if (c.weight <= 0.0 || !c.has_gaussian) return kInf;
    return -std::log(c.weight) + gaussian_cost(c, z);
}

int ColorGmm::best_component(const Rgb& z) const {
    int best = 0;
    double best_cost = kInf;
    for (int k = 0; k < components(); ++k) {
        const double c = component_cost(k, z);
        if (c < best_cost) {
            best_cost = c;
            best = k;
        }
    }
    return best;
}

double ColorGmm::cost(const Rgb& z) const {
    double best = kInf;
    for (int k = 0; k < components(); ++k) best = std::min(best, component_cost(k, z));
    return best;
}

bool ColorGmm::set_covariance(Component& c, const std::array<double, 9>& s) {
    const double det = s[0] * (s[4] * s[8] - s[5] * s[7]) - s[1] * (s[3] * s[8] - s[5] * s[6]) +
                       s[2] * (s[3] * s[7] - s[4] * s[6]);
    if (!(det > 0.0) || !std::isfinite(det)) return false;
    auto& m = c.inverse;
    m[0] = (s[4] * s[8] - s[5] * s[7]) / det;
    m[1] = -(s[1] * s[8] - s[2] * s[7]) / det;
    m[2] = (s[1] * s[5] - s[2] * s[4]) / det;
    m[3] = -(s[3] * s[8] - s[5] * s[6]) / det;
    m[4] = (s[0] * s[8] - s[2] * s[6]) / det;
    m[5] = -(s[0] * s[5] - s[2] * s[3]) / det;
    m[6] = (s[3] * s[7] - s[4] * s[6]) / det;
    m[7] = -(s[0] * s[7] - s[1] * s[6]) / det;
    m[8] = (s[0] * s[4] - s[1] * s[3]) / det;
    c.half_log_det = 0.5 * std::log(det);
    c.has_gaussian = true;
    return true;
}

void ColorGmm::fit(std::span<const Rgb> samples, std::span<const int> assignment) {
    if (samples.size() != assignment.size()) throw Error("GMM fit: assignment size mismatch");
    if (samples.empty()) return;
    const std::size_t K = comp_.size();
    std::vector<std::size_t> counts(K, 0);
    std::vector<std::array<double, 3>> sums(K, {0, 0, 0});
    std::vector<std::vector<std::size_t>> members(K);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto k = static_cast<std::size_t>(assignment[i]);
        if (k >= K) throw Error("GMM fit: component index out of range");
        ++counts[k];
        sums[k][0] += samples[i].r;
        sums[k][1] += samples[i].g;
        sums[k][2] += samples[i].b;
        members[k].push_back(i);
    }
    const double total = static_cast<double>(samples.size());
    for (std::size_t k = 0; k < K; ++k) {
        Component& c = comp_[k];
        c.weight = static_cast<double>(counts[k]) / total;
        if (counts[k] == 0) continue;

        Component fresh;
        const double n = static_cast<double>(counts[k]);
        fresh.mean = {sums[k][0] / n, sums[k][1] / n, sums[k][2] / n};
        std::array<double, 9> cov{};
        for (std::size_t i : members[k]) {
            const double d[3] = {samples[i].r - fresh.mean[0], samples[i].g - fresh.mean[1],
                                 samples[i].b - fresh.mean[2]};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) cov[static_cast<std::size_t>(3 * a + b)] += d[a] * d[b];
        }
        for (double& v : cov) v /= n;
        cov[0] += kCovarianceFloor;
        cov[4] += kCovarianceFloor;
        cov[8] += kCovarianceFloor;
        if (!set_covariance(fresh, cov)) continue;

        if (c.has_gaussian) {
            double old_cost = 0.0, new_cost = 0.0;
            for (std::size_t i : members[k]) {
                old_cost += gaussian_cost(c, samples[i]);
                new_cost += gaussian_cost(fresh, samples[i]);
            }
            if (!(new_cost <= old_cost)) continue;
        }
        fresh.weight = c.weight;
        c = fresh;
    }
}

std::vector<int> kmeans_assign(std::span<const Rgb> samples, int k, std::uint64_t seed,
                               int iterations) {
    if (k < 1) throw Error("k-means needs k >= 1");
    const std::size_t n = samples.size();
    std::vector<int> label(n, 0);
    if (n == 0) return label;

    Rng rng(seed);
    std::vector<Rgb> centers;
    centers.push_back(samples[rng.below(n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(samples[i], centers[0]);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);
        }
        centers.push_back(samples[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], sq_dist(samples[i], centers.back()));
    }

    for (int it = 0; it < std::max(iterations, 1); ++it) {
        bool changed = it == 0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(samples[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(samples[i], centers[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (best != label[i]) changed = true;
            label[i] = best;
        }
        if (!changed) break;
        std::vector<std::array<double, 4>> acc(static_cast<std::size_t>(k), {0, 0, 0, 0});
        for (std::size_t i = 0; i < n; ++i) {
            auto& a = acc[static_cast<std::size_t>(label[i])];
            a[0] += samples[i].r;
            a[1] += samples[i].g;
            a[2] += samples[i].b;
            a[3] += 1.0;
        }
        for (std::size_t c = 0; c < centers.size(); ++c)
            if (acc[c][3] > 0)
                centers[c] = {acc[c][0] / acc[c][3], acc[c][1] / acc[c][3], acc[c][2] / acc[c][3]};
    }
    return label;
}

// ---------------------------------------------------------------------------

MaxFlowGraph::MaxFlowGraph(int vertices) {
    if (vertices < 0) throw Error("negative vertex count");
    vtx_.resize(static_cast<std::size_t>(vertices) + 1);  // last entry is the queue sentinel
    edges_.resize(2);  // indices 0/1 unused so 0 can mean "no edge"
}

void MaxFlowGraph::add_terminal_weights(int v, double source_cap, double sink_cap) {
    Vertex& x = vtx_[static_cast<std::size_t>(v)];
    if (x.weight > 0)
        source_cap += x.weight;
    else
        sink_cap -= x.weight;
    flow_ += std::min(source_cap, sink_cap);
    x.weight = source_cap - sink_cap;
}

void MaxFlowGraph::add_edge(int u, int v, double cap, double reverse_cap) {
    if (u == v) return;
    const int a = static_cast<int>(edges_.size());
    edges_.push_back({v, vtx_[static_cast<std::size_t>(u)].first, cap});
    vtx_[static_cast<std::size_t>(u)].first = a;
    edges_.push_back({u, vtx_[static_cast<std::size_t>(v)].first, reverse_cap});
    vtx_[static_cast<std::size_t>(v)].first = a + 1;
}

double MaxFlowGraph::max_flow() {
    constexpr int kTerminal = -1;
    constexpr int kOrphan = -2;
    const int n = static_cast<int>(vtx_.size()) - 1;
    const int nil = n;
    auto V = [this](int i) -> Vertex& { return vtx_[static_cast<std::size_t>(i)]; };
    auto E = [this](int i) -> Edge& { return edges_[static_cast<std::size_t>(i)]; };

    int last = nil;
    int curr_ts = 0;
    std::vector<int> orphans;
    V(nil).next = nil;

    for (int i = 0; i < n; ++i) {
        Vertex& v = V(i);
        v.ts = 0;
        v.next = -1;
        if (v.weight != 0) {
            V(last).next = i;
            last = i;
            v.dist = 1;
            v.parent = kTerminal;
            v.tree = v.weight < 0 ? 1 : 0;
        } else {
            v.parent = 0;
        }
    }
    int first = V(nil).next;
    V(last).next = nil;
    V(nil).next = -1;

    for (;;) {
        int e0 = -1;
        int ei = 0;

        // grow the source and sink trees until they touch
        while (first != nil) {
            const int v = first;
            if (V(v).parent != 0) {
                const std::uint8_t vt = V(v).tree;
                for (ei = V(v).first; ei != 0; ei = E(ei).next) {
                    if (E(ei ^ vt).weight == 0) continue;
                    const int u = E(ei).dst;
                    if (V(u).parent == 0) {
                        V(u).tree = vt;
                        V(u).parent = ei ^ 1;
                        V(u).ts = V(v).ts;
                        V(u).dist = V(v).dist + 1;
                        if (V(u).next == -1) {
                            V(u).next = nil;
                            V(last).next = u;
                            last = u;
                        }
                        continue;
                    }
                    if (V(u).tree != vt) {
                        e0 = ei ^ vt;
                        break;
                    }
                    if (V(u).dist > V(v).dist + 1 && V(u).ts <= V(v).ts) {
                        V(u).parent = ei ^ 1;
                        V(u).ts = V(v).ts;
                        V(u).dist = V(v).dist + 1;
                    }
                }
                if (e0 > 0) break;
            }
            first = V(v).next;
            V(v).next = -1;
        }
        if (e0 <= 0) break;

        // bottleneck along source-tree path, bridge edge and sink-tree path
        double min_weight = E(e0).weight;
        for (int k = 1; k >= 0; --k) {
            int v = E(e0 ^ k).dst;
            for (;;) {
                ei = V(v).parent;
                if (ei < 0) break;
                min_weight = std::min(min_weight, E(ei ^ k).weight);
                v = E(ei).dst;
            }
            min_weight = std::min(min_weight, std::abs(V(v).weight));
        }

        E(e0).weight -= min_weight;
        E(e0 ^ 1).weight += min_weight;
        flow_ += min_weight;

        for (int k = 1; k >= 0; --k) {
            int v = E(e0 ^ k).dst;
            for (;;) {
                ei = V(v).parent;
                if (ei < 0) break;
                E(ei ^ (k ^ 1)).weight += min_weight;
                if ((E(ei ^ k).weight -= min_weight) == 0) {
                    orphans.push_back(v);
                    V(v).parent = kOrphan;
                }
                v = E(ei).dst;
            }
            V(v).weight += min_weight * (1 - k * 2);
            if (V(v).weight == 0) {
                orphans.push_back(v);
                V(v).parent = kOrphan;
            }
        }

        // adopt orphans or free them
        ++curr_ts;
        while (!orphans.empty()) {
            const int v2 = orphans.back();
            orphans.pop_back();
            int min_dist = INT_MAX;
            e0 = 0;
            const std::uint8_t vt = V(v2).tree;

            for (ei = V(v2).first; ei != 0; ei = E(ei).next) {
                if (E(ei ^ (vt ^ 1)).weight == 0) continue;
                int u = E(ei).dst;
                if (V(u).tree != vt || V(u).parent == 0) continue;
                int d = 0;
                for (;;) {
                    if (V(u).ts == curr_ts) {
                        d += V(u).dist;
                        break;
                    }
                    const int ej = V(u).parent;
                    ++d;
                    if (ej < 0) {
                        if (ej == kOrphan) {
                            d = INT_MAX - 1;
                        } else {
                            V(u).ts = curr_ts;
                            V(u).dist = 1;
                        }
                        break;
                    }
                    u = E(ej).dst;
                }
                if (++d < INT_MAX) {
                    if (d < min_dist) {
                        min_dist = d;
                        e0 = ei;
                    }
                    for (u = E(ei).dst; V(u).ts != curr_ts; u = E(V(u).parent).dst) {
                        V(u).ts = curr_ts;
                        V(u).dist = --d;
                    }
                }
            }

            if ((V(v2).parent = e0) > 0) {
                V(v2).ts = curr_ts;
                V(v2).dist = min_dist;
                continue;
            }

            V(v2).ts = 0;
            for (ei = V(v2).first; ei != 0; ei = E(ei).next) {
                const int u = E(ei).dst;
                const int ej = V(u).parent;
                if (V(u).tree != vt || ej == 0) continue;
                if (E(ei ^ (vt ^ 1)).weight != 0 && V(u).next == -1) {
                    V(u).next = nil;
                    V(last).next = u;
                    last = u;
                }
                if (ej > 0 && E(ej).dst == v2) {
                    orphans.push_back(u);
                    V(u).parent = kOrphan;
                }
            }
        }
    }

    // Source side = vertices reachable from the source in the residual graph.
    source_side_.assign(static_cast<std::size_t>(n), false);
    std::vector<int> stack;
    for (int i = 0; i < n; ++i)
        if (V(i).weight > 0) {
            source_side_[static_cast<std::size_t>(i)] = true;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int e = V(v).first; e != 0; e = E(e).next) {
            const int u = E(e).dst;
            if (E(e).weight > 0 && !source_side_[static_cast<std::size_t>(u)]) {
                source_side_[static_cast<std::size_t>(u)] = true;
                stack.push_back(u);
            }
        }
    }
    return flow_;
}

bool MaxFlowGraph::in_source_segment(int v) const {
    return source_side_.at(static_cast<std::size_t>(v));
}

}  // namespace photoscore::detail
