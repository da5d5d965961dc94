#include "fdiag/link_clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace fdiag {

std::vector<ParameterVector> rescale_by_feature_max(std::span<const ParameterVector> vectors) {
    if (vectors.empty()) return {};
    const std::size_t dim = vectors.front().values.size();
    std::vector<double> max_value(dim, -std::numeric_limits<double>::infinity());
    for (const auto& v : vectors) {
        if (v.values.size() != dim) throw std::invalid_argument("rescale: dimension mismatch");
        for (std::size_t f = 0; f < dim; ++f) max_value[f] = std::max(max_value[f], v.values[f]);
    }
    for (double m : max_value)
        if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("rescale: feature maximum must be positive");
    std::vector<ParameterVector> out(vectors.begin(), vectors.end());
    for (auto& v : out)
        for (std::size_t f = 0; f < dim; ++f) v.values[f] /= max_value[f];
    return out;
}

Dendrogram hac_ward(std::span<const std::vector<double>> vectors) {
    const std::size_t n = vectors.size();
    if (n < 2) throw std::invalid_argument("hac_ward: need at least two vectors");
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != dim) throw std::invalid_argument("hac_ward: dimension mismatch");

    // Active clusters occupy slots; slot i starts as leaf i.
    std::vector<std::size_t> label(n), size(n, 1);
    std::iota(label.begin(), label.end(), 0);
    std::vector<bool> active(n, true);
    std::vector<double> cost(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double sq = 0.0;
            for (std::size_t f = 0; f < dim; ++f) {
                const double d = vectors[i][f] - vectors[j][f];
                sq += d * d;
            }
            cost[i * n + j] = cost[j * n + i] = 0.5 * sq;
        }

    Dendrogram dendrogram{n, {}};
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = n, bj = n;
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::size_t, std::size_t> best_labels{0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double c = cost[i * n + j];
                const std::pair<std::size_t, std::size_t> labels{std::min(label[i], label[j]), std::max(label[i], label[j])};
                if (bi == n || c < best || (c == best && labels < best_labels)) {
                    best = c;
                    bi = i;
                    bj = j;
                    best_labels = labels;
                }
            }
        }
        const std::size_t ni = size[bi], nj = size[bj];
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double nk = static_cast<double>(size[k]);
            const double updated = ((static_cast<double>(ni) + nk) * cost[bi * n + k] +
                                    (static_cast<double>(nj) + nk) * cost[bj * n + k] - nk * best) /
                                   (static_cast<double>(ni + nj) + nk);
            cost[bi * n + k] = cost[k * n + bi] = updated;
        }
        dendrogram.merges.push_back({best_labels.first, best_labels.second, best, ni + nj});
        label[bi] = n + step;
        size[bi] = ni + nj;
        active[bj] = false;
    }
    return dendrogram;
}

Dendrogram hac_ward(std::span<const ParameterVector> vectors) {
    std::vector<std::vector<double>> values;
    values.reserve(vectors.size());
    for (const auto& v : vectors) values.push_back(v.values);
    return hac_ward(std::span<const std::vector<double>>(values));
}

std::vector<std::size_t> cut(const Dendrogram& dendrogram, std::size_t k) {
    const std::size_t n = dendrogram.n_leaves;
    if (k < 1 || k > n) throw std::invalid_argument("cut: k must lie in [1, N]");
    // Union-find over labels, applying the first N - k merges.
    std::vector<std::size_t> parent(2 * n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t m = 0; m < n - k; ++m) {
        const auto& merge = dendrogram.merges[m];
        parent[find(merge.a)] = n + m;
        parent[find(merge.b)] = n + m;
    }
    std::map<std::size_t, std::size_t> ids;
    std::vector<std::size_t> out(n);
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        const std::size_t root = find(leaf);
        auto it = ids.find(root);
        if (it == ids.end()) it = ids.emplace(root, ids.size()).first;
        out[leaf] = it->second;
    }
    return out;
}

std::vector<ClusterSummary> summarize(std::span<const std::size_t> assignments,
                                      std::span<const ParameterVector> raw, std::span<const LinkSeries> series) {
    if (assignments.size() != raw.size()) throw std::invalid_argument("summarize: assignments must cover all links");
    std::map<std::string, const LinkSeries*> by_id;
    for (const auto& s : series) by_id[s.link.id] = &s;
    const std::size_t n_clusters =
        assignments.empty() ? 0 : *std::max_element(assignments.begin(), assignments.end()) + 1;
    std::vector<ClusterSummary> out(n_clusters);
    const std::size_t dim = raw.empty() ? 0 : raw.front().values.size();
    for (std::size_t c = 0; c < n_clusters; ++c) {
        ClusterSummary& s = out[c];
        s.label = c;
        std::vector<std::vector<double>> features(dim);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (assignments[i] != c) continue;
            s.members.push_back(raw[i].link_id);
            for (std::size_t f = 0; f < dim; ++f) features[f].push_back(raw[i].values[f]);
            auto it = by_id.find(raw[i].link_id);
            s.events.push_back(it == by_id.end() ? EventGroupCounts{} : count_event_groups(*it->second));
        }
        if (s.members.empty()) continue;
        for (auto& f : features) s.parameters.push_back(five_number_summary(std::move(f)));
    }
    return out;
}

}  // namespace fdiag
