#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdohkit/backend.hpp"
#include "sdohkit/csv.hpp"
#include "sdohkit/error.hpp"

namespace sdohkit::thematic {

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::Input, "cosine: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0)
        throw Error(ErrorKind::InvalidValue, "cosine undefined for zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    return 1.0 - cosine_similarity(a, b);
}

enum class Linkage { Single, Complete, Average };

inline Linkage linkage_from_string(const std::string& s) {
    if (s == "single") return Linkage::Single;
    if (s == "complete") return Linkage::Complete;
    if (s == "average") return Linkage::Average;
    throw Error(ErrorKind::Config, "unknown linkage: " + s);
}

struct ClusteringConfig {
    Linkage linkage = Linkage::Average;
    double merge_threshold = 0.4;  // cosine distance, in (0, 2)

    void validate() const {
        if (!(merge_threshold > 0.0 && merge_threshold < 2.0))
            throw Error(ErrorKind::Config, "merge_threshold must lie in (0, 2)");
    }
};

struct CodeCluster {
    std::vector<std::size_t> member_indices;  // sorted ascending
    std::size_t representative_index = 0;
    double cohesion = 1.0;  // mean pairwise similarity; 1 for singletons
};

namespace detail {

// Tie-break key for a candidate merge: lexicographically smallest
// (min member index, max member index) over the union of both clusters.
inline std::pair<std::size_t, std::size_t> merge_key(const std::vector<std::size_t>& a,
                                                     const std::vector<std::size_t>& b) {
    return {std::min(a.front(), b.front()), std::max(a.back(), b.back())};
}

}  // namespace detail

// Medoid: the member maximizing mean cosine similarity to the other members;
// ties resolve to the smallest index.
inline std::size_t representative_code(const std::vector<std::size_t>& members,
                                       const std::vector<std::vector<double>>& vectors) {
    if (members.empty()) throw Error(ErrorKind::EmptyInput, "empty cluster");
    if (members.size() == 1) return members.front();
    std::size_t best = members.front();
    double best_mean = -std::numeric_limits<double>::infinity();
    for (const std::size_t i : members) {
        double sum = 0;
        for (const std::size_t j : members)
            if (i != j) sum += cosine_similarity(vectors[i], vectors[j]);
        const double mean = sum / static_cast<double>(members.size() - 1);
        if (mean > best_mean + 1e-15 || (std::abs(mean - best_mean) <= 1e-15 && i < best)) {
            best_mean = mean;
            best = i;
        }
    }
    return best;
}

// Bottom-up hierarchical clustering over cosine distance. Starts from
// singletons, repeatedly merges the pair at minimum linkage distance
// (Lance-Williams updates), and stops once the minimum exceeds the
// threshold. Exact distance ties merge the pair with the lexicographically
// smallest (min member index, max member index).
inline std::vector<CodeCluster> agglomerative_cluster(
    const std::vector<std::vector<double>>& vectors, const ClusteringConfig& config) {
    config.validate();
    if (vectors.empty()) throw Error(ErrorKind::EmptyInput, "no vectors to cluster");
    const std::size_t n = vectors.size();
    for (const auto& v : vectors)
        if (v.size() != vectors.front().size())
            throw Error(ErrorKind::Input, "clustering: dimension mismatch");

    // pairwise distance matrix between live clusters
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist[i][j] = dist[j][i] = cosine_distance(vectors[i], vectors[j]);

    std::vector<std::vector<std::size_t>> members(n);
    std::vector<bool> alive(n, true);
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};

    std::size_t live = n;
    while (live > 1) {
        double best_d = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        std::pair<std::size_t, std::size_t> best_key{0, 0};
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!alive[j]) continue;
                const double d = dist[i][j];
                const auto key = detail::merge_key(members[i], members[j]);
                if (!found || d < best_d - 1e-15 ||
                    (std::abs(d - best_d) <= 1e-15 && key < best_key)) {
                    found = true;
                    best_d = d;
                    bi = i;
                    bj = j;
                    best_key = key;
                }
            }
        }
        if (!found || best_d > config.merge_threshold) break;

        // Lance-Williams update of distances to the merged cluster
        const double ni = static_cast<double>(members[bi].size());
        const double nj = static_cast<double>(members[bj].size());
        for (std::size_t k = 0; k < n; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            double d = 0;
            switch (config.linkage) {
                case Linkage::Single: d = std::min(dist[bi][k], dist[bj][k]); break;
                case Linkage::Complete: d = std::max(dist[bi][k], dist[bj][k]); break;
                case Linkage::Average:
                    d = (ni * dist[bi][k] + nj * dist[bj][k]) / (ni + nj);
                    break;
            }
            dist[bi][k] = dist[k][bi] = d;
        }
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        std::sort(members[bi].begin(), members[bi].end());
        alive[bj] = false;
        --live;
    }

    std::vector<CodeCluster> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        CodeCluster c;
        c.member_indices = members[i];
        c.representative_index = representative_code(c.member_indices, vectors);
        if (c.member_indices.size() > 1) {
            double sum = 0;
            std::size_t pairs = 0;
            for (std::size_t a = 0; a < c.member_indices.size(); ++a)
                for (std::size_t b = a + 1; b < c.member_indices.size(); ++b) {
                    sum += cosine_similarity(vectors[c.member_indices[a]],
                                             vectors[c.member_indices[b]]);
                    ++pairs;
                }
            c.cohesion = sum / static_cast<double>(pairs);
        }
        out.push_back(std::move(c));
    }
    // stable order: by smallest member index
    std::sort(out.begin(), out.end(), [](const CodeCluster& a, const CodeCluster& b) {
        return a.member_indices.front() < b.member_indices.front();
    });
    return out;
}

struct Factor {
    std::string name;
    std::size_t cluster_index = 0;
    std::size_t cluster_size = 0;
};

// One factor per cluster, named by override when present, else by its medoid
// code; ordered by descending cluster size, then name.
inline std::vector<Factor> consolidate(const std::vector<CodeCluster>& clusters,
                                       const std::vector<std::string>& codes,
                                       const std::map<std::size_t, std::string>& overrides = {}) {
    for (const auto& [idx, name] : overrides)
        if (idx >= clusters.size())
            throw Error(ErrorKind::Config,
                        "override references missing cluster " + std::to_string(idx));
    std::vector<Factor> out;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        Factor f;
        f.cluster_index = i;
        f.cluster_size = clusters[i].member_indices.size();
        const auto it = overrides.find(i);
        f.name = it != overrides.end() ? it->second : codes.at(clusters[i].representative_index);
        out.push_back(std::move(f));
    }
    std::sort(out.begin(), out.end(), [](const Factor& a, const Factor& b) {
        if (a.cluster_size != b.cluster_size) return a.cluster_size > b.cluster_size;
        return a.name < b.name;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Report and overrides file formats
// ---------------------------------------------------------------------------

inline std::string cluster_report_csv(const std::vector<CodeCluster>& clusters,
                                      const std::vector<std::string>& codes) {
    std::string out = "cluster_id,size,representative_code,member_codes\n";
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        std::string joined;
        for (std::size_t j = 0; j < clusters[i].member_indices.size(); ++j) {
            if (j > 0) joined += ";";
            joined += codes.at(clusters[i].member_indices[j]);
        }
        out += csv_row({std::to_string(i), std::to_string(clusters[i].member_indices.size()),
                        codes.at(clusters[i].representative_index), joined});
    }
    return out;
}

inline std::map<std::size_t, std::string> parse_overrides_csv(const std::string& text) {
    std::map<std::size_t, std::string> out;
    const auto rows = parse_csv(text);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 2)
            throw Error(ErrorKind::Config, "overrides row must be cluster_id,factor_name");
        if (i == 0 && rows[i][0] == "cluster_id") continue;  // optional header
        out[static_cast<std::size_t>(std::stoul(rows[i][0]))] = rows[i][1];
    }
    return out;
}

}  // namespace sdohkit::thematic
