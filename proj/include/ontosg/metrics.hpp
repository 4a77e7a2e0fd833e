#pragma once

// Predicate detection metrics: R@K, zR@K and mR@K under a per-pair graph
// constraint k.
//
// Edge-case rules:
//  - images with an empty (restricted) ground truth are skipped and counted;
//  - the recall divisor is min(K, |GT|), where |GT| counts at most k
//    predicates per labelled object pair;
//  - aggregation is either the mean of per-image recalls or the ratio of
//    summed hits to summed divisors over the dataset;
//  - optionally only proposals on labelled pairs take part in the ranking.

#include <algorithm>
#include <cstdio>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ontosg/dataset.hpp"
#include "ontosg/error.hpp"
#include "ontosg/json_io.hpp"
#include "ontosg/postproc.hpp"
#include "ontosg/reasoner.hpp"

namespace ontosg {

enum class Aggregation { per_image_mean, dataset_micro };

inline const char* to_string(Aggregation a) {
    return a == Aggregation::per_image_mean ? "per_image_mean" : "dataset_micro";
}

struct RecallCounts {
    std::size_t hits = 0;
    std::size_t divisor = 0;

    double value() const { return static_cast<double>(hits) / static_cast<double>(divisor); }
};

/// Top-K selection after the per-pair graph constraint. Duplicate proposals
/// keep their best-ranked occurrence.
inline std::vector<ScoredTriplet> top_k_selection(std::vector<ScoredTriplet> proposals, std::size_t K, std::size_t k,
                                                  const RankOrder& order = {}) {
    sort_proposals(proposals, order);
    std::set<Triplet> seen;
    std::vector<ScoredTriplet> unique;
    for (auto& p : proposals) {
        if (seen.insert(p.triplet()).second) {
            unique.push_back(std::move(p));
        }
    }
    auto selected = apply_graph_constraint(std::move(unique), k, order);
    if (selected.size() > K) {
        selected.resize(K);
    }
    return selected;
}

/// Hits and divisor for one image; nullopt when the ground truth is empty.
inline std::optional<RecallCounts> recall_counts(const TripletSet& gt, const std::vector<ScoredTriplet>& proposals,
                                                 std::size_t K, std::size_t k, const RankOrder& order = {}) {
    if (gt.empty()) {
        return std::nullopt;
    }
    if (K == 0 || k == 0) {
        throw std::invalid_argument("K and k must be positive");
    }
    std::map<std::pair<ObjectId, ObjectId>, std::size_t> per_pair;
    for (const auto& e : gt) {
        ++per_pair[{e.triplet.subject, e.triplet.object}];
    }
    std::size_t effective = 0;
    for (const auto& [_, n] : per_pair) {
        effective += std::min(n, k);
    }
    RecallCounts counts;
    counts.divisor = std::min(K, effective);
    for (const auto& p : top_k_selection(proposals, K, k, order)) {
        counts.hits += gt.contains(p.triplet()) ? 1 : 0;
    }
    return counts;
}

inline std::optional<double> recall_at_k(const TripletSet& gt, const std::vector<ScoredTriplet>& proposals,
                                         std::size_t K, std::size_t k, const RankOrder& order = {}) {
    auto counts = recall_counts(gt, proposals, K, k, order);
    if (!counts) {
        return std::nullopt;
    }
    return counts->value();
}

/// Aggregated recall in [0, 1]; value is nullopt when every image was skipped.
struct Aggregate {
    std::optional<double> value;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
};

inline Aggregate aggregate(const std::vector<std::optional<RecallCounts>>& per_image, Aggregation mode) {
    Aggregate out;
    double sum = 0;
    std::size_t hits = 0, divisor = 0;
    for (const auto& c : per_image) {
        if (!c) {
            ++out.skipped;
            continue;
        }
        ++out.evaluated;
        sum += c->value();
        hits += c->hits;
        divisor += c->divisor;
    }
    if (out.evaluated > 0) {
        out.value = mode == Aggregation::per_image_mean
                        ? sum / static_cast<double>(out.evaluated)
                        : static_cast<double>(hits) / static_cast<double>(divisor);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset-level metrics

namespace detail {

inline const std::vector<ScoredTriplet>& proposals_for(const ScoresByImage& proposals, const std::string& image_id) {
    auto it = proposals.find(image_id);
    if (it == proposals.end()) {
        throw FormatError("no proposals for image '" + image_id + "'");
    }
    return it->second;
}

template <class Keep>
TripletSet restrict_gt(const TripletSet& gt, Keep keep) {
    TripletSet out;
    for (const auto& e : gt) {
        if (keep(e.triplet)) {
            out.insert(e.triplet, e.provenance);
        }
    }
    return out;
}

} // namespace detail

inline Aggregate dataset_recall_at_k(const std::vector<SceneGraph>& gt, const ScoresByImage& proposals, std::size_t K,
                                     std::size_t k, Aggregation mode = Aggregation::per_image_mean,
                                     const RankOrder& order = {}) {
    std::vector<std::optional<RecallCounts>> per_image;
    for (const auto& g : gt) {
        per_image.push_back(recall_counts(g.triplets, detail::proposals_for(proposals, g.image_id), K, k, order));
    }
    return aggregate(per_image, mode);
}

struct MeanRecall {
    std::map<std::string, Aggregate> per_predicate;
    std::optional<double> value; // mean over predicates with an evaluated image
};

inline MeanRecall mean_recall_at_k(const std::vector<SceneGraph>& gt, const ScoresByImage& proposals, std::size_t K,
                                   std::size_t k, Aggregation mode = Aggregation::per_image_mean,
                                   const RankOrder& order = {}) {
    std::set<std::string> predicates;
    for (const auto& g : gt) {
        for (const auto& e : g.triplets) {
            predicates.insert(e.triplet.predicate);
        }
    }
    MeanRecall out;
    double sum = 0;
    std::size_t counted = 0;
    for (const auto& p : predicates) {
        std::vector<std::optional<RecallCounts>> per_image;
        for (const auto& g : gt) {
            const TripletSet restricted =
                detail::restrict_gt(g.triplets, [&](const Triplet& t) { return t.predicate == p; });
            per_image.push_back(recall_counts(restricted, detail::proposals_for(proposals, g.image_id), K, k, order));
        }
        Aggregate agg = aggregate(per_image, mode);
        if (agg.value) {
            sum += *agg.value;
            ++counted;
        }
        out.per_predicate.emplace(p, agg);
    }
    if (counted > 0) {
        out.value = sum / static_cast<double>(counted);
    }
    return out;
}

/// R@K over ground-truth triplets whose class-level combination is absent
/// from the training registry.
inline Aggregate zero_shot_recall_at_k(const std::vector<SceneGraph>& gt, const ScoresByImage& proposals,
                                       const TripletRegistry& registry, std::size_t K, std::size_t k,
                                       Aggregation mode = Aggregation::per_image_mean,
                                       const RankOrder& order = {}) {
    std::vector<std::optional<RecallCounts>> per_image;
    for (const auto& g : gt) {
        const TripletSet unseen = detail::restrict_gt(g.triplets, [&](const Triplet& t) {
            return !registry.contains({g.find_object(t.subject)->class_name, t.predicate,
                                       g.find_object(t.object)->class_name});
        });
        per_image.push_back(recall_counts(unseen, detail::proposals_for(proposals, g.image_id), K, k, order));
    }
    return aggregate(per_image, mode);
}

// ---------------------------------------------------------------------------
// Full evaluation grid

struct MetricsConfig {
    std::vector<std::size_t> k_values{20, 50, 100};    // K cutoffs
    std::vector<std::size_t> graph_constraints{1, 8}; // k
    Aggregation aggregation = Aggregation::per_image_mean;
    bool restrict_to_labeled_pairs = false;
    std::optional<TripletRegistry> zero_shot_registry;
    RankOrder tie_order; // predicate names by default; RankOrder(onto) for ontology order
};

struct MetricCell {
    std::string metric; // "R@K", "mR@K" or "zR@K"
    std::size_t K = 0;
    std::size_t k = 0;
    std::optional<double> value; // percent
    std::size_t images_evaluated = 0;
    std::size_t images_skipped = 0;
};

struct MetricsReport {
    std::vector<MetricCell> cells;
    /// (K, k) → predicate → percent recall.
    std::map<std::pair<std::size_t, std::size_t>, std::map<std::string, std::optional<double>>> per_predicate;
    std::size_t images_evaluated = 0;
    std::size_t images_skipped = 0;

    const MetricCell* find(const std::string& metric, std::size_t K, std::size_t k) const {
        for (const auto& c : cells) {
            if (c.metric == metric && c.K == K && c.k == k) {
                return &c;
            }
        }
        return nullptr;
    }
};

/// Drops proposals on object pairs without ground-truth labels.
inline ScoresByImage restrict_to_labeled_pairs(const std::vector<SceneGraph>& gt, const ScoresByImage& proposals) {
    ScoresByImage out;
    for (const auto& g : gt) {
        std::set<std::pair<ObjectId, ObjectId>> labeled;
        for (const auto& e : g.triplets) {
            labeled.emplace(e.triplet.subject, e.triplet.object);
        }
        auto& dst = out[g.image_id];
        for (const auto& p : detail::proposals_for(proposals, g.image_id)) {
            if (labeled.contains({p.subject, p.object})) {
                dst.push_back(p);
            }
        }
    }
    return out;
}

inline MetricsReport evaluate(const std::vector<SceneGraph>& gt, const ScoresByImage& proposals,
                              const MetricsConfig& config) {
    std::set<std::string> gt_ids;
    for (const auto& g : gt) {
        gt_ids.insert(g.image_id);
    }
    for (const auto& g : gt) {
        if (!proposals.contains(g.image_id)) {
            throw FormatError("image id mismatch: '" + g.image_id + "' has ground truth but no proposals");
        }
    }
    for (const auto& [id, _] : proposals) {
        if (!gt_ids.contains(id)) {
            throw FormatError("image id mismatch: '" + id + "' has proposals but no ground truth");
        }
    }
    for (std::size_t K : config.k_values) {
        if (K == 0) {
            throw std::invalid_argument("K values must be positive");
        }
    }
    for (std::size_t k : config.graph_constraints) {
        if (k == 0) {
            throw std::invalid_argument("graph constraints must be at least 1");
        }
    }

    const ScoresByImage restricted =
        config.restrict_to_labeled_pairs ? restrict_to_labeled_pairs(gt, proposals) : ScoresByImage{};
    const ScoresByImage& used = config.restrict_to_labeled_pairs ? restricted : proposals;

    auto percent = [](std::optional<double> v) -> std::optional<double> {
        if (!v) {
            return std::nullopt;
        }
        return *v * 100.0;
    };

    MetricsReport report;
    for (const auto& g : gt) {
        (g.triplets.empty() ? report.images_skipped : report.images_evaluated)++;
    }
    for (std::size_t k : config.graph_constraints) {
        for (std::size_t K : config.k_values) {
            const Aggregate r = dataset_recall_at_k(gt, used, K, k, config.aggregation, config.tie_order);
            report.cells.push_back({"R@K", K, k, percent(r.value), r.evaluated, r.skipped});

            const MeanRecall m = mean_recall_at_k(gt, used, K, k, config.aggregation, config.tie_order);
            report.cells.push_back({"mR@K", K, k, percent(m.value), r.evaluated, r.skipped});
            auto& table = report.per_predicate[{K, k}];
            for (const auto& [p, agg] : m.per_predicate) {
                table[p] = percent(agg.value);
            }

            if (config.zero_shot_registry) {
                const Aggregate z = zero_shot_recall_at_k(gt, used, *config.zero_shot_registry, K, k,
                                                          config.aggregation, config.tie_order);
                report.cells.push_back({"zR@K", K, k, percent(z.value), z.evaluated, z.skipped});
            }
        }
    }
    return report;
}

/// Machine-readable report: metric → "k=<k>" → "<K>" → percent (null when
/// no image could be evaluated), plus the per-predicate mR table.
inline Json to_json(const MetricsReport& report) {
    Json grid = Json::object();
    for (const auto& c : report.cells) {
        grid[c.metric]["k=" + std::to_string(c.k)][std::to_string(c.K)] = c.value ? Json(*c.value) : Json(nullptr);
    }
    Json per_predicate = Json::object();
    for (const auto& [key, table] : report.per_predicate) {
        Json row = Json::object();
        for (const auto& [p, v] : table) {
            row[p] = v ? Json(*v) : Json(nullptr);
        }
        per_predicate["K=" + std::to_string(key.first) + ",k=" + std::to_string(key.second)] = row;
    }
    return {{"metrics", grid},
            {"per_predicate_recall", per_predicate},
            {"images_evaluated", report.images_evaluated},
            {"images_skipped", report.images_skipped}};
}

inline std::string format_report(const MetricsReport& report) {
    auto fmt = [](std::optional<double> v) {
        if (!v) {
            return std::string("n/a");
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v);
        return std::string(buf);
    };
    std::string out = "metric  K     k   value    evaluated  skipped\n";
    for (const auto& c : report.cells) {
        char line[128];
        std::snprintf(line, sizeof line, "%-6s  %-4zu  %-2zu  %-7s  %-9zu  %zu\n", c.metric.c_str(), c.K, c.k,
                      fmt(c.value).c_str(), c.images_evaluated, c.images_skipped);
        out += line;
    }
    for (const auto& [key, table] : report.per_predicate) {
        out += "\nper-predicate recall (K=" + std::to_string(key.first) + ", k=" + std::to_string(key.second) + ")\n";
        for (const auto& [p, v] : table) {
            out += "  " + p + ": " + fmt(v) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Baseline adaptation

/// Scores a model trained on source predicates in terms of ontology
/// predicates: each ontology predicate gets the arithmetic mean of the scores
/// of its mapped source predicates. Predicates with no scored source are
/// omitted.
inline std::map<std::string, double> average_mapped_scores(const PredicateMap& map,
                                                           const std::map<std::string, double>& source_scores) {
    std::map<std::string, double> out;
    for (const auto& [target, sources] : map.entries()) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& s : sources) {
            if (auto it = source_scores.find(s); it != source_scores.end()) {
                sum += it->second;
                ++n;
            }
        }
        if (n > 0) {
            out.emplace(target, sum / static_cast<double>(n));
        }
    }
    return out;
}

} // namespace ontosg
