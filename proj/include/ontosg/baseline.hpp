#pragma once

// Reference scorer without learning: a smoothed predicate-frequency prior per
// (subject class, object class) pair. Also hosts the multi-label hinge loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ontosg/dataset.hpp"
#include "ontosg/error.hpp"
#include "ontosg/json_io.hpp"
#include "ontosg/postproc.hpp"

namespace ontosg {

class FrequencyPrior {
public:
    using ClassPair = std::pair<std::string, std::string>;

    FrequencyPrior() = default;
    FrequencyPrior(double smoothing, std::vector<std::string> predicates)
        : smoothing_(smoothing), predicates_(std::move(predicates)) {
        if (!(smoothing_ >= 0.0) || !std::isfinite(smoothing_)) {
            throw std::invalid_argument("smoothing must be a finite value >= 0");
        }
    }

    double smoothing() const noexcept { return smoothing_; }
    const std::vector<std::string>& predicates() const noexcept { return predicates_; }
    const std::map<ClassPair, std::map<std::string, std::size_t>>& counts() const noexcept { return counts_; }

    void add(const std::string& subject_class, const std::string& object_class, const std::string& predicate,
             std::size_t n = 1) {
        if (std::find(predicates_.begin(), predicates_.end(), predicate) == predicates_.end()) {
            throw ReferenceError("predicate '" + predicate + "' is outside the prior's predicate set");
        }
        counts_[{subject_class, object_class}][predicate] += n;
    }

    std::size_t count(const std::string& subject_class, const std::string& object_class,
                      const std::string& predicate) const {
        auto pair = counts_.find({subject_class, object_class});
        if (pair == counts_.end()) {
            return 0;
        }
        auto it = pair->second.find(predicate);
        return it == pair->second.end() ? 0 : it->second;
    }

    /// log((count + a) / (total + a |P|)). A zero numerator (only possible
    /// without smoothing) maps to the lowest finite double so scores stay finite.
    double score(const std::string& subject_class, const std::string& object_class,
                 const std::string& predicate) const {
        std::size_t total = 0;
        if (auto pair = counts_.find({subject_class, object_class}); pair != counts_.end()) {
            for (const auto& [_, n] : pair->second) {
                total += n;
            }
        }
        const double numerator = static_cast<double>(count(subject_class, object_class, predicate)) + smoothing_;
        const double denominator =
            static_cast<double>(total) + smoothing_ * static_cast<double>(predicates_.size());
        if (numerator <= 0.0 || denominator <= 0.0) {
            return std::numeric_limits<double>::lowest();
        }
        return std::log(numerator / denominator);
    }

private:
    double smoothing_ = 1.0;
    std::vector<std::string> predicates_;
    std::map<ClassPair, std::map<std::string, std::size_t>> counts_;
};

/// Tallies every training triplet by (subject class, object class, predicate).
/// The predicate set is `predicates` (when given) followed by any further
/// predicate seen in training, in name order.
inline FrequencyPrior fit_prior(const std::vector<SceneGraph>& train, double smoothing = 1.0,
                                std::vector<std::string> predicates = {}) {
    std::set<std::string> extra;
    for (const auto& g : train) {
        for (const auto& e : g.triplets) {
            if (std::find(predicates.begin(), predicates.end(), e.triplet.predicate) == predicates.end()) {
                extra.insert(e.triplet.predicate);
            }
        }
    }
    predicates.insert(predicates.end(), extra.begin(), extra.end());
    FrequencyPrior prior(smoothing, std::move(predicates));
    for (const auto& g : train) {
        for (const auto& e : g.triplets) {
            prior.add(g.find_object(e.triplet.subject)->class_name, g.find_object(e.triplet.object)->class_name,
                      e.triplet.predicate);
        }
    }
    return prior;
}

/// One proposal per ordered object pair and predicate, in object order then
/// predicate order.
inline std::vector<ScoredTriplet> score_image(const FrequencyPrior& prior, const SceneGraph& graph) {
    std::vector<ScoredTriplet> out;
    for (const auto& s : graph.objects) {
        for (const auto& o : graph.objects) {
            if (s.id == o.id) {
                continue;
            }
            for (const auto& p : prior.predicates()) {
                out.push_back({s.id, p, o.id, prior.score(s.class_name, o.class_name, p)});
            }
        }
    }
    return out;
}

inline Json to_json(const FrequencyPrior& prior) {
    Json counts = Json::array();
    for (const auto& [pair, row] : prior.counts()) {
        for (const auto& [p, n] : row) {
            counts.push_back({{"s", pair.first}, {"o", pair.second}, {"p", p}, {"n", n}});
        }
    }
    return {{"smoothing", prior.smoothing()}, {"predicates", prior.predicates()}, {"counts", counts}};
}

inline FrequencyPrior parse_prior(std::string_view text) {
    const Json doc = parse_json(text);
    try {
        FrequencyPrior prior(doc.at("smoothing").get<double>(), doc.at("predicates").get<std::vector<std::string>>());
        for (const auto& c : doc.at("counts")) {
            prior.add(c.at("s").get<std::string>(), c.at("o").get<std::string>(), c.at("p").get<std::string>(),
                      c.at("n").get<std::size_t>());
        }
        return prior;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("malformed prior file: ") + e.what());
    }
}

inline FrequencyPrior load_prior(const std::filesystem::path& path) {
    return parse_prior(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Multi-label hinge loss

/// Flattened labels/scores for N object pairs times n predicates.
struct LossInput {
    std::vector<std::uint8_t> labels;
    std::vector<double> scores;
    std::size_t pairs = 0;      // N
    std::size_t predicates = 0; // n
};

namespace detail {

inline void check_loss_input(const LossInput& in) {
    const std::size_t expected = in.pairs * in.predicates;
    if (in.labels.size() != expected || in.scores.size() != expected) {
        throw std::invalid_argument("loss input length mismatch: expected N*n = " + std::to_string(expected) +
                                    " labels and scores");
    }
}

} // namespace detail

/// L = 1/(N n) * sum over negatives i and positives j of max(0, 1 - (s_j - s_i)).
/// Zero when there are no positives or no negatives.
inline double hinge_loss(const LossInput& in) {
    detail::check_loss_input(in);
    double sum = 0;
    for (std::size_t i = 0; i < in.labels.size(); ++i) {
        if (in.labels[i]) {
            continue;
        }
        for (std::size_t j = 0; j < in.labels.size(); ++j) {
            if (in.labels[j]) {
                sum += std::max(0.0, 1.0 - (in.scores[j] - in.scores[i]));
            }
        }
    }
    return in.labels.empty() ? 0.0 : sum / static_cast<double>(in.pairs * in.predicates);
}

/// Subgradient of hinge_loss with respect to each score; terms sitting
/// exactly on the kink contribute zero.
inline std::vector<double> hinge_loss_gradient(const LossInput& in) {
    detail::check_loss_input(in);
    std::vector<double> grad(in.scores.size(), 0.0);
    if (in.labels.empty()) {
        return grad;
    }
    const double scale = 1.0 / static_cast<double>(in.pairs * in.predicates);
    for (std::size_t i = 0; i < in.labels.size(); ++i) {
        if (in.labels[i]) {
            continue;
        }
        for (std::size_t j = 0; j < in.labels.size(); ++j) {
            if (in.labels[j] && 1.0 - (in.scores[j] - in.scores[i]) > 0.0) {
                grad[i] += scale;
                grad[j] -= scale;
            }
        }
    }
    return grad;
}

} // namespace ontosg
