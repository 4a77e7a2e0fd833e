#pragma once

// Ontology-guided post-processing of scored triplet proposals.
//
// Stage order is fixed: per-pair graph constraint k, domain/range tensor
// filter, greedy axiom pruning, Top-K. Implicit triplets entailed by accepted
// ones never consume the K budget.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ontosg/dataset.hpp"
#include "ontosg/error.hpp"
#include "ontosg/json_io.hpp"
#include "ontosg/ontology.hpp"
#include "ontosg/reasoner.hpp"

namespace ontosg {

struct ScoredTriplet {
    ObjectId subject = 0;
    std::string predicate;
    ObjectId object = 0;
    double score = 0;

    Triplet triplet() const { return {subject, predicate, object}; }
    friend bool operator==(const ScoredTriplet&, const ScoredTriplet&) = default;
};

// ---------------------------------------------------------------------------
// Ranking

/// Total order on proposals: descending score, ties by (subject, object,
/// predicate rank). Predicates missing from the rank table sort after ranked
/// ones, by name.
class RankOrder {
public:
    RankOrder() = default;
    explicit RankOrder(const std::vector<std::string>& predicate_order) {
        for (std::size_t i = 0; i < predicate_order.size(); ++i) {
            rank_.emplace(predicate_order[i], i);
        }
    }
    explicit RankOrder(const Ontology& onto) {
        for (std::size_t i = 0; i < onto.predicates().size(); ++i) {
            rank_.emplace(onto.predicates()[i].name, i);
        }
    }

    bool operator()(const ScoredTriplet& a, const ScoredTriplet& b) const {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.subject != b.subject) {
            return a.subject < b.subject;
        }
        if (a.object != b.object) {
            return a.object < b.object;
        }
        const std::size_t ra = rank(a.predicate);
        const std::size_t rb = rank(b.predicate);
        if (ra != rb) {
            return ra < rb;
        }
        return a.predicate < b.predicate;
    }

private:
    std::size_t rank(const std::string& p) const {
        auto it = rank_.find(p);
        return it == rank_.end() ? rank_.size() : it->second;
    }

    std::unordered_map<std::string, std::size_t> rank_;
};

inline void sort_proposals(std::vector<ScoredTriplet>& proposals, const RankOrder& order) {
    std::sort(proposals.begin(), proposals.end(), order);
}

/// Keeps the k best-ranked predicates of every ordered object pair; the
/// result is in rank order.
inline std::vector<ScoredTriplet> apply_graph_constraint(std::vector<ScoredTriplet> proposals, std::size_t k,
                                                         const RankOrder& order = {}) {
    sort_proposals(proposals, order);
    std::map<std::pair<ObjectId, ObjectId>, std::size_t> taken;
    std::vector<ScoredTriplet> out;
    for (auto& p : proposals) {
        if (taken[{p.subject, p.object}]++ < k) {
            out.push_back(std::move(p));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Filtering and pruning

enum class PruneReason { domain_range, functional, inverse_functional, already_implied };

inline const char* to_string(PruneReason r) {
    switch (r) {
    case PruneReason::domain_range: return "domain_range";
    case PruneReason::functional: return "functional";
    case PruneReason::inverse_functional: return "inverse_functional";
    case PruneReason::already_implied: return "already_implied";
    }
    return "?";
}

struct PrunedTriplet {
    ScoredTriplet proposal;
    PruneReason reason;
};

struct FilterResult {
    std::vector<ScoredTriplet> kept;
    std::vector<PrunedTriplet> pruned;
};

/// Looks every proposal up in the tensor; order is preserved.
inline FilterResult tensor_filter(const std::vector<ScoredTriplet>& proposals, const ConstraintTensor& tensor,
                                  const ObjectClasses& classes) {
    auto class_of = [&](ObjectId id) -> std::size_t {
        auto it = classes.find(id);
        if (it == classes.end()) {
            throw ReferenceError("object " + std::to_string(id) + " has no class");
        }
        return tensor.require_class(it->second);
    };
    FilterResult out;
    for (const auto& p : proposals) {
        if (tensor.at(class_of(p.subject), class_of(p.object), tensor.require_predicate(p.predicate))) {
            out.kept.push_back(p);
        } else {
            out.pruned.push_back({p, PruneReason::domain_range});
        }
    }
    return out;
}

/// Separates proposals touching an object whose class the tensor does not
/// know; those are returned as pruned with reason domain_range.
inline FilterResult partition_known_classes(const std::vector<ScoredTriplet>& proposals,
                                            const ConstraintTensor& tensor, const ObjectClasses& classes) {
    auto known = [&](ObjectId id) {
        auto it = classes.find(id);
        return it != classes.end() && tensor.class_id(it->second).has_value();
    };
    FilterResult out;
    for (const auto& p : proposals) {
        if (known(p.subject) && known(p.object)) {
            out.kept.push_back(p);
        } else {
            out.pruned.push_back({p, PruneReason::domain_range});
        }
    }
    return out;
}

/// Functional bookkeeping for greedy pruning. Every registered triplet also
/// registers its direct mirrors (inverse and symmetric images), so a
/// constraint on one predicate is enforced through its inverse as well.
class FunctionalState {
public:
    explicit FunctionalState(const Ontology& onto) : onto_(&onto) {}

    /// Reason the triplet (or one of its mirrors) clashes with registered ones.
    std::optional<PruneReason> conflict(const Triplet& t) const {
        for (const auto& m : with_mirrors(t)) {
            const PredicateDef& pred = onto_->predicate(m.predicate);
            if (pred.functional) {
                if (auto it = object_of_.find({m.predicate, m.subject}); it != object_of_.end() &&
                                                                        it->second != m.object) {
                    return PruneReason::functional;
                }
            }
            if (pred.inverse_functional) {
                if (auto it = subject_of_.find({m.predicate, m.object}); it != subject_of_.end() &&
                                                                        it->second != m.subject) {
                    return PruneReason::inverse_functional;
                }
            }
        }
        return std::nullopt;
    }

    void add(const Triplet& t) {
        for (const auto& m : with_mirrors(t)) {
            object_of_.try_emplace({m.predicate, m.subject}, m.object);
            subject_of_.try_emplace({m.predicate, m.object}, m.subject);
        }
    }

private:
    std::vector<Triplet> with_mirrors(const Triplet& t) const {
        const PredicateDef& pred = onto_->predicate(t.predicate);
        std::vector<Triplet> out{t};
        if (pred.inverse_of) {
            out.push_back({t.object, *pred.inverse_of, t.subject});
        }
        if (pred.symmetric) {
            out.push_back({t.object, t.predicate, t.subject});
        }
        return out;
    }

    const Ontology* onto_;
    std::map<std::pair<std::string, ObjectId>, ObjectId> object_of_;  // (p, subject) -> object
    std::map<std::pair<std::string, ObjectId>, ObjectId> subject_of_; // (p, object) -> subject
};

/// Greedy scan in rank order: a proposal is accepted unless it clashes with
/// an already-accepted one on a functional or inverse-functional predicate
/// (directly or through the inverse).
inline FilterResult axiom_prune(std::vector<ScoredTriplet> proposals, const Ontology& onto,
                                const RankOrder& order) {
    sort_proposals(proposals, order);
    FunctionalState state(onto);
    FilterResult out;
    for (auto& p : proposals) {
        const Triplet t = p.triplet();
        if (auto reason = state.conflict(t)) {
            out.pruned.push_back({std::move(p), *reason});
        } else {
            state.add(t);
            out.kept.push_back(std::move(p));
        }
    }
    return out;
}

inline FilterResult axiom_prune(std::vector<ScoredTriplet> proposals, const Ontology& onto) {
    return axiom_prune(std::move(proposals), onto, RankOrder(onto));
}

// ---------------------------------------------------------------------------
// Selection

struct SelectionConfig {
    std::size_t top_k = 16;
    std::size_t graph_constraint = 1;
    bool apply_tensor_filter = true;
    bool apply_axiom_pruning = true;
    bool expand_implicit = false;
};

struct ImplicitTriplet {
    Triplet triplet;
    AxiomKind axiom;
    std::vector<Triplet> sources;
    double score; // inherited from the generating explicit triplet, display only
};

struct ImplicitConflict {
    ImplicitTriplet implicit;
    PruneReason reason;
};

struct SelectionResult {
    std::vector<ScoredTriplet> accepted; // rank order
    std::vector<ImplicitTriplet> implicit;
    std::vector<PrunedTriplet> pruned;
    /// Entailed triplets that clash with functional constraints. The
    /// generating explicit triplet stays accepted; the clashing entailment is
    /// reported here instead of being emitted.
    std::vector<ImplicitConflict> conflicts;
};

inline SelectionResult select_top(const std::vector<ScoredTriplet>& proposals, const SelectionConfig& config,
                                  const Ontology& onto, const ConstraintTensor& tensor, const ObjectClasses& classes) {
    if (config.top_k == 0 || config.graph_constraint == 0) {
        throw std::invalid_argument("top_k and graph_constraint must be positive");
    }
    if (config.graph_constraint > std::max<std::size_t>(1, onto.predicates().size())) {
        throw std::invalid_argument("graph_constraint exceeds the number of predicates");
    }
    const RankOrder order(onto);
    SelectionResult result;

    std::vector<ScoredTriplet> candidates = apply_graph_constraint(proposals, config.graph_constraint, order);
    if (config.apply_tensor_filter) {
        FilterResult f = tensor_filter(candidates, tensor, classes);
        candidates = std::move(f.kept);
        std::move(f.pruned.begin(), f.pruned.end(), std::back_inserter(result.pruned));
    }

    if (!config.expand_implicit) {
        if (config.apply_axiom_pruning) {
            FilterResult f = axiom_prune(std::move(candidates), onto, order);
            candidates = std::move(f.kept);
            std::move(f.pruned.begin(), f.pruned.end(), std::back_inserter(result.pruned));
        }
        if (candidates.size() > config.top_k) {
            candidates.resize(config.top_k);
        }
        result.accepted = std::move(candidates);
        return result;
    }

    // With expansion the cut is interleaved with pruning: each accepted
    // triplet adds its entailments before the next candidate is considered,
    // and candidates already entailed are skipped without using budget.
    FunctionalState state(onto);
    TripletSet asserted;
    TripletSet emitted;
    for (auto& p : candidates) {
        if (result.accepted.size() == config.top_k) {
            break;
        }
        const Triplet t = p.triplet();
        if (emitted.contains(t)) {
            result.pruned.push_back({std::move(p), PruneReason::already_implied});
            continue;
        }
        if (config.apply_axiom_pruning) {
            if (auto reason = state.conflict(t)) {
                result.pruned.push_back({std::move(p), *reason});
                continue;
            }
            state.add(t);
        }
        asserted.insert(t);
        emitted.insert(t);
        const double score = p.score;
        result.accepted.push_back(std::move(p));

        const TripletSet closure = inference_closure(onto, asserted);
        for (const auto& e : closure) {
            if (!e.provenance.inferred || emitted.contains(e.triplet)) {
                continue;
            }
            ImplicitTriplet imp{e.triplet, e.provenance.axiom, e.provenance.sources, score};
            if (config.apply_axiom_pruning) {
                if (auto reason = state.conflict(e.triplet)) {
                    const bool known = std::any_of(result.conflicts.begin(), result.conflicts.end(),
                                                   [&](const ImplicitConflict& c) {
                                                       return c.implicit.triplet == e.triplet;
                                                   });
                    if (!known) {
                        result.conflicts.push_back({std::move(imp), *reason});
                    }
                    continue;
                }
                state.add(e.triplet);
            }
            emitted.insert(e.triplet);
            result.implicit.push_back(std::move(imp));
        }
    }
    return result;
}

/// Post-processing ahead of metric computation: filtering and pruning without
/// any k or K cut, since the metrics apply their own. Implicit triplets are
/// appended with their generator's score only when `include_implicit` is set.
inline std::vector<ScoredTriplet> postprocess_proposals(const std::vector<ScoredTriplet>& proposals,
                                                        const Ontology& onto, const ConstraintTensor& tensor,
                                                        const ObjectClasses& classes, bool apply_tensor_filter,
                                                        bool apply_axiom_pruning, bool include_implicit) {
    SelectionConfig config;
    config.top_k = std::numeric_limits<std::size_t>::max();
    config.graph_constraint = std::max<std::size_t>(1, onto.predicates().size());
    config.apply_tensor_filter = apply_tensor_filter;
    config.apply_axiom_pruning = apply_axiom_pruning;
    config.expand_implicit = include_implicit;
    SelectionResult r = select_top(proposals, config, onto, tensor, classes);
    std::vector<ScoredTriplet> out = std::move(r.accepted);
    for (const auto& i : r.implicit) {
        out.push_back({i.triplet.subject, i.triplet.predicate, i.triplet.object, i.score});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Emission

enum class EmitFormat { dot, text };

namespace detail {

inline std::string dot_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out;
}

} // namespace detail

inline std::string object_label(const SceneGraph& graph, ObjectId id) {
    const SceneObject* obj = graph.find_object(id);
    if (!obj) {
        throw ReferenceError("image '" + graph.image_id + "' has no object " + std::to_string(id));
    }
    return obj->class_name + "_" + std::to_string(id);
}

/// DOT: one node per object used by an emitted triplet, solid edges for
/// accepted triplets, dashed edges for implicit ones. Text: one
/// `subject --predicate--> object` line per triplet, accepted first.
inline std::string emit_graph(const SelectionResult& result, const SceneGraph& graph, EmitFormat format) {
    std::vector<std::pair<Triplet, bool>> edges; // (triplet, implicit)
    for (const auto& a : result.accepted) {
        edges.emplace_back(a.triplet(), false);
    }
    for (const auto& i : result.implicit) {
        edges.emplace_back(i.triplet, true);
    }

    std::string out;
    if (format == EmitFormat::text) {
        for (const auto& [t, implicit] : edges) {
            out += object_label(graph, t.subject) + " --" + t.predicate + "--> " + object_label(graph, t.object);
            out += implicit ? " (implicit)\n" : "\n";
        }
        return out;
    }

    std::vector<ObjectId> nodes;
    for (const auto& [t, _] : edges) {
        for (ObjectId id : {t.subject, t.object}) {
            if (std::find(nodes.begin(), nodes.end(), id) == nodes.end()) {
                nodes.push_back(id);
            }
        }
    }
    out += "digraph \"" + detail::dot_escape(graph.image_id) + "\" {\n";
    for (ObjectId id : nodes) {
        out += "  o" + std::to_string(id) + " [label=\"" + detail::dot_escape(object_label(graph, id)) + "\"];\n";
    }
    for (const auto& [t, implicit] : edges) {
        out += "  o" + std::to_string(t.subject) + " -> o" + std::to_string(t.object) + " [label=\"" +
               detail::dot_escape(t.predicate) + "\"" + (implicit ? ", style=dashed" : "") + "];\n";
    }
    out += "}\n";
    return out;
}

// ---------------------------------------------------------------------------
// Scores file

using ScoresByImage = std::map<std::string, std::vector<ScoredTriplet>>;

inline ScoresByImage parse_scores(std::string_view text) {
    ScoresByImage out;
    for_each_json_line(text, [&](const Json& rec, std::size_t line) {
        const std::string where = "line " + std::to_string(line);
        if (!rec.is_object() || !rec.contains("image_id") || !rec["image_id"].is_string() ||
            !rec.contains("scores") || !rec["scores"].is_array()) {
            throw FormatError(where + ": record needs string \"image_id\" and array \"scores\"");
        }
        const std::string id = rec["image_id"].get<std::string>();
        auto [it, fresh] = out.try_emplace(id);
        if (!fresh) {
            throw FormatError(where + ": duplicate image_id '" + id + "'");
        }
        std::set<Triplet> seen;
        for (const auto& s : rec["scores"]) {
            if (!s.is_object() || !s.contains("s") || !s["s"].is_number_integer() || !s.contains("o") ||
                !s["o"].is_number_integer() || !s.contains("p") || !s["p"].is_string() || !s.contains("score") ||
                !s["score"].is_number()) {
                throw FormatError(where + ", image '" + id + "': score needs integer s/o, string p, number score");
            }
            ScoredTriplet st{s["s"].get<ObjectId>(), s["p"].get<std::string>(), s["o"].get<ObjectId>(),
                             s["score"].get<double>()};
            if (!std::isfinite(st.score)) {
                throw FormatError(where + ", image '" + id + "': non-finite score");
            }
            if (st.subject == st.object) {
                throw FormatError(where + ", image '" + id + "': proposal relates an object to itself");
            }
            if (!seen.insert(st.triplet()).second) {
                throw FormatError(where + ", image '" + id + "': duplicate proposal " + to_string(st.triplet()));
            }
            it->second.push_back(std::move(st));
        }
    });
    return out;
}

inline ScoresByImage load_scores(const std::filesystem::path& path) {
    return parse_scores(read_text_file(path));
}

inline std::string serialize_scores(const ScoresByImage& scores) {
    std::string out;
    for (const auto& [id, list] : scores) {
        Json arr = Json::array();
        for (const auto& s : list) {
            arr.push_back({{"s", s.subject}, {"o", s.object}, {"p", s.predicate}, {"score", s.score}});
        }
        out += Json{{"image_id", id}, {"scores", arr}}.dump();
        out += '\n';
    }
    return out;
}

inline Json to_json(const SelectionResult& r, const std::string& image_id) {
    Json accepted = Json::array(), implicit = Json::array(), pruned = Json::array(), conflicts = Json::array();
    for (const auto& a : r.accepted) {
        accepted.push_back({{"s", a.subject}, {"p", a.predicate}, {"o", a.object}, {"score", a.score}});
    }
    for (const auto& i : r.implicit) {
        implicit.push_back({{"s", i.triplet.subject},
                            {"p", i.triplet.predicate},
                            {"o", i.triplet.object},
                            {"axiom", to_string(i.axiom)},
                            {"score", i.score}});
    }
    for (const auto& p : r.pruned) {
        pruned.push_back({{"s", p.proposal.subject},
                          {"p", p.proposal.predicate},
                          {"o", p.proposal.object},
                          {"score", p.proposal.score},
                          {"reason", to_string(p.reason)}});
    }
    for (const auto& c : r.conflicts) {
        conflicts.push_back({{"s", c.implicit.triplet.subject},
                             {"p", c.implicit.triplet.predicate},
                             {"o", c.implicit.triplet.object},
                             {"reason", to_string(c.reason)}});
    }
    return {{"image_id", image_id},
            {"accepted", accepted},
            {"implicit", implicit},
            {"pruned", pruned},
            {"conflicts", conflicts}};
}

} // namespace ontosg
