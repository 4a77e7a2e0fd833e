#pragma once

// Triplet sets with provenance, the inverse/symmetric/transitive inference
// closure, the domain/range constraint tensor and consistency checking.

#include <cctype>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ontosg/error.hpp"
#include "ontosg/ontology.hpp"

namespace ontosg {

using ObjectId = std::int64_t;

/// Object id → class label for one image.
using ObjectClasses = std::map<ObjectId, std::string>;

struct Triplet {
    ObjectId subject = 0;
    std::string predicate;
    ObjectId object = 0;

    friend auto operator<=>(const Triplet&, const Triplet&) = default;
    friend bool operator==(const Triplet&, const Triplet&) = default;
};

inline std::string to_string(const Triplet& t) {
    return "(" + std::to_string(t.subject) + ", " + t.predicate + ", " + std::to_string(t.object) + ")";
}

struct TripletHash {
    std::size_t operator()(const Triplet& t) const noexcept {
        std::size_t h = std::hash<std::string>{}(t.predicate);
        h ^= std::hash<ObjectId>{}(t.subject) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= std::hash<ObjectId>{}(t.object) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }
};

enum class AxiomKind { inverse, symmetric, transitive };

inline const char* to_string(AxiomKind kind) {
    switch (kind) {
    case AxiomKind::inverse: return "inverse";
    case AxiomKind::symmetric: return "symmetric";
    case AxiomKind::transitive: return "transitive";
    }
    return "?";
}

struct Provenance {
    bool inferred = false;
    AxiomKind axiom = AxiomKind::inverse; // meaningful only when inferred
    std::vector<Triplet> sources;         // generating triplets

    static Provenance asserted() { return {}; }
    static Provenance derived(AxiomKind kind, std::vector<Triplet> from) {
        return {true, kind, std::move(from)};
    }
};

/// Insertion-ordered, duplicate-free set of triplets with per-triplet provenance.
class TripletSet {
public:
    struct Entry {
        Triplet triplet;
        Provenance provenance;
    };

    TripletSet() = default;
    TripletSet(std::initializer_list<Triplet> triplets) {
        for (const auto& t : triplets) {
            insert(t);
        }
    }

    /// Returns false (and keeps the original provenance) for duplicates.
    /// Throws std::invalid_argument for self-loops.
    bool insert(Triplet t, Provenance provenance = Provenance::asserted()) {
        if (t.subject == t.object) {
            throw std::invalid_argument("triplet " + to_string(t) + " relates an object to itself");
        }
        auto [it, inserted] = index_.try_emplace(t, entries_.size());
        if (inserted) {
            entries_.push_back({std::move(t), std::move(provenance)});
        }
        return inserted;
    }

    bool contains(const Triplet& t) const { return index_.contains(t); }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const Entry& operator[](std::size_t i) const { return entries_[i]; }
    const Provenance* provenance(const Triplet& t) const {
        auto it = index_.find(t);
        return it == index_.end() ? nullptr : &entries_[it->second].provenance;
    }

    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    std::vector<Triplet> triplets() const {
        std::vector<Triplet> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) {
            out.push_back(e.triplet);
        }
        return out;
    }

    /// Set equality, ignoring order and provenance.
    friend bool operator==(const TripletSet& a, const TripletSet& b) {
        if (a.size() != b.size()) {
            return false;
        }
        for (const auto& e : a) {
            if (!b.contains(e.triplet)) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<Triplet, std::size_t, TripletHash> index_;
};

// ---------------------------------------------------------------------------
// Constraint tensor

/// Boolean (subject class, object class, predicate) table of domain/range
/// legality. The predicate axis is innermost so that all predicates allowed
/// for one class pair are contiguous.
class ConstraintTensor {
public:
    std::size_t num_classes() const noexcept { return class_names_.size(); }
    std::size_t num_predicates() const noexcept { return predicate_names_.size(); }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    const std::vector<std::string>& predicate_names() const noexcept { return predicate_names_; }

    /// Exact name first, then a unique case-insensitive match.
    std::optional<std::size_t> class_id(std::string_view name) const {
        if (auto it = class_index_.find(name); it != class_index_.end()) {
            return it->second;
        }
        if (auto it = folded_index_.find(fold(name)); it != folded_index_.end() && it->second) {
            return *it->second;
        }
        return std::nullopt;
    }
    std::optional<std::size_t> predicate_id(std::string_view name) const {
        auto it = predicate_index_.find(name);
        if (it == predicate_index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    std::size_t require_class(std::string_view name) const {
        auto id = class_id(name);
        if (!id) {
            throw ReferenceError("class '" + std::string(name) + "' is not in the constraint tensor");
        }
        return *id;
    }
    std::size_t require_predicate(std::string_view name) const {
        auto id = predicate_id(name);
        if (!id) {
            throw ReferenceError("predicate '" + std::string(name) + "' is not in the constraint tensor");
        }
        return *id;
    }

    bool at(std::size_t subject_class, std::size_t object_class, std::size_t predicate) const {
        return bits_[offset(subject_class, object_class) + predicate] != 0;
    }

    /// Legality of every predicate for one (subject class, object class) pair.
    std::span<const std::uint8_t> predicates_for(std::size_t subject_class, std::size_t object_class) const {
        return {bits_.data() + offset(subject_class, object_class), num_predicates()};
    }

private:
    friend ConstraintTensor build_constraint_tensor(const Ontology& onto);

    static std::string fold(std::string_view s) {
        std::string out(s);
        for (auto& c : out) {
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        return out;
    }

    std::size_t offset(std::size_t a, std::size_t b) const { return (a * num_classes() + b) * num_predicates(); }

    std::vector<std::string> class_names_;
    std::vector<std::string> predicate_names_;
    std::map<std::string, std::size_t, std::less<>> class_index_;
    std::map<std::string, std::optional<std::size_t>, std::less<>> folded_index_; // nullopt: ambiguous
    std::map<std::string, std::size_t, std::less<>> predicate_index_;
    std::vector<std::uint8_t> bits_;
};

inline ConstraintTensor build_constraint_tensor(const Ontology& onto) {
    ConstraintTensor tensor;
    const auto& classes = onto.classes();
    const auto& predicates = onto.predicates();
    for (std::size_t i = 0; i < classes.size(); ++i) {
        tensor.class_names_.push_back(classes[i].name);
        tensor.class_index_.emplace(classes[i].name, i);
        auto [it, fresh] = tensor.folded_index_.try_emplace(ConstraintTensor::fold(classes[i].name), i);
        if (!fresh) {
            it->second.reset();
        }
    }
    for (std::size_t p = 0; p < predicates.size(); ++p) {
        tensor.predicate_names_.push_back(predicates[p].name);
        tensor.predicate_index_.emplace(predicates[p].name, p);
    }

    // Domain and range are evaluated once per (class, predicate), then combined.
    const std::size_t nc = classes.size();
    const std::size_t np = predicates.size();
    std::vector<char> in_domain(nc * np), in_range(nc * np);
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t p = 0; p < np; ++p) {
            in_domain[c * np + p] = eval_class_expr(onto, predicates[p].domain, c);
            in_range[c * np + p] = eval_class_expr(onto, predicates[p].range, c);
        }
    }
    tensor.bits_.assign(nc * nc * np, 0);
    for (std::size_t a = 0; a < nc; ++a) {
        for (std::size_t b = 0; b < nc; ++b) {
            for (std::size_t p = 0; p < np; ++p) {
                tensor.bits_[(a * nc + b) * np + p] = in_domain[a * np + p] && in_range[b * np + p];
            }
        }
    }
    return tensor;
}

inline bool triplet_allowed(const ConstraintTensor& tensor, std::string_view subject_class,
                            std::string_view object_class, std::string_view predicate) {
    return tensor.at(tensor.require_class(subject_class), tensor.require_class(object_class),
                     tensor.require_predicate(predicate));
}

// ---------------------------------------------------------------------------
// Inference closure

/// Least fixed point of `asserted` under inverseOf, symmetry and transitivity.
/// Asserted entries keep their provenance and come first; inferred triplets
/// follow in derivation (breadth-first) order.
inline TripletSet inference_closure(const Ontology& onto, const TripletSet& asserted) {
    TripletSet out;
    std::vector<std::size_t> pred_of;
    std::map<std::pair<std::size_t, ObjectId>, std::vector<ObjectId>> objects_of;  // (p, s) -> o
    std::map<std::pair<std::size_t, ObjectId>, std::vector<ObjectId>> subjects_of; // (p, o) -> s
    std::deque<std::size_t> pending;

    auto add = [&](Triplet t, Provenance prov) {
        auto idx = onto.predicate_index(t.predicate);
        if (!idx) {
            throw ReferenceError("unknown predicate '" + t.predicate + "' in triplet " + to_string(t));
        }
        const ObjectId s = t.subject;
        const ObjectId o = t.object;
        if (!out.insert(std::move(t), std::move(prov))) {
            return;
        }
        pred_of.push_back(*idx);
        pending.push_back(out.size() - 1);
        if (onto.predicates()[*idx].transitive) {
            objects_of[{*idx, s}].push_back(o);
            subjects_of[{*idx, o}].push_back(s);
        }
    };

    for (const auto& e : asserted) {
        add(e.triplet, e.provenance);
    }

    while (!pending.empty()) {
        const std::size_t i = pending.front();
        pending.pop_front();
        const Triplet t = out[i].triplet;
        const PredicateDef& pred = onto.predicates()[pred_of[i]];

        if (pred.inverse_of) {
            add({t.object, *pred.inverse_of, t.subject}, Provenance::derived(AxiomKind::inverse, {t}));
        }
        if (pred.symmetric) {
            add({t.object, t.predicate, t.subject}, Provenance::derived(AxiomKind::symmetric, {t}));
        }
        if (pred.transitive) {
            // (s,p,o),(o,p,x) => (s,p,x)
            if (auto it = objects_of.find({pred_of[i], t.object}); it != objects_of.end()) {
                const std::vector<ObjectId> targets = it->second;
                for (ObjectId x : targets) {
                    if (x != t.subject) {
                        add({t.subject, t.predicate, x},
                            Provenance::derived(AxiomKind::transitive, {t, {t.object, t.predicate, x}}));
                    }
                }
            }
            // (r,p,s),(s,p,o) => (r,p,o)
            if (auto it = subjects_of.find({pred_of[i], t.subject}); it != subjects_of.end()) {
                const std::vector<ObjectId> sources = it->second;
                for (ObjectId r : sources) {
                    if (r != t.object) {
                        add({r, t.predicate, t.object},
                            Provenance::derived(AxiomKind::transitive, {{r, t.predicate, t.subject}, t}));
                    }
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Consistency

struct Violation {
    enum class Kind { domain_range, functional, inverse_functional };

    Kind kind;
    std::vector<Triplet> triplets;
    std::string message;
};

inline const char* to_string(Violation::Kind kind) {
    switch (kind) {
    case Violation::Kind::domain_range: return "domain_range";
    case Violation::Kind::functional: return "functional";
    case Violation::Kind::inverse_functional: return "inverse_functional";
    }
    return "?";
}

/// Reports domain/range violations per triplet, then one functional violation
/// per (subject, predicate) with several objects and one inverse-functional
/// violation per (predicate, object) with several subjects.
inline std::vector<Violation> check_consistency(const Ontology& onto, const ConstraintTensor& tensor,
                                                const ObjectClasses& classes, const TripletSet& triplets) {
    auto class_of = [&](ObjectId id) -> const std::string& {
        auto it = classes.find(id);
        if (it == classes.end()) {
            throw ReferenceError("object " + std::to_string(id) + " has no class");
        }
        return it->second;
    };

    std::vector<Violation> out;
    using Group = std::pair<std::string, ObjectId>;
    std::vector<Group> functional_order, inverse_order;
    std::map<Group, std::vector<Triplet>> functional_groups, inverse_groups;

    for (const auto& e : triplets) {
        const Triplet& t = e.triplet;
        const PredicateDef& pred = onto.predicate(t.predicate);
        const std::string& sc = class_of(t.subject);
        const std::string& oc = class_of(t.object);
        if (!triplet_allowed(tensor, sc, oc, t.predicate)) {
            out.push_back({Violation::Kind::domain_range, {t},
                           sc + " " + t.predicate + " " + oc + " violates domain " + to_string(pred.domain) +
                               " / range " + to_string(pred.range)});
        }
        if (pred.functional) {
            auto& group = functional_groups[{t.predicate, t.subject}];
            if (group.empty()) {
                functional_order.push_back({t.predicate, t.subject});
            }
            group.push_back(t);
        }
        if (pred.inverse_functional) {
            auto& group = inverse_groups[{t.predicate, t.object}];
            if (group.empty()) {
                inverse_order.push_back({t.predicate, t.object});
            }
            group.push_back(t);
        }
    }
    for (const auto& key : functional_order) {
        const auto& group = functional_groups[key];
        if (group.size() > 1) {
            out.push_back({Violation::Kind::functional, group,
                           "object " + std::to_string(key.second) + " has " + std::to_string(group.size()) +
                               " objects for functional '" + key.first + "'"});
        }
    }
    for (const auto& key : inverse_order) {
        const auto& group = inverse_groups[key];
        if (group.size() > 1) {
            out.push_back({Violation::Kind::inverse_functional, group,
                           "object " + std::to_string(key.second) + " has " + std::to_string(group.size()) +
                               " subjects for inverse functional '" + key.first + "'"});
        }
    }
    return out;
}

} // namespace ontosg
