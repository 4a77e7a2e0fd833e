#pragma once

// Ontology data model: class hierarchy, predicates with axiom flags and
// domain/range class expressions, the JSON ontology document format, and
// lint-style validation.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ontosg/error.hpp"
#include "ontosg/json_io.hpp"

namespace ontosg {

/// Boolean combination of named classes, used for predicate domains and ranges.
struct ClassExpr {
    enum class Kind { named, all_of, any_of, negation };

    Kind kind = Kind::named;
    std::string name;               // named only
    std::vector<ClassExpr> operands; // all_of / any_of: >= 1, negation: exactly 1

    static ClassExpr named(std::string cls) {
        ClassExpr e;
        e.kind = Kind::named;
        e.name = std::move(cls);
        return e;
    }
    static ClassExpr all_of(std::vector<ClassExpr> parts) {
        ClassExpr e;
        e.kind = Kind::all_of;
        e.operands = std::move(parts);
        return e;
    }
    static ClassExpr any_of(std::vector<ClassExpr> parts) {
        ClassExpr e;
        e.kind = Kind::any_of;
        e.operands = std::move(parts);
        return e;
    }
    static ClassExpr negation(ClassExpr inner) {
        ClassExpr e;
        e.kind = Kind::negation;
        e.operands.push_back(std::move(inner));
        return e;
    }

    friend bool operator==(const ClassExpr&, const ClassExpr&) = default;
};

inline std::string to_string(const ClassExpr& expr) {
    switch (expr.kind) {
    case ClassExpr::Kind::named:
        return expr.name;
    case ClassExpr::Kind::negation:
        return "not " + to_string(expr.operands.front());
    case ClassExpr::Kind::all_of:
    case ClassExpr::Kind::any_of: {
        if (expr.operands.size() == 1) {
            return to_string(expr.operands.front());
        }
        const char* sep = expr.kind == ClassExpr::Kind::all_of ? " and " : " or ";
        std::string out = "(";
        for (std::size_t i = 0; i < expr.operands.size(); ++i) {
            if (i != 0) {
                out += sep;
            }
            out += to_string(expr.operands[i]);
        }
        return out + ")";
    }
    }
    return {};
}

struct ClassDef {
    std::string name;
    std::vector<std::string> parents;
};

struct PredicateDef {
    std::string name;
    ClassExpr domain;
    ClassExpr range;
    bool functional = false;
    bool inverse_functional = false;
    bool symmetric = false;
    bool transitive = false;
    std::optional<std::string> inverse_of;
};

/// Immutable, validated ontology. Build through Ontology::build or parse_ontology.
class Ontology {
public:
    Ontology() = default;

    /// Checks every structural invariant and completes one-sided inverse
    /// declarations. Throws OntologyError / ReferenceError.
    static Ontology build(std::vector<ClassDef> classes, std::vector<PredicateDef> predicates);

    const std::vector<ClassDef>& classes() const noexcept { return classes_; }
    const std::vector<PredicateDef>& predicates() const noexcept { return predicates_; }

    std::optional<std::size_t> class_index(std::string_view name) const {
        auto it = class_lookup_.find(name);
        if (it == class_lookup_.end()) {
            return std::nullopt;
        }
        return it->second;
    }
    std::optional<std::size_t> predicate_index(std::string_view name) const {
        auto it = predicate_lookup_.find(name);
        if (it == predicate_lookup_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    const ClassDef& class_def(std::string_view name) const {
        return classes_[require_class(name)];
    }
    const PredicateDef& predicate(std::string_view name) const {
        auto idx = predicate_index(name);
        if (!idx) {
            throw ReferenceError("unknown predicate '" + std::string(name) + "'");
        }
        return predicates_[*idx];
    }

    std::size_t require_class(std::string_view name) const {
        auto idx = class_index(name);
        if (!idx) {
            throw ReferenceError("unknown class '" + std::string(name) + "'");
        }
        return *idx;
    }

    /// Maps a dataset object label onto a declared class: exact match first,
    /// then a unique case-insensitive match.
    std::optional<std::size_t> resolve_class(std::string_view label) const {
        if (auto idx = class_index(label)) {
            return idx;
        }
        std::optional<std::size_t> found;
        for (std::size_t i = 0; i < classes_.size(); ++i) {
            if (iequals(classes_[i].name, label)) {
                if (found) {
                    return std::nullopt;
                }
                found = i;
            }
        }
        return found;
    }

    /// Reflexive-transitive ancestor test on class indices.
    bool is_ancestor(std::size_t child, std::size_t ancestor) const {
        return ancestors_[child][ancestor] != 0;
    }

private:
    static bool iequals(std::string_view a, std::string_view b) {
        return a.size() == b.size() &&
               std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
                   return std::tolower(static_cast<unsigned char>(x)) ==
                          std::tolower(static_cast<unsigned char>(y));
               });
    }

    std::vector<ClassDef> classes_;
    std::vector<PredicateDef> predicates_;
    std::map<std::string, std::size_t, std::less<>> class_lookup_;
    std::map<std::string, std::size_t, std::less<>> predicate_lookup_;
    std::vector<std::vector<char>> ancestors_;
};

namespace detail {

inline void check_expr(const ClassExpr& expr, const std::map<std::string, std::size_t, std::less<>>& classes,
                       const std::string& where) {
    switch (expr.kind) {
    case ClassExpr::Kind::named:
        if (!classes.contains(expr.name)) {
            throw ReferenceError(where + ": unknown class '" + expr.name + "'");
        }
        return;
    case ClassExpr::Kind::negation:
        if (expr.operands.size() != 1) {
            throw OntologyError(where + ": 'not' takes exactly one operand");
        }
        break;
    case ClassExpr::Kind::all_of:
    case ClassExpr::Kind::any_of:
        if (expr.operands.empty()) {
            throw OntologyError(where + ": empty '" +
                                std::string(expr.kind == ClassExpr::Kind::all_of ? "and" : "or") + "' list");
        }
        break;
    }
    for (const auto& op : expr.operands) {
        check_expr(op, classes, where);
    }
}

} // namespace detail

inline Ontology Ontology::build(std::vector<ClassDef> classes, std::vector<PredicateDef> predicates) {
    Ontology onto;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].name.empty()) {
            throw OntologyError("class #" + std::to_string(i) + " has an empty name");
        }
        if (!onto.class_lookup_.emplace(classes[i].name, i).second) {
            throw OntologyError("duplicate class '" + classes[i].name + "'");
        }
    }
    for (std::size_t i = 0; i < predicates.size(); ++i) {
        if (predicates[i].name.empty()) {
            throw OntologyError("predicate #" + std::to_string(i) + " has an empty name");
        }
        if (!onto.predicate_lookup_.emplace(predicates[i].name, i).second) {
            throw OntologyError("duplicate predicate '" + predicates[i].name + "'");
        }
    }

    // Parent edges, deduplicated in declaration order.
    std::vector<std::vector<std::size_t>> parent_idx(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) {
        std::vector<std::string> unique;
        for (const auto& parent : classes[i].parents) {
            auto it = onto.class_lookup_.find(parent);
            if (it == onto.class_lookup_.end()) {
                throw ReferenceError("class '" + classes[i].name + "': unknown parent '" + parent + "'");
            }
            if (std::find(unique.begin(), unique.end(), parent) == unique.end()) {
                unique.push_back(parent);
                parent_idx[i].push_back(it->second);
            }
        }
        classes[i].parents = std::move(unique);
    }

    // Cycle check (iterative three-colour DFS) and ancestor closure.
    enum : char { white, grey, black };
    std::vector<char> colour(classes.size(), white);
    onto.ancestors_.assign(classes.size(), std::vector<char>(classes.size(), 0));
    for (std::size_t root = 0; root < classes.size(); ++root) {
        if (colour[root] != white) {
            continue;
        }
        std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
        colour[root] = grey;
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < parent_idx[node].size()) {
                const std::size_t parent = parent_idx[node][next++];
                if (colour[parent] == grey) {
                    throw OntologyError("cyclic class hierarchy through '" + classes[parent].name + "'");
                }
                if (colour[parent] == white) {
                    colour[parent] = grey;
                    stack.emplace_back(parent, 0);
                }
                continue;
            }
            auto& row = onto.ancestors_[node];
            row[node] = 1;
            for (std::size_t parent : parent_idx[node]) {
                const auto& prow = onto.ancestors_[parent];
                for (std::size_t j = 0; j < prow.size(); ++j) {
                    row[j] = static_cast<char>(row[j] | prow[j]);
                }
            }
            colour[node] = black;
            stack.pop_back();
        }
    }

    for (const auto& p : predicates) {
        detail::check_expr(p.domain, onto.class_lookup_, "predicate '" + p.name + "' domain");
        detail::check_expr(p.range, onto.class_lookup_, "predicate '" + p.name + "' range");
    }

    // Inverse declarations: resolve, reject self-inverse unless symmetric, make mutual.
    for (std::size_t i = 0; i < predicates.size(); ++i) {
        if (!predicates[i].inverse_of) {
            continue;
        }
        const std::string& target = *predicates[i].inverse_of;
        auto it = onto.predicate_lookup_.find(target);
        if (it == onto.predicate_lookup_.end()) {
            throw ReferenceError("predicate '" + predicates[i].name + "': unknown inverse '" + target + "'");
        }
        if (it->second == i && !predicates[i].symmetric) {
            throw OntologyError("predicate '" + predicates[i].name +
                                "' is declared its own inverse but is not symmetric");
        }
    }
    for (std::size_t i = 0; i < predicates.size(); ++i) {
        if (!predicates[i].inverse_of) {
            continue;
        }
        auto& other = predicates[onto.predicate_lookup_.find(*predicates[i].inverse_of)->second];
        if (!other.inverse_of) {
            other.inverse_of = predicates[i].name;
        } else if (*other.inverse_of != predicates[i].name) {
            throw OntologyError("predicate '" + predicates[i].name + "' declares inverse '" + other.name +
                                "', but '" + other.name + "' declares inverse '" + *other.inverse_of + "'");
        }
    }

    onto.classes_ = std::move(classes);
    onto.predicates_ = std::move(predicates);
    return onto;
}

// ---------------------------------------------------------------------------
// Queries

inline bool is_subclass_of(const Ontology& onto, std::string_view child, std::string_view ancestor) {
    return onto.is_ancestor(onto.require_class(child), onto.require_class(ancestor));
}

/// Evaluates `expr` for the class at index `cls`.
inline bool eval_class_expr(const Ontology& onto, const ClassExpr& expr, std::size_t cls) {
    switch (expr.kind) {
    case ClassExpr::Kind::named:
        return onto.is_ancestor(cls, onto.require_class(expr.name));
    case ClassExpr::Kind::negation:
        return !eval_class_expr(onto, expr.operands.front(), cls);
    case ClassExpr::Kind::all_of:
        return std::all_of(expr.operands.begin(), expr.operands.end(),
                           [&](const ClassExpr& e) { return eval_class_expr(onto, e, cls); });
    case ClassExpr::Kind::any_of:
        return std::any_of(expr.operands.begin(), expr.operands.end(),
                           [&](const ClassExpr& e) { return eval_class_expr(onto, e, cls); });
    }
    return false;
}

inline bool eval_class_expr(const Ontology& onto, const ClassExpr& expr, std::string_view cls) {
    return eval_class_expr(onto, expr, onto.require_class(cls));
}

// ---------------------------------------------------------------------------
// Document format

namespace detail {

inline ClassExpr class_expr_from_json(const Json& j, const std::string& path) {
    if (!j.is_object() || j.size() != 1) {
        throw FormatError(path + ": class expression must be an object with exactly one of "
                                 "\"class\", \"and\", \"or\", \"not\"");
    }
    const auto& [key, value] = *j.items().begin();
    if (key == "class") {
        if (!value.is_string()) {
            throw FormatError(path + "/class: expected a string");
        }
        return ClassExpr::named(value.get<std::string>());
    }
    if (key == "and" || key == "or") {
        if (!value.is_array() || value.empty()) {
            throw FormatError(path + "/" + key + ": expected a non-empty array");
        }
        std::vector<ClassExpr> parts;
        for (std::size_t i = 0; i < value.size(); ++i) {
            parts.push_back(class_expr_from_json(value[i], path + "/" + key + "/" + std::to_string(i)));
        }
        return key == "and" ? ClassExpr::all_of(std::move(parts)) : ClassExpr::any_of(std::move(parts));
    }
    if (key == "not") {
        return ClassExpr::negation(class_expr_from_json(value, path + "/not"));
    }
    throw FormatError(path + ": unknown class expression operator \"" + key + "\"");
}

inline bool flag(const Json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return false;
    }
    if (!it->is_boolean()) {
        throw FormatError(path + "/" + key + ": expected a boolean");
    }
    return it->get<bool>();
}

inline const Json& required(const Json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw FormatError(path + ": missing \"" + key + "\"");
    }
    return *it;
}

inline std::string name_field(const Json& obj, const std::string& path) {
    const Json& name = required(obj, "name", path);
    if (!name.is_string()) {
        throw FormatError(path + "/name: expected a string");
    }
    return name.get<std::string>();
}

} // namespace detail

inline Json to_json(const ClassExpr& expr) {
    switch (expr.kind) {
    case ClassExpr::Kind::named:
        return {{"class", expr.name}};
    case ClassExpr::Kind::negation:
        return {{"not", to_json(expr.operands.front())}};
    case ClassExpr::Kind::all_of:
    case ClassExpr::Kind::any_of: {
        Json parts = Json::array();
        for (const auto& op : expr.operands) {
            parts.push_back(to_json(op));
        }
        return {{expr.kind == ClassExpr::Kind::all_of ? "and" : "or", parts}};
    }
    }
    return {};
}

/// Parses an ontology document. Syntax errors carry line/column; schema
/// errors carry the JSON path of the offending value.
inline Ontology parse_ontology(std::string_view text) {
    const Json doc = parse_json(text);
    if (!doc.is_object()) {
        throw FormatError("ontology document must be a JSON object");
    }
    for (const auto& [key, _] : doc.items()) {
        if (key != "classes" && key != "predicates") {
            throw FormatError("unknown top-level key \"" + key + "\"");
        }
    }

    std::vector<ClassDef> classes;
    if (auto it = doc.find("classes"); it != doc.end()) {
        if (!it->is_array()) {
            throw FormatError("/classes: expected an array");
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
            const Json& c = (*it)[i];
            const std::string path = "/classes/" + std::to_string(i);
            if (!c.is_object()) {
                throw FormatError(path + ": expected an object");
            }
            ClassDef def{detail::name_field(c, path), {}};
            if (auto parents = c.find("parents"); parents != c.end() && !parents->is_null()) {
                if (!parents->is_array()) {
                    throw FormatError(path + "/parents: expected an array");
                }
                for (const auto& p : *parents) {
                    if (!p.is_string()) {
                        throw FormatError(path + "/parents: expected class names");
                    }
                    def.parents.push_back(p.get<std::string>());
                }
            }
            classes.push_back(std::move(def));
        }
    }

    static constexpr std::string_view predicate_keys[] = {
        "name", "domain", "range", "functional", "inverse_functional", "symmetric", "transitive", "inverse_of"};
    std::vector<PredicateDef> predicates;
    if (auto it = doc.find("predicates"); it != doc.end()) {
        if (!it->is_array()) {
            throw FormatError("/predicates: expected an array");
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
            const Json& p = (*it)[i];
            const std::string path = "/predicates/" + std::to_string(i);
            if (!p.is_object()) {
                throw FormatError(path + ": expected an object");
            }
            for (const auto& [key, _] : p.items()) {
                if (std::find(std::begin(predicate_keys), std::end(predicate_keys), key) ==
                    std::end(predicate_keys)) {
                    throw FormatError(path + ": unknown key \"" + key + "\"");
                }
            }
            PredicateDef def;
            def.name = detail::name_field(p, path);
            def.domain = detail::class_expr_from_json(detail::required(p, "domain", path), path + "/domain");
            def.range = detail::class_expr_from_json(detail::required(p, "range", path), path + "/range");
            def.functional = detail::flag(p, "functional", path);
            def.inverse_functional = detail::flag(p, "inverse_functional", path);
            def.symmetric = detail::flag(p, "symmetric", path);
            def.transitive = detail::flag(p, "transitive", path);
            if (auto inv = p.find("inverse_of"); inv != p.end() && !inv->is_null()) {
                if (!inv->is_string()) {
                    throw FormatError(path + "/inverse_of: expected a string or null");
                }
                def.inverse_of = inv->get<std::string>();
            }
            predicates.push_back(std::move(def));
        }
    }
    return Ontology::build(std::move(classes), std::move(predicates));
}

inline Ontology load_ontology(const std::filesystem::path& path) {
    return parse_ontology(read_text_file(path));
}

inline Json to_json(const Ontology& onto) {
    Json classes = Json::array();
    for (const auto& c : onto.classes()) {
        classes.push_back({{"name", c.name}, {"parents", c.parents}});
    }
    Json predicates = Json::array();
    for (const auto& p : onto.predicates()) {
        predicates.push_back({{"name", p.name},
                              {"domain", to_json(p.domain)},
                              {"range", to_json(p.range)},
                              {"functional", p.functional},
                              {"inverse_functional", p.inverse_functional},
                              {"symmetric", p.symmetric},
                              {"transitive", p.transitive},
                              {"inverse_of", p.inverse_of ? Json(*p.inverse_of) : Json(nullptr)}});
    }
    return {{"classes", classes}, {"predicates", predicates}};
}

inline std::string serialize_ontology(const Ontology& onto) {
    return to_json(onto).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
    enum class Severity { warning, error };

    Severity severity = Severity::warning;
    std::string subject; // predicate or class the diagnostic is about
    std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::error; });
}

namespace detail {

// An `and` listing both X and `not X` as direct operands can never hold.
inline std::optional<std::string> contradictory_conjunct(const ClassExpr& expr) {
    if (expr.kind == ClassExpr::Kind::all_of) {
        for (const auto& a : expr.operands) {
            for (const auto& b : expr.operands) {
                if (b.kind == ClassExpr::Kind::negation && b.operands.front() == a) {
                    return to_string(a);
                }
            }
        }
    }
    for (const auto& op : expr.operands) {
        if (auto hit = contradictory_conjunct(op)) {
            return hit;
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Syntactic lint over a built ontology. Never throws.
inline std::vector<Diagnostic> validate_ontology(const Ontology& onto) {
    using Severity = Diagnostic::Severity;
    std::vector<Diagnostic> out;
    for (const auto& p : onto.predicates()) {
        if (p.symmetric && !(p.domain == p.range)) {
            out.push_back({Severity::warning, p.name,
                           "symmetric predicate has different domain (" + to_string(p.domain) + ") and range (" +
                               to_string(p.range) + ")"});
        }
        if (p.functional && p.transitive) {
            out.push_back({Severity::warning, p.name,
                           "functional and transitive: the inference closure can violate functionality"});
        }
        if (p.inverse_functional && p.transitive) {
            out.push_back({Severity::warning, p.name,
                           "inverse functional and transitive: the inference closure can violate inverse "
                           "functionality"});
        }
        if (auto cls = detail::contradictory_conjunct(p.domain)) {
            out.push_back({Severity::error, p.name, "domain requires both " + *cls + " and not " + *cls});
        }
        if (auto cls = detail::contradictory_conjunct(p.range)) {
            out.push_back({Severity::error, p.name, "range requires both " + *cls + " and not " + *cls});
        }
    }
    return out;
}

inline std::string to_string(const Diagnostic& d) {
    return std::string(d.severity == Diagnostic::Severity::error ? "error" : "warning") + ": " + d.subject + ": " +
           d.message;
}

} // namespace ontosg
