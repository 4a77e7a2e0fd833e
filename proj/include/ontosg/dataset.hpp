#pragma once

// Scene-graph datasets: the one-record-per-line file format, predicate maps,
// tag filtering, inference-based augmentation, Table-2 style statistics,
// least-frequent-predicate stratified splitting and the seen-triplet registry.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ontosg/error.hpp"
#include "ontosg/json_io.hpp"
#include "ontosg/ontology.hpp"
#include "ontosg/reasoner.hpp"

namespace ontosg {

struct BoundingBox {
    double x = 0;
    double y = 0;
    double width = 0;
    double height = 0;
};

struct SceneObject {
    ObjectId id = 0;
    std::string class_name;
    BoundingBox bbox;
};

struct SceneGraph {
    /// Set by apply_predicate_map on images that lost every triplet.
    static constexpr const char* empty_after_mapping = "empty_after_mapping";

    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<SceneObject> objects;
    TripletSet triplets;
    std::set<std::string> tags;
    std::set<std::string> flags;

    const SceneObject* find_object(ObjectId id) const {
        for (const auto& o : objects) {
            if (o.id == id) {
                return &o;
            }
        }
        return nullptr;
    }

    ObjectClasses classes() const {
        ObjectClasses out;
        for (const auto& o : objects) {
            out.emplace(o.id, o.class_name);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// File format

struct LoadReport {
    std::size_t duplicate_triplets = 0;
};

namespace detail {

inline std::optional<AxiomKind> axiom_from_string(std::string_view s) {
    if (s == "inverse") return AxiomKind::inverse;
    if (s == "symmetric") return AxiomKind::symmetric;
    if (s == "transitive") return AxiomKind::transitive;
    return std::nullopt;
}

inline SceneGraph scene_graph_from_json(const Json& rec, std::size_t line, LoadReport& report) {
    const std::string where = "line " + std::to_string(line);
    if (!rec.is_object()) {
        throw FormatError(where + ": record must be a JSON object");
    }
    auto id_it = rec.find("image_id");
    if (id_it == rec.end() || !id_it->is_string()) {
        throw FormatError(where + ": missing string \"image_id\"");
    }
    SceneGraph g;
    g.image_id = id_it->get<std::string>();
    const std::string image = where + ", image '" + g.image_id + "'";

    auto positive_int = [&](const char* key) {
        auto it = rec.find(key);
        if (it == rec.end() || !it->is_number_integer() || it->get<std::int64_t>() <= 0) {
            throw FormatError(image + ": \"" + std::string(key) + "\" must be a positive integer");
        }
        return static_cast<int>(it->get<std::int64_t>());
    };
    g.width = positive_int("width");
    g.height = positive_int("height");

    auto string_set = [&](const char* key, std::set<std::string>& dst) {
        auto it = rec.find(key);
        if (it == rec.end() || it->is_null()) {
            return;
        }
        if (!it->is_array()) {
            throw FormatError(image + ": \"" + std::string(key) + "\" must be an array of strings");
        }
        for (const auto& v : *it) {
            if (!v.is_string()) {
                throw FormatError(image + ": \"" + std::string(key) + "\" must be an array of strings");
            }
            dst.insert(v.get<std::string>());
        }
    };
    string_set("tags", g.tags);
    string_set("flags", g.flags);

    auto objects = rec.find("objects");
    if (objects == rec.end() || !objects->is_array()) {
        throw FormatError(image + ": missing \"objects\" array");
    }
    std::set<ObjectId> ids;
    for (const auto& o : *objects) {
        if (!o.is_object() || !o.contains("id") || !o["id"].is_number_integer() || !o.contains("class") ||
            !o["class"].is_string()) {
            throw FormatError(image + ": object needs integer \"id\" and string \"class\"");
        }
        SceneObject obj;
        obj.id = o["id"].get<ObjectId>();
        obj.class_name = o["class"].get<std::string>();
        if (!ids.insert(obj.id).second) {
            throw FormatError(image + ": duplicate object id " + std::to_string(obj.id));
        }
        auto bbox = o.find("bbox");
        if (bbox == o.end() || !bbox->is_array() || bbox->size() != 4 ||
            !std::all_of(bbox->begin(), bbox->end(), [](const Json& v) { return v.is_number(); })) {
            throw FormatError(image + ": object " + std::to_string(obj.id) + " needs \"bbox\": [x, y, w, h]");
        }
        obj.bbox = {(*bbox)[0].get<double>(), (*bbox)[1].get<double>(), (*bbox)[2].get<double>(),
                    (*bbox)[3].get<double>()};
        if (!(obj.bbox.width > 0) || !(obj.bbox.height > 0)) {
            throw FormatError(image + ": object " + std::to_string(obj.id) + " has a non-positive bbox size");
        }
        g.objects.push_back(std::move(obj));
    }

    auto triplets = rec.find("triplets");
    if (triplets != rec.end() && !triplets->is_null()) {
        if (!triplets->is_array()) {
            throw FormatError(image + ": \"triplets\" must be an array");
        }
        for (const auto& t : *triplets) {
            if (!t.is_object() || !t.contains("s") || !t["s"].is_number_integer() || !t.contains("o") ||
                !t["o"].is_number_integer() || !t.contains("p") || !t["p"].is_string()) {
                throw FormatError(image + ": triplet needs integer \"s\", \"o\" and string \"p\"");
            }
            Triplet tr{t["s"].get<ObjectId>(), t["p"].get<std::string>(), t["o"].get<ObjectId>()};
            for (ObjectId end : {tr.subject, tr.object}) {
                if (!ids.contains(end)) {
                    throw FormatError(image + ": triplet " + to_string(tr) + " references unknown object " +
                                      std::to_string(end));
                }
            }
            if (tr.subject == tr.object) {
                throw FormatError(image + ": triplet " + to_string(tr) + " relates an object to itself");
            }
            Provenance prov;
            if (auto inf = t.find("inferred"); inf != t.end() && !inf->is_null()) {
                auto kind = inf->is_string() ? axiom_from_string(inf->get<std::string>()) : std::nullopt;
                if (!kind) {
                    throw FormatError(image + ": \"inferred\" must be inverse, symmetric or transitive");
                }
                prov = Provenance::derived(*kind, {});
            }
            if (!g.triplets.insert(std::move(tr), std::move(prov))) {
                ++report.duplicate_triplets;
            }
        }
    }
    return g;
}

} // namespace detail

inline Json to_json(const SceneGraph& g) {
    Json objects = Json::array();
    for (const auto& o : g.objects) {
        objects.push_back(
            {{"id", o.id}, {"class", o.class_name}, {"bbox", {o.bbox.x, o.bbox.y, o.bbox.width, o.bbox.height}}});
    }
    Json triplets = Json::array();
    for (const auto& e : g.triplets) {
        Json t = {{"s", e.triplet.subject}, {"p", e.triplet.predicate}, {"o", e.triplet.object}};
        if (e.provenance.inferred) {
            t["inferred"] = to_string(e.provenance.axiom);
        }
        triplets.push_back(std::move(t));
    }
    Json rec = {{"image_id", g.image_id},
                {"width", g.width},
                {"height", g.height},
                {"tags", g.tags},
                {"objects", objects},
                {"triplets", triplets}};
    if (!g.flags.empty()) {
        rec["flags"] = g.flags;
    }
    return rec;
}

inline std::vector<SceneGraph> parse_dataset(std::string_view text, LoadReport* report = nullptr) {
    LoadReport local;
    std::vector<SceneGraph> out;
    std::set<std::string> seen;
    for_each_json_line(text, [&](const Json& rec, std::size_t line) {
        out.push_back(detail::scene_graph_from_json(rec, line, local));
        if (!seen.insert(out.back().image_id).second) {
            throw FormatError("line " + std::to_string(line) + ": duplicate image_id '" + out.back().image_id +
                              "'");
        }
    });
    if (report) {
        *report = local;
    }
    return out;
}

inline std::vector<SceneGraph> load_dataset(const std::filesystem::path& path, LoadReport* report = nullptr) {
    try {
        return parse_dataset(read_text_file(path), report);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), 0, 0);
    }
}

inline std::string serialize_dataset(const std::vector<SceneGraph>& graphs) {
    std::string out;
    for (const auto& g : graphs) {
        out += to_json(g).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Violation> check_consistency(const Ontology& onto, const ConstraintTensor& tensor,
                                                const SceneGraph& graph) {
    return check_consistency(onto, tensor, graph.classes(), graph.triplets);
}

// ---------------------------------------------------------------------------
// Predicate map

/// Ontology predicate → equivalent source-dataset predicate strings. Every
/// ontology predicate also maps to itself, which makes the map idempotent.
class PredicateMap {
public:
    PredicateMap() = default;

    void add(const std::string& target, const std::vector<std::string>& sources) {
        auto& list = entries_[target];
        bind(target, target);
        for (const auto& s : sources) {
            bind(s, target);
            if (std::find(list.begin(), list.end(), s) == list.end()) {
                list.push_back(s);
            }
        }
    }

    std::optional<std::string> lookup(std::string_view source) const {
        auto it = reverse_.find(source);
        if (it == reverse_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    const std::map<std::string, std::vector<std::string>>& entries() const noexcept { return entries_; }

private:
    void bind(const std::string& source, const std::string& target) {
        auto [it, fresh] = reverse_.try_emplace(source, target);
        if (!fresh && it->second != target) {
            throw FormatError("source predicate '" + source + "' maps to both '" + it->second + "' and '" + target +
                              "'");
        }
    }

    std::map<std::string, std::vector<std::string>> entries_;
    std::map<std::string, std::string, std::less<>> reverse_;
};

inline PredicateMap parse_predicate_map(std::string_view text) {
    const Json doc = parse_json(text);
    if (!doc.is_object()) {
        throw FormatError("predicate map must be a JSON object");
    }
    PredicateMap map;
    for (const auto& [target, sources] : doc.items()) {
        if (!sources.is_array() ||
            !std::all_of(sources.begin(), sources.end(), [](const Json& s) { return s.is_string(); })) {
            throw FormatError("predicate map entry '" + target + "' must be an array of strings");
        }
        map.add(target, sources.get<std::vector<std::string>>());
    }
    return map;
}

inline PredicateMap load_predicate_map(const std::filesystem::path& path) {
    return parse_predicate_map(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Transformations

inline std::vector<SceneGraph> filter_by_tag(const std::vector<SceneGraph>& graphs, std::string_view required_tag) {
    std::vector<SceneGraph> out;
    for (const auto& g : graphs) {
        if (g.tags.find(std::string(required_tag)) != g.tags.end()) {
            out.push_back(g);
        }
    }
    return out;
}

/// Rewrites source predicates to ontology predicates and drops unmatched
/// triplets. The object list is left untouched.
inline SceneGraph apply_predicate_map(const SceneGraph& graph, const PredicateMap& map) {
    SceneGraph out = graph;
    out.triplets = TripletSet{};
    for (const auto& e : graph.triplets) {
        if (auto target = map.lookup(e.triplet.predicate)) {
            out.triplets.insert({e.triplet.subject, *target, e.triplet.object}, e.provenance);
        }
    }
    if (!graph.triplets.empty() && out.triplets.empty()) {
        out.flags.insert(SceneGraph::empty_after_mapping);
    }
    return out;
}

inline SceneGraph augment_with_inference(const SceneGraph& graph, const Ontology& onto) {
    SceneGraph out = graph;
    out.triplets = inference_closure(onto, graph.triplets);
    return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
    std::size_t num_images = 0;
    double connected_objects_per_image = 0;
    double triplets_per_image = 0;
    double annotated_pairs_per_image = 0;
    double pct_pairs_annotated = 0;
    /// Images contributing to pct_pairs_annotated (at least two connected objects).
    std::size_t images_with_pairs = 0;
};

inline DatasetStats compute_stats(const std::vector<SceneGraph>& graphs) {
    DatasetStats s;
    s.num_images = graphs.size();
    double connected = 0, triplets = 0, pairs = 0, pct = 0;
    for (const auto& g : graphs) {
        std::set<ObjectId> incident;
        std::set<std::pair<ObjectId, ObjectId>> annotated;
        for (const auto& e : g.triplets) {
            incident.insert(e.triplet.subject);
            incident.insert(e.triplet.object);
            annotated.emplace(e.triplet.subject, e.triplet.object);
        }
        const double m = static_cast<double>(incident.size());
        connected += m;
        triplets += static_cast<double>(g.triplets.size());
        pairs += static_cast<double>(annotated.size());
        if (incident.size() >= 2) {
            pct += 100.0 * static_cast<double>(annotated.size()) / (m * (m - 1));
            ++s.images_with_pairs;
        }
    }
    if (s.num_images > 0) {
        const double n = static_cast<double>(s.num_images);
        s.connected_objects_per_image = connected / n;
        s.triplets_per_image = triplets / n;
        s.annotated_pairs_per_image = pairs / n;
    }
    if (s.images_with_pairs > 0) {
        s.pct_pairs_annotated = pct / static_cast<double>(s.images_with_pairs);
    }
    return s;
}

inline Json to_json(const DatasetStats& s) {
    return {{"num_images", s.num_images},
            {"connected_objects_per_image", s.connected_objects_per_image},
            {"triplets_per_image", s.triplets_per_image},
            {"annotated_pairs_per_image", s.annotated_pairs_per_image},
            {"pct_pairs_annotated", s.pct_pairs_annotated},
            {"images_with_pairs", s.images_with_pairs}};
}

// ---------------------------------------------------------------------------
// Stratified split

struct Split {
    std::vector<SceneGraph> train;
    std::vector<SceneGraph> validation;
};

namespace detail {

inline std::set<std::string> predicates_in(const SceneGraph& g) {
    std::set<std::string> out;
    for (const auto& e : g.triplets) {
        out.insert(e.triplet.predicate);
    }
    return out;
}

} // namespace detail

/// Least-frequent-predicate bucketing: tally per-predicate image counts over
/// the images still unassigned, bucket every image under its rarest
/// predicate, split the bucket of the overall rarest predicate, repeat.
///
/// Buckets of two or more images send max(1, round(fraction * size)) images
/// to validation, capped so train keeps at least one. A singleton bucket goes
/// to train, unless train already holds all of its predicates and validation
/// lacks one of them. Images without triplets are split as a final bucket.
/// Frequency ties resolve by predicate name; the seed orders images inside
/// each bucket.
inline Split stratified_split(const std::vector<SceneGraph>& graphs, double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie strictly between 0 and 1");
    }
    std::mt19937_64 rng(seed);

    std::vector<std::set<std::string>> preds;
    preds.reserve(graphs.size());
    for (const auto& g : graphs) {
        preds.push_back(detail::predicates_in(g));
    }

    std::vector<std::size_t> remaining;
    std::vector<std::size_t> unannotated;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        (preds[i].empty() ? unannotated : remaining).push_back(i);
    }

    std::vector<char> to_validation(graphs.size(), 0);
    std::set<std::string> in_train, in_validation;

    auto assign = [&](std::vector<std::size_t> bucket, bool annotated) {
        std::sort(bucket.begin(), bucket.end(),
                  [&](std::size_t a, std::size_t b) { return graphs[a].image_id < graphs[b].image_id; });
        std::shuffle(bucket.begin(), bucket.end(), rng);
        std::size_t n_val = 0;
        if (bucket.size() >= 2) {
            const auto rounded = static_cast<std::size_t>(std::llround(validation_fraction * bucket.size()));
            n_val = std::min(std::max<std::size_t>(1, rounded), bucket.size() - 1);
        } else if (annotated && bucket.size() == 1) {
            const auto& ps = preds[bucket.front()];
            const bool train_complete =
                std::all_of(ps.begin(), ps.end(), [&](const std::string& p) { return in_train.contains(p); });
            const bool validation_missing =
                std::any_of(ps.begin(), ps.end(), [&](const std::string& p) { return !in_validation.contains(p); });
            n_val = train_complete && validation_missing ? 1 : 0;
        }
        for (std::size_t j = 0; j < bucket.size(); ++j) {
            const bool val = j < n_val;
            to_validation[bucket[j]] = val;
            (val ? in_validation : in_train).insert(preds[bucket[j]].begin(), preds[bucket[j]].end());
        }
    };

    while (!remaining.empty()) {
        std::map<std::string, std::size_t> freq;
        for (std::size_t i : remaining) {
            for (const auto& p : preds[i]) {
                ++freq[p];
            }
        }
        auto rarest_of = [&](std::size_t i) {
            const std::string* best = nullptr;
            for (const auto& p : preds[i]) {
                if (!best || freq[p] < freq[*best]) {
                    best = &p; // set iteration is name-ordered, so ties keep the smaller name
                }
            }
            return *best;
        };
        std::string target;
        for (const auto& [p, n] : freq) {
            if (target.empty() || n < freq[target]) {
                target = p;
            }
        }
        std::vector<std::size_t> bucket, rest;
        for (std::size_t i : remaining) {
            (rarest_of(i) == target ? bucket : rest).push_back(i);
        }
        assign(std::move(bucket), true);
        remaining = std::move(rest);
    }
    if (!unannotated.empty()) {
        assign(unannotated, false);
    }

    Split split;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        (to_validation[i] ? split.validation : split.train).push_back(graphs[i]);
    }
    return split;
}

/// Image ids per split and per-predicate image frequencies. Keys are sorted,
/// so the dump is byte-stable.
inline Json split_manifest(const Split& split, double validation_fraction, std::uint64_t seed) {
    std::map<std::string, std::map<std::string, std::size_t>> freq;
    auto tally = [&](const std::vector<SceneGraph>& part, const char* name) {
        Json ids = Json::array();
        for (const auto& g : part) {
            ids.push_back(g.image_id);
            for (const auto& p : detail::predicates_in(g)) {
                auto& row = freq[p];
                row.try_emplace("train", 0);
                row.try_emplace("validation", 0);
                ++row[name];
                ++row["total"];
            }
        }
        return ids;
    };
    Json train = tally(split.train, "train");
    Json validation = tally(split.validation, "validation");
    return {{"seed", seed},
            {"validation_fraction", validation_fraction},
            {"train", train},
            {"validation", validation},
            {"predicate_image_frequencies", freq}};
}

// ---------------------------------------------------------------------------
// Seen-triplet registry

struct ClassTriplet {
    std::string subject_class;
    std::string predicate;
    std::string object_class;

    friend auto operator<=>(const ClassTriplet&, const ClassTriplet&) = default;
    friend bool operator==(const ClassTriplet&, const ClassTriplet&) = default;
};

using TripletRegistry = std::set<ClassTriplet>;

inline TripletRegistry build_seen_triplet_registry(const std::vector<SceneGraph>& graphs) {
    TripletRegistry out;
    for (const auto& g : graphs) {
        for (const auto& e : g.triplets) {
            out.insert({g.find_object(e.triplet.subject)->class_name, e.triplet.predicate,
                        g.find_object(e.triplet.object)->class_name});
        }
    }
    return out;
}

inline std::string serialize_registry(const TripletRegistry& registry) {
    Json rows = Json::array();
    for (const auto& t : registry) {
        rows.push_back({t.subject_class, t.predicate, t.object_class});
    }
    return rows.dump(1) + "\n";
}

inline TripletRegistry parse_registry(std::string_view text) {
    const Json doc = parse_json(text);
    if (!doc.is_array()) {
        throw FormatError("registry must be an array of [subject_class, predicate, object_class]");
    }
    TripletRegistry out;
    for (const auto& row : doc) {
        if (!row.is_array() || row.size() != 3 ||
            !std::all_of(row.begin(), row.end(), [](const Json& v) { return v.is_string(); })) {
            throw FormatError("registry rows must be [subject_class, predicate, object_class]");
        }
        out.insert({row[0].get<std::string>(), row[1].get<std::string>(), row[2].get<std::string>()});
    }
    return out;
}

} // namespace ontosg
