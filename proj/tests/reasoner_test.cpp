#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace ontosg {
namespace {

using testing::teresa;

const ConstraintTensor& teresa_tensor() {
    static const ConstraintTensor tensor = build_constraint_tensor(teresa());
    return tensor;
}

TEST(ConstraintTensor, WorkedExamples) {
    EXPECT_TRUE(triplet_allowed(teresa_tensor(), "Person", "Chair", "sitting on"));
    EXPECT_FALSE(triplet_allowed(teresa_tensor(), "Plant", "Food", "sitting on"));
    EXPECT_TRUE(triplet_allowed(teresa_tensor(), "Person", "Cup", "holding"));
    EXPECT_TRUE(triplet_allowed(teresa_tensor(), "Cup", "Table", "on top of"));
    EXPECT_FALSE(triplet_allowed(teresa_tensor(), "Window", "Table", "sitting at"));
}

TEST(ConstraintTensor, Shape) {
    const auto& t = teresa_tensor();
    EXPECT_EQ(t.num_classes(), teresa().classes().size());
    EXPECT_EQ(t.num_predicates(), teresa().predicates().size());
    const auto row = t.predicates_for(*t.class_id("Person"), *t.class_id("Chair"));
    ASSERT_EQ(row.size(), t.num_predicates());
    EXPECT_TRUE(row[*t.predicate_id("sitting on")]);
    EXPECT_FALSE(row[*t.predicate_id("on top of")]);
}

TEST(ConstraintTensor, UnknownNamesThrow) {
    EXPECT_THROW(triplet_allowed(teresa_tensor(), "Unicorn", "Chair", "sitting on"), ReferenceError);
    EXPECT_THROW(triplet_allowed(teresa_tensor(), "Person", "Chair", "flying over"), ReferenceError);
}

TEST(ConstraintTensor, CaseInsensitiveClassFallback) {
    EXPECT_TRUE(triplet_allowed(teresa_tensor(), "person", "chair", "sitting on"));
}

TEST(ConstraintTensor, EveryEntryMatchesExpressionOracle) {
    std::mt19937 rng(5);
    for (int round = 0; round < 20; ++round) {
        const Ontology onto = testing::random_ontology(rng, {5, 3, 3, false});
        const ConstraintTensor tensor = build_constraint_tensor(onto);
        for (const auto& p : onto.predicates()) {
            const auto dom = testing::extension(onto, p.domain);
            const auto rng_ext = testing::extension(onto, p.range);
            for (const auto& a : onto.classes()) {
                for (const auto& b : onto.classes()) {
                    EXPECT_EQ(triplet_allowed(tensor, a.name, b.name, p.name),
                              dom.contains(a.name) && rng_ext.contains(b.name));
                }
            }
        }
    }
}

TEST(ConstraintTensor, RandomLookupsMatchOracle) {
    std::mt19937 rng(17);
    const Ontology& onto = teresa();
    std::uniform_int_distribution<std::size_t> cls(0, onto.classes().size() - 1);
    std::uniform_int_distribution<std::size_t> pred(0, onto.predicates().size() - 1);
    for (int i = 0; i < 200; ++i) {
        const auto& a = onto.classes()[cls(rng)].name;
        const auto& b = onto.classes()[cls(rng)].name;
        const auto& p = onto.predicates()[pred(rng)];
        EXPECT_EQ(triplet_allowed(teresa_tensor(), a, b, p.name),
                  testing::extension(onto, p.domain).contains(a) && testing::extension(onto, p.range).contains(b));
    }
}

// Object ids for the closure vignettes.
constexpr ObjectId person1 = 1, chair1 = 2, table1 = 3, cup1 = 4;

TEST(InferenceClosure, SymmetricNextTo) {
    const TripletSet out = inference_closure(teresa(), {{chair1, "next to", table1}});
    EXPECT_EQ(out, (TripletSet{{chair1, "next to", table1}, {table1, "next to", chair1}}));
    const Provenance* prov = out.provenance({table1, "next to", chair1});
    ASSERT_NE(prov, nullptr);
    EXPECT_TRUE(prov->inferred);
    EXPECT_EQ(prov->axiom, AxiomKind::symmetric);
    EXPECT_FALSE(out.provenance({chair1, "next to", table1})->inferred);
}

TEST(InferenceClosure, InverseOnTopOf) {
    const TripletSet out = inference_closure(teresa(), {{cup1, "on top of", table1}});
    EXPECT_EQ(out, (TripletSet{{cup1, "on top of", table1}, {table1, "below", cup1}}));
    EXPECT_EQ(out.provenance({table1, "below", cup1})->axiom, AxiomKind::inverse);
}

TEST(InferenceClosure, TransitiveBehind) {
    const TripletSet out =
        inference_closure(teresa(), {{person1, "behind", chair1}, {chair1, "behind", table1}});
    EXPECT_TRUE(out.contains({person1, "behind", table1}));
    const Provenance* prov = out.provenance({person1, "behind", table1});
    EXPECT_EQ(prov->axiom, AxiomKind::transitive);
    EXPECT_EQ(prov->sources.size(), 2u);
    // `behind` is also the inverse of `in front of`, which is itself transitive.
    EXPECT_TRUE(out.contains({table1, "in front of", person1}));
    EXPECT_EQ(out.size(), 6u);
}

TEST(InferenceClosure, CycleTerminatesWithoutSelfLoops) {
    const Ontology onto = parse_ontology(R"({"classes": [{"name": "T"}], "predicates": [
        {"name": "r", "domain": {"class": "T"}, "range": {"class": "T"}, "transitive": true}]})");
    const TripletSet out = inference_closure(onto, {{1, "r", 2}, {2, "r", 3}, {3, "r", 1}});
    EXPECT_EQ(out.size(), 6u);
    for (ObjectId a : {1, 2, 3}) {
        for (ObjectId b : {1, 2, 3}) {
            EXPECT_EQ(out.contains({a, "r", b}), a != b);
        }
    }
}

TEST(InferenceClosure, AssertedComeFirstAndOrderIsDeterministic) {
    const TripletSet in{{person1, "behind", chair1}, {chair1, "behind", table1}, {cup1, "on top of", table1}};
    const TripletSet a = inference_closure(teresa(), in);
    const TripletSet b = inference_closure(teresa(), in);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].triplet, b[i].triplet);
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
        EXPECT_EQ(a[i].triplet, in[i].triplet);
        EXPECT_FALSE(a[i].provenance.inferred);
    }
}

TEST(InferenceClosure, UnknownPredicateThrows) {
    EXPECT_THROW(inference_closure(teresa(), {{1, "flying over", 2}}), ReferenceError);
}

TEST(InferenceClosure, MatchesBruteForceAndIsIdempotentMonotone) {
    std::mt19937 rng(23);
    for (int round = 0; round < 60; ++round) {
        const Ontology onto = testing::random_ontology(rng, {4, 4, 1, true});
        std::uniform_int_distribution<ObjectId> obj(0, 5);
        std::uniform_int_distribution<std::size_t> pred(0, onto.predicates().size() - 1);
        std::set<Triplet> small, large;
        for (int i = 0; i < 8; ++i) {
            Triplet t{obj(rng), onto.predicates()[pred(rng)].name, obj(rng)};
            if (t.subject == t.object) continue;
            large.insert(t);
            if (i % 2 == 0) small.insert(t);
        }
        const TripletSet closed = inference_closure(onto, testing::as_triplet_set(large));
        EXPECT_EQ(testing::as_set(closed), testing::brute_force_closure(onto, large));
        EXPECT_EQ(inference_closure(onto, closed), closed);
        const auto closed_small = testing::as_set(inference_closure(onto, testing::as_triplet_set(small)));
        for (const auto& t : closed_small) {
            EXPECT_TRUE(closed.contains(t));
        }
        for (const auto& e : closed) {
            EXPECT_NE(e.triplet.subject, e.triplet.object);
        }
    }
}

TEST(InferenceClosure, SymmetricOnlyAtMostDoubles) {
    const Ontology onto = parse_ontology(R"({"classes": [{"name": "T"}], "predicates": [
        {"name": "s", "domain": {"class": "T"}, "range": {"class": "T"}, "symmetric": true},
        {"name": "u", "domain": {"class": "T"}, "range": {"class": "T"}, "symmetric": true}]})");
    std::mt19937 rng(2);
    std::uniform_int_distribution<ObjectId> obj(0, 6);
    std::bernoulli_distribution which(0.5);
    for (int round = 0; round < 50; ++round) {
        TripletSet in;
        for (int i = 0; i < 10; ++i) {
            const ObjectId a = obj(rng), b = obj(rng);
            if (a != b) in.insert({a, which(rng) ? "s" : "u", b});
        }
        EXPECT_LE(inference_closure(onto, in).size(), 2 * in.size());
    }
}

TEST(CheckConsistency, DoubleSittingIsOneFunctionalViolation) {
    const ObjectClasses classes{{1, "Person"}, {2, "Chair"}, {3, "Chair"}};
    const auto v = check_consistency(teresa(), teresa_tensor(), classes,
                                     {{1, "sitting on", 2}, {1, "sitting on", 3}});
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, Violation::Kind::functional);
    EXPECT_EQ(v[0].triplets.size(), 2u);
}

TEST(CheckConsistency, InverseFunctionalAndDomainRange) {
    const ObjectClasses classes{{1, "Person"}, {2, "Person"}, {3, "Cup"}, {4, "Plant"}, {5, "Food"}};
    const auto v = check_consistency(teresa(), teresa_tensor(), classes,
                                     {{1, "holding", 3}, {2, "holding", 3}, {4, "sitting on", 5}});
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0].kind, Violation::Kind::domain_range);
    EXPECT_EQ(v[0].triplets.front(), (Triplet{4, "sitting on", 5}));
    EXPECT_EQ(v[1].kind, Violation::Kind::inverse_functional);
}

TEST(CheckConsistency, EmptyGraph) {
    EXPECT_TRUE(check_consistency(teresa(), teresa_tensor(), {}, {}).empty());
}

TEST(CheckConsistency, UnknownObjectThrows) {
    EXPECT_THROW(check_consistency(teresa(), teresa_tensor(), {{1, "Person"}}, {{1, "holding", 9}}),
                 ReferenceError);
}

TEST(CheckConsistency, RandomConsistentFixturesAreClean) {
    // Build scenes by construction: draw candidate triplets, keep those the
    // ontology allows and that respect functionality so far.
    std::mt19937 rng(31);
    const Ontology& onto = teresa();
    const auto& classes = onto.classes();
    std::uniform_int_distribution<std::size_t> cls(0, classes.size() - 1);
    std::uniform_int_distribution<std::size_t> pred(0, onto.predicates().size() - 1);
    for (int round = 0; round < 30; ++round) {
        ObjectClasses objects;
        for (ObjectId i = 0; i < 8; ++i) objects[i] = classes[cls(rng)].name;
        TripletSet gt;
        std::set<std::pair<std::string, ObjectId>> used_subject, used_object;
        std::uniform_int_distribution<ObjectId> obj(0, 7);
        for (int i = 0; i < 40; ++i) {
            const auto& p = onto.predicates()[pred(rng)];
            const ObjectId s = obj(rng), o = obj(rng);
            if (s == o || !triplet_allowed(teresa_tensor(), objects[s], objects[o], p.name)) continue;
            if (p.functional && used_subject.contains({p.name, s})) continue;
            if (p.inverse_functional && used_object.contains({p.name, o})) continue;
            if (gt.insert({s, p.name, o})) {
                used_subject.insert({p.name, s});
                used_object.insert({p.name, o});
            }
        }
        EXPECT_TRUE(check_consistency(onto, teresa_tensor(), objects, gt).empty());
    }
}

} // namespace
} // namespace ontosg
