#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

namespace ontosg {
namespace {

using testing::make_graph;

TEST(FitPrior, CountsAndSmoothedScores) {
    const std::vector<SceneGraph> train{
        make_graph("a", {"person", "chair", "chair"}, {{0, "sitting on", 1}, {0, "next to", 2}}),
        make_graph("b", {"person", "chair"}, {{0, "sitting on", 1}})};
    const FrequencyPrior prior = fit_prior(train, 1.0, {"sitting on", "next to", "holding"});
    EXPECT_EQ(prior.count("person", "chair", "sitting on"), 2u);
    EXPECT_EQ(prior.count("person", "chair", "next to"), 1u);
    EXPECT_EQ(prior.count("person", "chair", "holding"), 0u);
    EXPECT_DOUBLE_EQ(prior.score("person", "chair", "sitting on"), std::log(3.0 / 6.0));
    EXPECT_DOUBLE_EQ(prior.score("person", "chair", "holding"), std::log(1.0 / 6.0));
}

TEST(FitPrior, UnseenPairIsUniform) {
    const FrequencyPrior prior = fit_prior({}, 0.5, {"a", "b", "c", "d"});
    for (const char* p : {"a", "b", "c", "d"}) EXPECT_DOUBLE_EQ(prior.score("x", "y", p), std::log(0.25));
}

TEST(FitPrior, ZeroSmoothingStaysFinite) {
    const FrequencyPrior prior = fit_prior({make_graph("a", {"x", "y"}, {{0, "p", 1}})}, 0.0, {"p", "q"});
    EXPECT_DOUBLE_EQ(prior.score("x", "y", "p"), 0.0);
    EXPECT_TRUE(std::isfinite(prior.score("x", "y", "q")));
    EXPECT_LT(prior.score("x", "y", "q"), prior.score("x", "y", "p"));
    EXPECT_TRUE(std::isfinite(prior.score("u", "v", "p")));
}

TEST(FitPrior, ExtraPredicatesAppendedInNameOrder) {
    const FrequencyPrior prior =
        fit_prior({make_graph("a", {"x", "y"}, {{0, "zeta", 1}, {1, "alpha", 0}})}, 1.0, {"p"});
    EXPECT_EQ(prior.predicates(), (std::vector<std::string>{"p", "alpha", "zeta"}));
    EXPECT_THROW(FrequencyPrior(-1.0, {"p"}), std::invalid_argument);
}

TEST(FitPrior, MatchesGroupByOracle) {
    std::mt19937 rng(301);
    const std::vector<std::string> classes{"a", "b", "c"};
    const std::vector<std::string> preds{"p", "q", "r"};
    std::uniform_int_distribution<std::size_t> cls(0, 2), pr(0, 2);
    std::uniform_int_distribution<ObjectId> obj(0, 4);
    std::vector<SceneGraph> train;
    for (int i = 0; i < 40; ++i) {
        std::vector<std::string> names;
        for (int j = 0; j < 5; ++j) names.push_back(classes[cls(rng)]);
        std::vector<Triplet> t;
        for (int j = 0; j < 6; ++j) {
            const ObjectId s = obj(rng), o = obj(rng);
            if (s != o) t.push_back({s, preds[pr(rng)], o});
        }
        train.push_back(make_graph("g" + std::to_string(i), names, t));
    }
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> oracle;
    for (const auto& g : train) {
        for (const auto& e : g.triplets) {
            ++oracle[{g.objects[static_cast<std::size_t>(e.triplet.subject)].class_name, e.triplet.predicate,
                      g.objects[static_cast<std::size_t>(e.triplet.object)].class_name}];
        }
    }
    const FrequencyPrior prior = fit_prior(train, 1.0, preds);
    for (const auto& s : classes) {
        for (const auto& o : classes) {
            double mass = 0;
            for (const auto& p : preds) {
                auto it = oracle.find({s, p, o});
                EXPECT_EQ(prior.count(s, o, p), it == oracle.end() ? 0u : it->second);
                mass += std::exp(prior.score(s, o, p));
            }
            EXPECT_NEAR(mass, 1.0, 1e-12);
        }
    }
}

TEST(FitPrior, JsonRoundTrip) {
    const FrequencyPrior prior = fit_prior({make_graph("a", {"x", "y"}, {{0, "p", 1}, {1, "q", 0}})}, 0.5, {"p", "q"});
    const FrequencyPrior again = parse_prior(to_json(prior).dump());
    EXPECT_EQ(to_json(again), to_json(prior));
    EXPECT_DOUBLE_EQ(again.score("x", "y", "p"), prior.score("x", "y", "p"));
    EXPECT_THROW(parse_prior(R"({"smoothing": 1})"), FormatError);
}

TEST(ScoreImage, OneProposalPerOrderedPairAndPredicate) {
    const FrequencyPrior prior = fit_prior({}, 1.0, {"p", "q", "r"});
    const auto g = make_graph("a", {"x", "y", "z", "w"}, {});
    const auto scores = score_image(prior, g);
    EXPECT_EQ(scores.size(), 4u * 3u * 3u);
    std::set<Triplet> unique;
    for (const auto& s : scores) {
        EXPECT_NE(s.subject, s.object);
        unique.insert(s.triplet());
    }
    EXPECT_EQ(unique.size(), scores.size());
    EXPECT_TRUE(score_image(prior, make_graph("b", {"x"}, {})).empty());
}

TEST(ScoreImage, TopPredicateIsTheTrainingArgmax) {
    std::mt19937 rng(307);
    const std::vector<std::string> preds{"p", "q", "r", "s"};
    std::uniform_int_distribution<std::size_t> pr(0, 3);
    std::vector<SceneGraph> train;
    for (int i = 0; i < 30; ++i) {
        std::vector<Triplet> t;
        for (int j = 0; j < 3; ++j) t.push_back({0, preds[pr(rng)], 1});
        // Duplicates collapse in the triplet set; spread over extra objects.
        for (ObjectId j = 2; j < 5; ++j) t.push_back({0, preds[pr(rng)], j});
        train.push_back(make_graph("g" + std::to_string(i), {"m", "n", "n", "n", "n"}, t));
    }
    const FrequencyPrior prior = fit_prior(train, 1.0, preds);
    std::string argmax;
    std::size_t best = 0;
    for (const auto& p : preds) {
        if (prior.count("m", "n", p) > best) {
            best = prior.count("m", "n", p);
            argmax = p;
        }
    }
    const auto scores = score_image(prior, make_graph("t", {"m", "n"}, {}));
    const auto top = apply_graph_constraint(scores, 1);
    ASSERT_FALSE(top.empty());
    EXPECT_EQ(top.front().subject, 0);
    EXPECT_EQ(top.front().predicate, argmax);
}

TEST(ScoreImage, TrainAsTestRecallIsFullWithDominantPredicates) {
    // Every class pair has one dominant predicate, so the prior ranks each GT
    // triplet first on its pair.
    std::vector<SceneGraph> train;
    for (int i = 0; i < 12; ++i) {
        train.push_back(make_graph("g" + std::to_string(i), {"person", "chair", "cup", "table"},
                                   {{0, "sitting on", 1}, {0, "holding", 2}, {2, "on top of", 3}, {1, "next to", 3}}));
    }
    const FrequencyPrior prior = fit_prior(train, 1.0, {"sitting on", "holding", "on top of", "next to"});
    ScoresByImage proposals;
    for (const auto& g : train) proposals[g.image_id] = score_image(prior, g);
    const auto n = prior.predicates().size();
    const auto agg = dataset_recall_at_k(train, proposals, 100, n);
    ASSERT_TRUE(agg.value);
    EXPECT_DOUBLE_EQ(*agg.value, 1.0);
}

// ---------------------------------------------------------------------------
// Hinge loss

LossInput loss_input(std::vector<std::uint8_t> labels, std::vector<double> scores, std::size_t pairs,
                     std::size_t predicates) {
    return {std::move(labels), std::move(scores), pairs, predicates};
}

TEST(HingeLoss, WorkedExample) {
    EXPECT_DOUBLE_EQ(hinge_loss(loss_input({1, 0, 0, 0}, {2.0, 0.5, 0.0, 1.5}, 2, 2)), 0.125);
}

TEST(HingeLoss, ZeroWhenMarginSatisfied) {
    EXPECT_EQ(hinge_loss(loss_input({1, 0, 1, 0}, {3.0, 1.0, 2.0, -5.0}, 2, 2)), 0.0);
    EXPECT_EQ(hinge_loss(loss_input({0, 0}, {1.0, 2.0}, 1, 2)), 0.0);
    EXPECT_EQ(hinge_loss(loss_input({1, 1}, {1.0, 2.0}, 1, 2)), 0.0);
}

TEST(HingeLoss, LengthMismatch) {
    EXPECT_THROW(hinge_loss(loss_input({1, 0}, {1.0}, 1, 2)), std::invalid_argument);
    EXPECT_THROW(hinge_loss_gradient(loss_input({1, 0, 0}, {1.0, 2.0, 3.0}, 1, 2)), std::invalid_argument);
}

TEST(HingeLoss, NonNegativeZeroIffMarginAndTranslationInvariant) {
    std::mt19937 rng(311);
    std::bernoulli_distribution coin(0.3);
    std::uniform_int_distribution<int> grid(-12, 12);
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    for (int round = 0; round < 300; ++round) {
        const std::size_t N = dim(rng), n = dim(rng);
        LossInput in{{}, {}, N, n};
        for (std::size_t i = 0; i < N * n; ++i) {
            in.labels.push_back(coin(rng));
            in.scores.push_back(grid(rng) * 0.25);
        }
        const double loss = hinge_loss(in);
        EXPECT_GE(loss, 0.0);
        bool margin = true;
        for (std::size_t i = 0; i < in.labels.size(); ++i) {
            for (std::size_t j = 0; j < in.labels.size(); ++j) {
                if (!in.labels[i] && in.labels[j] && in.scores[j] - in.scores[i] < 1.0) margin = false;
            }
        }
        EXPECT_EQ(loss == 0.0, margin);
        LossInput shifted = in;
        for (auto& s : shifted.scores) s += 3.75;
        EXPECT_NEAR(hinge_loss(shifted), loss, 1e-12);
    }
}

TEST(HingeLoss, SubgradientMatchesFiniteDifferences) {
    std::mt19937 rng(313);
    std::normal_distribution<double> score(0.0, 2.0);
    std::bernoulli_distribution coin(0.4);
    const double h = 1e-6;
    int checked = 0;
    for (int round = 0; round < 200; ++round) {
        LossInput in{{}, {}, 3, 3};
        for (int i = 0; i < 9; ++i) {
            in.labels.push_back(coin(rng));
            in.scores.push_back(score(rng));
        }
        // Skip inputs where some margin term sits within the probe step of a kink.
        bool near_kink = false;
        for (std::size_t i = 0; i < 9; ++i) {
            for (std::size_t j = 0; j < 9; ++j) {
                if (!in.labels[i] && in.labels[j] && std::abs(1.0 - (in.scores[j] - in.scores[i])) < 1e-3) {
                    near_kink = true;
                }
            }
        }
        if (near_kink) continue;
        const auto grad = hinge_loss_gradient(in);
        for (std::size_t i = 0; i < 9; ++i) {
            LossInput up = in, down = in;
            up.scores[i] += h;
            down.scores[i] -= h;
            const double fd = (hinge_loss(up) - hinge_loss(down)) / (2 * h);
            EXPECT_NEAR(grad[i], fd, 1e-4);
        }
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

} // namespace
} // namespace ontosg
