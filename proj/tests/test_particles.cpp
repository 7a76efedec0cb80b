#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "tracer/errors.hpp"
#include "tracer/particles.hpp"

using namespace tracer;

namespace {

ParticleSet make_set(std::vector<double> weights, bool normalized = false) {
    ParticleSet set;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        set.hypotheses.push_back(Hypothesis{"h" + std::to_string(i), weights[i], std::nullopt});
    }
    set.normalized = normalized;
    return set;
}

std::vector<double> weights_of(const ParticleSet& set) {
    std::vector<double> out;
    for (const auto& h : set.hypotheses) out.push_back(h.weight);
    return out;
}

}  // namespace

TEST_CASE("normalize_weights divides by the total") {
    auto set = normalize_weights(make_set({0.90, 0.70, 0.20, 0.05}));
    auto w = weights_of(set);
    // hand-derived: raw scores over their sum 1.85
    CHECK(w[0] == doctest::Approx(0.4865).epsilon(1e-4));
    CHECK(w[1] == doctest::Approx(0.3784).epsilon(1e-4));
    CHECK(w[2] == doctest::Approx(0.1081).epsilon(1e-4));
    CHECK(w[3] == doctest::Approx(0.0270).epsilon(1e-4));
    CHECK(set.normalized);
    double sum = 0;
    for (double v : w) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("normalize_weights keeps an already-uniform set unchanged") {
    auto set = normalize_weights(make_set({0.25, 0.25, 0.25, 0.25}));
    for (double w : weights_of(set)) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("normalize_weights rejects an all-zero set") {
    CHECK_THROWS_AS(normalize_weights(make_set({0, 0, 0, 0})), AllZeroWeightsError);
}

TEST_CASE("normalize_weights is idempotent") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(0.0, 5.0);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> raw(4);
        for (auto& v : raw) v = dist(rng);
        raw[0] += 1e-3;  // keep the total positive
        auto once = normalize_weights(make_set(raw));
        auto twice = normalize_weights(once);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(twice.hypotheses[i].weight ==
                  doctest::Approx(once.hypotheses[i].weight).epsilon(1e-12));
        }
    }
}

TEST_CASE("effective_sample_size on reference weight vectors") {
    CHECK(effective_sample_size(make_set({0.25, 0.25, 0.25, 0.25}, true)) ==
          doctest::Approx(4.0));
    CHECK(effective_sample_size(make_set({1, 0, 0, 0}, true)) == doctest::Approx(1.0));
    // 1/(0.49 + 3*0.01) by hand
    CHECK(effective_sample_size(make_set({0.7, 0.1, 0.1, 0.1}, true)) ==
          doctest::Approx(1.923).epsilon(1e-3));
}

TEST_CASE("effective_sample_size requires the normalized flag") {
    CHECK_THROWS_AS(effective_sample_size(make_set({0.5, 0.5}, false)), NotNormalizedError);
}

TEST_CASE("ESS is permutation- and scale-invariant and bounded") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(0.01, 3.0);
    for (int round = 0; round < 100; ++round) {
        std::vector<double> raw(4);
        for (auto& v : raw) v = dist(rng);
        auto normalized = normalize_weights(make_set(raw));
        const double ess = effective_sample_size(normalized);
        CHECK(ess >= 1.0 - 1e-12);
        CHECK(ess <= 4.0 + 1e-12);

        auto shuffled = raw;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(effective_sample_size(normalize_weights(make_set(shuffled))) ==
              doctest::Approx(ess).epsilon(1e-9));

        auto scaled = raw;
        for (auto& v : scaled) v *= 7.5;
        CHECK(effective_sample_size(normalize_weights(make_set(scaled))) ==
              doctest::Approx(ess).epsilon(1e-9));
    }
}

TEST_CASE("resample duplicates a point mass") {
    std::mt19937_64 rng(3);
    auto out = resample(make_set({1, 0, 0, 0}, true), rng);
    REQUIRE(out.hypotheses.size() == 4);
    for (const auto& h : out.hypotheses) {
        CHECK(h.text == "h0");
        CHECK(h.weight == doctest::Approx(0.25));
    }
    CHECK(out.normalized);
}

TEST_CASE("resample is reproducible under a fixed seed") {
    auto set = normalize_weights(make_set({0.4, 0.3, 0.2, 0.1}));
    std::mt19937_64 rng_a(42);
    std::mt19937_64 rng_b(42);
    auto a = resample(set, rng_a);
    auto b = resample(set, rng_b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.hypotheses[i].text == b.hypotheses[i].text);
}

TEST_CASE("resample output texts are a sub-multiset of the input") {
    std::mt19937_64 rng(5);
    auto set = normalize_weights(make_set({0.5, 0.3, 0.15, 0.05}));
    for (int round = 0; round < 200; ++round) {
        auto out = resample(set, rng);
        for (const auto& h : out.hypotheses) {
            bool found = false;
            for (const auto& in : set.hypotheses) found = found || in.text == h.text;
            CHECK(found);
        }
    }
}

TEST_CASE("resample draw frequencies follow the weights") {
    auto set = make_set({0.7, 0.1, 0.1, 0.1}, true);
    std::mt19937_64 rng(123);
    std::map<std::string, long> counts;
    const int rounds = 10000;
    for (int round = 0; round < rounds; ++round) {
        auto out = resample(set, rng);
        for (const auto& h : out.hypotheses) counts[h.text] += 1;
    }
    const double total = 4.0 * rounds;
    CHECK(static_cast<double>(counts["h0"]) / total == doctest::Approx(0.7).epsilon(0.02 / 0.7));

    // chi-square over the four categories, df=3: 16.266 is the p=0.001 cut
    double chi2 = 0.0;
    const double expected[] = {0.7, 0.1, 0.1, 0.1};
    for (int i = 0; i < 4; ++i) {
        const double e = expected[i] * total;
        const double o = static_cast<double>(counts["h" + std::to_string(i)]);
        chi2 += (o - e) * (o - e) / e;
    }
    CHECK(chi2 < 16.266);
}

TEST_CASE("jaccard reference values") {
    CHECK(jaccard("the box is empty", "the box is empty") == doctest::Approx(1.0));
    CHECK(jaccard("alpha beta", "gamma delta") == doctest::Approx(0.0));
    // |∩|=2 {the, box}, |∪|=6
    CHECK(jaccard("the box is empty", "the box holds keys") == doctest::Approx(0.3333).epsilon(1e-4));
    CHECK(jaccard("", "") == doctest::Approx(1.0));
    CHECK(jaccard("", "word") == doctest::Approx(0.0));
}

TEST_CASE("jaccard is symmetric, reflexive, and bounded") {
    std::mt19937_64 rng(29);
    const std::vector<std::string> vocabulary = {"red", "blue", "box", "key", "door",
                                                 "open", "shut", "the", "a", "cat"};
    std::uniform_int_distribution<std::size_t> pick(0, vocabulary.size() - 1);
    std::uniform_int_distribution<int> length(1, 8);
    auto random_text = [&]() {
        std::string text;
        const int n = length(rng);
        for (int i = 0; i < n; ++i) {
            if (!text.empty()) text += " ";
            text += vocabulary[pick(rng)];
        }
        return text;
    };
    for (int round = 0; round < 200; ++round) {
        const std::string a = random_text();
        const std::string b = random_text();
        const double ab = jaccard(a, b);
        CHECK(ab == doctest::Approx(jaccard(b, a)));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(jaccard(a, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("similarity_report over reference sets") {
    auto identical = make_set({0.25, 0.25, 0.25, 0.25}, true);
    for (auto& h : identical.hypotheses) h.text = "same words here";
    auto report = similarity_report(identical);
    CHECK(report.pair_values.size() == 6);
    CHECK(report.mean_pairwise == doctest::Approx(1.0));

    ParticleSet disjoint;
    disjoint.hypotheses = {
        {"alpha beta", 0.25, {}}, {"gamma delta", 0.25, {}},
        {"epsilon zeta", 0.25, {}}, {"eta theta", 0.25, {}}};
    CHECK(similarity_report(disjoint).mean_pairwise == doctest::Approx(0.0));

    // pairs {1.0, 1/3, 1/3, 1/3, 1/3, 1/3}: mean 4/9, hand-averaged
    ParticleSet mixed;
    mixed.hypotheses = {{"a b", 0.25, {}}, {"a b", 0.25, {}}, {"a c", 0.25, {}},
                        {"a d", 0.25, {}}};
    CHECK(similarity_report(mixed).mean_pairwise == doctest::Approx(0.4444).epsilon(1e-3));
}

TEST_CASE("needs_rejuvenation uses a strict inequality") {
    CHECK(needs_rejuvenation(SimilarityReport{1.0, {1.0}}, 0.25));
    CHECK_FALSE(needs_rejuvenation(SimilarityReport{0.0, {0.0}}, 0.25));
    CHECK_FALSE(needs_rejuvenation(SimilarityReport{0.25, {0.25}}, 0.25));

    // exact 0.25 built from real texts: |∩|=2, |∪|=8
    ParticleSet boundary;
    boundary.hypotheses = {{"a b c d e", 0.5, {}}, {"a b f g h", 0.5, {}}};
    auto report = similarity_report(boundary);
    CHECK(report.mean_pairwise == doctest::Approx(0.25));
    CHECK_FALSE(needs_rejuvenation(report, 0.25));
}
