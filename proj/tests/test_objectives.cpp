#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ckbert/errors.hpp"
#include "ckbert/gradcheck.hpp"
#include "ckbert/objectives.hpp"

using namespace ckbert;

namespace {

std::vector<double> vec(std::initializer_list<double> v) { return v; }

double cmrm(const std::vector<double>& e, const std::vector<double>& pos, const std::vector<std::vector<double>>& negs,
            double tau = 0.5, bool include = false) {
    return cmrm_loss<double>(e, pos, negs, tau, include);
}

// Straight-line re-evaluation, written independently of the library.
double reference_cmrm(const std::vector<double>& e, const std::vector<double>& pos,
                      const std::vector<std::vector<double>>& negs, double tau, bool include) {
    auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            ab += a[i] * b[i];
            aa += a[i] * a[i];
            bb += b[i] * b[i];
        }
        return ab / (std::sqrt(aa) * std::sqrt(bb));
    };
    double denom = 0;
    for (const auto& n : negs) denom += std::exp(cos(e, n) / tau);
    if (include) denom += std::exp(cos(e, pos) / tau);
    return -std::log(std::exp(cos(e, pos) / tau) / denom);
}

}  // namespace

TEST_CASE("lmlm loss values") {
    SUBCASE("confident and correct") {
        Tensor<double> logits(2, 4, 0.0);
        logits(0, 1) = 1000.0;
        logits(1, 3) = 1000.0;
        const std::vector<TokenId> labels = {1, 3};
        CHECK(lmlm_loss<double>(logits, labels) == doctest::Approx(0.0));
    }
    SUBCASE("uniform, V = 10") {
        Tensor<double> logits(3, 10, 0.7);
        const std::vector<TokenId> labels = {0, 4, 9};
        CHECK(lmlm_loss<double>(logits, labels) == doctest::Approx(2.302585092994046).epsilon(1e-12));
    }
    SUBCASE("K = 2, V = 3 hand logits") {
        Tensor<double> logits(2, 3);
        const double v[] = {1, 2, 3, 1, 0, -1};
        for (int i = 0; i < 6; ++i) logits[i] = v[i];
        const std::vector<TokenId> labels = {2, 1};
        // (0.407606 + 1.407606) / 2
        CHECK(lmlm_loss<double>(logits, labels) == doctest::Approx(0.907606).epsilon(1e-6));
    }
    SUBCASE("K = 0 is a contract violation") {
        Tensor<double> logits(0, 3);
        CHECK_THROWS_AS(lmlm_loss<double>(logits, std::vector<TokenId>{}), ContractViolation);
    }
}

TEST_CASE("lmlm gradient is (softmax - onehot) / K") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    Tensor<double> logits(3, 5);
    for (auto& x : logits.values()) x = nd(gen);
    const std::vector<TokenId> labels = {4, 0, 2};
    Tensor<double> d(3, 5);
    lmlm_loss<double>(logits, labels, &d);
    for (std::size_t i = 0; i < 3; ++i) {
        double z = 0;
        for (std::size_t j = 0; j < 5; ++j) z += std::exp(logits(i, j));
        for (std::size_t j = 0; j < 5; ++j) {
            const double expected = (std::exp(logits(i, j)) / z - (static_cast<TokenId>(j) == labels[i])) / 3.0;
            CHECK(d(i, j) == doctest::Approx(expected).epsilon(1e-12));
            // and against central differences
            Tensor<double> up = logits, down = logits;
            up(i, j) += 1e-5;
            down(i, j) -= 1e-5;
            const double fd = (lmlm_loss<double>(up, labels) - lmlm_loss<double>(down, labels)) / 2e-5;
            CHECK(d(i, j) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("cosine") {
    const auto a = vec({0.3, -1.2, 2.0});
    CHECK(cosine<double>(a, a).value == doctest::Approx(1.0));
    CHECK(cosine<double>(vec({1, 0}), vec({0, 1})).value == doctest::Approx(0.0));
    CHECK(cosine<double>(vec({1, 0}), vec({1, 1})).value == doctest::Approx(0.7071067811865476).epsilon(1e-12));
    const auto z = cosine<double>(vec({0, 0}), vec({1, 1}));
    CHECK(z.clamped);
    CHECK(z.value == 0.0);
    CHECK_FALSE(cosine<double>(a, a).clamped);
}

TEST_CASE("cosine gradient") {
    const auto a = vec({0.3, -1.2, 2.0, 0.5});
    const auto b = vec({-0.7, 0.4, 1.1, 0.9});
    std::vector<double> da(4, 0.0), db(4, 0.0);
    cosine_backward<double>(a, b, 1.0, da, db);
    for (std::size_t i = 0; i < 4; ++i) {
        auto up = a, down = a;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double fd = (cosine<double>(up, b).value - cosine<double>(down, b).value) / 2e-6;
        CHECK(da[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("cmrm loss analytic values") {
    const std::vector<double> c_negs = {0.3, 0.3, 0.3};
    CHECK(cmrm_loss_from_cosines<double>(0.3, c_negs, 0.5, false) ==
          doctest::Approx(1.0986122886681098).epsilon(1e-12));
    const std::vector<double> minus = {-1, -1, -1};
    CHECK(cmrm_loss_from_cosines<double>(1.0, minus, 0.5, false) ==
          doctest::Approx(-4.0 + std::log(3.0)).epsilon(1e-12));
    CHECK(cmrm_loss_from_cosines<double>(1.0, minus, 0.5, false) == doctest::Approx(-2.901388).epsilon(1e-6));
    CHECK_THROWS_AS(cmrm_loss_from_cosines<double>(1.0, minus, 0.0, false), ConfigError);
    CHECK_THROWS_AS(cmrm_loss_from_cosines<double>(1.0, std::vector<double>{}, 0.5, false), ContractViolation);
}

TEST_CASE("cmrm loss matches a straight-line re-evaluation") {
    std::mt19937_64 gen(12);
    std::normal_distribution<double> nd;
    auto rnd = [&] { return std::vector<double>{nd(gen), nd(gen), nd(gen), nd(gen)}; };
    for (int trial = 0; trial < 50; ++trial) {
        const auto e = rnd(), p = rnd();
        const std::vector<std::vector<double>> negs = {rnd(), rnd(), rnd()};
        for (bool include : {false, true}) {
            CHECK(cmrm(e, p, negs, 0.5, include) ==
                  doctest::Approx(reference_cmrm(e, p, negs, 0.5, include)).epsilon(1e-12));
        }
    }
}

TEST_CASE("cmrm loss properties") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    auto rnd = [&] { return std::vector<double>{nd(gen), nd(gen), nd(gen), nd(gen), nd(gen)}; };
    for (int trial = 0; trial < 100; ++trial) {
        auto e = rnd(), p = rnd();
        const std::vector<std::vector<double>> negs = {rnd(), rnd(), rnd()};
        const double base = cmrm(e, p, negs);
        // scale invariance
        auto scaled = e;
        for (auto& x : scaled) x *= 3.7;
        CHECK(cmrm(scaled, p, negs) == doctest::Approx(base).epsilon(1e-6));
        // bounds
        CHECK(base >= -2.0 / 0.5 + std::log(3.0) - 1e-12);
        CHECK(cmrm(e, p, negs, 0.5, true) >= 0.0);
    }
    // monotone in the positive cosine
    const std::vector<double> negs = {0.1, -0.2, 0.4};
    double prev = std::numeric_limits<double>::infinity();
    for (double c = -1.0; c <= 1.0; c += 0.1) {
        const double l = cmrm_loss_from_cosines<double>(c, negs, 0.5, false);
        CHECK(l < prev);
        prev = l;
    }
}

TEST_CASE("total loss") {
    CHECK(total_loss(0.0, 0.0) == 0.0);
    CHECK(total_loss(2.302585, 1.098612) == doctest::Approx(3.401197).epsilon(1e-9));
    CHECK(total_loss(1.5, 0.0) == 1.5);
    CHECK_THROWS_AS(total_loss(std::nan(""), 0.0), NumericError);
    CHECK_THROWS_AS(total_loss(1.0, std::numeric_limits<double>::infinity()), NumericError);
}

TEST_CASE("instance loss: composition and gradient additivity") {
    const auto probe = make_grad_probe(11);
    const auto& p = probe.params;
    LossOptions opts;
    auto g_mlm = Parameters<double>::zeros(p.config);
    auto g_cl = Parameters<double>::zeros(p.config);
    auto g_tot = Parameters<double>::zeros(p.config);
    const auto r_mlm = instance_loss<double>(p, probe.instance, opts, &g_mlm, 1.0, 0.0);
    instance_loss<double>(p, probe.instance, opts, &g_cl, 0.0, 1.0);
    const auto r = instance_loss<double>(p, probe.instance, opts, &g_tot, 1.0, 1.0);
    CHECK(r.cmrm_active);
    CHECK(r.negatives == 3);
    CHECK(r.l_total == r.l_mlm + r.l_cl);
    CHECK(r_mlm.l_mlm == r.l_mlm);

    std::vector<const Tensor<double>*> a, b;
    g_mlm.for_each([&](const std::string&, const Tensor<double>& t) { a.push_back(&t); });
    g_cl.for_each([&](const std::string&, const Tensor<double>& t) { b.push_back(&t); });
    std::size_t k = 0;
    double worst = 0;
    g_tot.for_each([&](const std::string&, const Tensor<double>& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            worst = std::max(worst, std::abs(t[i] - ((*a[k])[i] + (*b[k])[i])));
        }
        ++k;
    });
    CHECK(worst < 1e-12);

    // inactive instance: total = l_mlm
    auto inst = probe.instance;
    inst.cmrm_active = false;
    inst.positive_ids.clear();
    inst.negative_ids.clear();
    const auto lone = instance_loss<double>(p, inst, opts);
    CHECK(lone.l_cl == 0.0);
    CHECK(lone.l_total == lone.l_mlm);
    CHECK(lone.l_mlm == doctest::Approx(r.l_mlm).epsilon(1e-12));
}

TEST_CASE("instance loss near ln V at initialization") {
    auto probe = make_grad_probe(3);
    const auto p = Parameters<double>::init(probe.params.config, 99);
    const auto r = instance_loss<double>(p, probe.instance, LossOptions{});
    const double lnv = std::log(static_cast<double>(p.config.vocab_size));
    CHECK(std::abs(r.l_mlm - lnv) / lnv < 0.1);
}
