#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "cegate/backbone.hpp"
#include "cegate/fisher.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cegate;

namespace {

const ModuleId kIdA{0, ModuleKind::Spatial};
const ModuleId kIdB{1, ModuleKind::Semantic};

FisherAccumulator single_param_acc(const Tensor& w) {
    FisherAccumulator acc;
    acc.reset({{kIdA, ParamList{{"w", w}}}});
    return acc;
}

}  // namespace

TEST_CASE("closed-form single-parameter Fisher: gradient 4 -> F 16") {
    Tensor w = Tensor::scalar(1.0, true);
    FisherAccumulator acc = single_param_acc(w);

    // loss = 0.5 * (w*x - y)^2 with x=2, y=0
    std::vector<std::function<Tensor()>> losses{[&] {
        Tensor diff = scale(w, 2.0);
        return scale(mul(diff, diff), 0.5);
    }};
    accumulate_fisher(losses, {{"w", w}}, acc);
    CHECK(acc.samples_seen() == 1);
    CHECK(acc.fisher(kIdA)[0][0] == 16.0);
    CHECK((!w.has_grad() || w.grad()[0] == 0.0));  // grads zeroed after each sample
}

TEST_CASE("disconnected parameter accumulates zero Fisher") {
    Tensor w = Tensor::scalar(1.0, true);
    Tensor orphan = Tensor::scalar(3.0, true);
    FisherAccumulator acc;
    acc.reset({{kIdA, ParamList{{"w", w}}}, {kIdB, ParamList{{"orphan", orphan}}}});
    std::vector<std::function<Tensor()>> losses{[&] { return mul(w, w); }};
    accumulate_fisher(losses, {{"w", w}, {"orphan", orphan}}, acc);
    CHECK(acc.fisher(kIdB)[0][0] == 0.0);
    CHECK(acc.fisher(kIdA)[0][0] == 4.0);
}

TEST_CASE("identical samples average to the single-sample value") {
    Tensor w = Tensor::scalar(1.0, true);
    auto make_loss = [&]() -> Tensor {
        Tensor diff = scale(w, 2.0);
        return scale(mul(diff, diff), 0.5);
    };
    FisherAccumulator acc1 = single_param_acc(w);
    std::vector<std::function<Tensor()>> one{make_loss};
    accumulate_fisher(one, {{"w", w}}, acc1);

    FisherAccumulator acc2 = single_param_acc(w);
    std::vector<std::function<Tensor()>> two{make_loss, make_loss};
    accumulate_fisher(two, {{"w", w}}, acc2);

    CHECK(acc1.fisher(kIdA)[0][0] == acc2.fisher(kIdA)[0][0]);
}

TEST_CASE("empty sample set is rejected") {
    Tensor w = Tensor::scalar(1.0, true);
    FisherAccumulator acc = single_param_acc(w);
    std::vector<std::function<Tensor()>> none;
    CHECK_THROWS_AS(accumulate_fisher(none, {}, acc), std::invalid_argument);
}

TEST_CASE("aggregate sums per-parameter Fisher values") {
    Tensor w({2}, {0.0, 0.0}, true);
    FisherAccumulator acc;
    acc.reset({{kIdA, ParamList{{"w", w}}}});
    // loss = c . w gives gradient c; choose c so squared grads are {1.0, 2.5}
    Tensor c({2}, {1.0, std::sqrt(2.5)});
    std::vector<std::function<Tensor()>> losses{[&] { return sum(mul(w, c)); }};
    accumulate_fisher(losses, {{"w", w}}, acc);
    auto raw = aggregate_module_scores(acc);
    CHECK(raw[kIdA] == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("two-module net matches brute-force scalar oracle") {
    // linear softmax model: logits = x . W, CE loss; analytic per-sample
    // gradient dW = x^T (softmax - onehot)
    Rng rng(3);
    Tensor w = oracle::random_tensor({4, 3}, rng, -1, 1, true);
    Tensor u = oracle::random_tensor({4}, rng, -1, 1, true);
    FisherAccumulator acc;
    acc.reset({{kIdA, ParamList{{"w", w}}}, {kIdB, ParamList{{"u", u}}}});

    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    for (int s = 0; s < 5; ++s) {
        std::vector<double> x(4);
        for (auto& v : x) v = rng.uniform(-1, 1);
        inputs.push_back(x);
        labels.push_back(s % 3);
    }

    std::vector<std::function<Tensor()>> losses;
    for (int s = 0; s < 5; ++s)
        losses.push_back([&, s]() -> Tensor {
            Tensor x({1, 4}, inputs[s]);
            Tensor ce = cross_entropy(matmul(x, w), {labels[s]});
            // second module enters through a linear term with gradient x
            Tensor extra = sum(mul(u, Tensor({4}, inputs[s])));
            return add(ce, extra);
        });
    accumulate_fisher(losses, {{"w", w}, {"u", u}}, acc);

    // oracle: per-sample analytic gradients, squared, averaged, summed
    std::vector<double> fw(12, 0.0), fu(4, 0.0);
    for (int s = 0; s < 5; ++s) {
        std::vector<double> logits(3, 0.0);
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 4; ++i)
                logits[j] += inputs[s][i] * w.data()[i * 3 + j];
        auto p = oracle::softmax(logits);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j) {
                double g = inputs[s][i] * (p[j] - (j == labels[s] ? 1.0 : 0.0));
                fw[i * 3 + j] += g * g;
            }
        for (int i = 0; i < 4; ++i) fu[i] += inputs[s][i] * inputs[s][i];
    }
    for (auto& v : fw) v /= 5.0;
    for (auto& v : fu) v /= 5.0;

    auto got_w = acc.fisher(kIdA)[0];
    auto got_u = acc.fisher(kIdB)[0];
    for (int i = 0; i < 12; ++i) CHECK(std::abs(got_w[i] - fw[i]) < 1e-12);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(got_u[i] - fu[i]) < 1e-12);

    auto raw = aggregate_module_scores(acc);
    double sum_w = 0.0, sum_u = 0.0;
    for (double v : fw) sum_w += v;
    for (double v : fu) sum_u += v;
    CHECK(std::abs(raw[kIdA] - sum_w) < 1e-12);
    CHECK(std::abs(raw[kIdB] - sum_u) < 1e-12);
}

TEST_CASE("normalize_scores per kind") {
    std::map<ModuleId, double> raw{{{0, ModuleKind::Spatial}, 2.0},
                                   {{1, ModuleKind::Spatial}, 3.0},
                                   {{2, ModuleKind::Spatial}, 5.0},
                                   {{0, ModuleKind::Semantic}, 4.0}};
    auto norm = normalize_scores(raw);
    CHECK(norm[{0, ModuleKind::Spatial}] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(norm[{1, ModuleKind::Spatial}] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(norm[{2, ModuleKind::Spatial}] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(norm[{0, ModuleKind::Semantic}] == 1.0);  // single-layer kind

    // scaling one kind's raws leaves its normalized scores unchanged
    for (auto& [id, v] : raw)
        if (id.kind == ModuleKind::Spatial) v *= 7.0;
    auto norm2 = normalize_scores(raw);
    for (const auto& [id, v] : norm) CHECK(norm2[id] == doctest::Approx(v).epsilon(1e-15));

    // zero-mass kind normalizes to zero
    std::map<ModuleId, double> dead{{{0, ModuleKind::Frequency}, 0.0},
                                    {{1, ModuleKind::Frequency}, 0.0}};
    for (const auto& [id, v] : normalize_scores(dead)) {
        (void)id;
        CHECK(v == 0.0);
    }
}

TEST_CASE("select_top_k ordering, ties, clamping") {
    std::map<ModuleId, double> scores{{{0, ModuleKind::Spatial}, 0.9},
                                      {{1, ModuleKind::Semantic}, 0.5},
                                      {{2, ModuleKind::Frequency}, 0.1}};
    auto top2 = select_top_k(scores, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0] == ModuleId{0, ModuleKind::Spatial});
    CHECK(top2[1] == ModuleId{1, ModuleKind::Semantic});

    // all-equal scores, I=2: deterministic tie order (layer asc, kind order)
    std::map<ModuleId, double> equal;
    for (std::size_t i = 0; i < 2; ++i)
        for (ModuleKind k : kAllKinds) equal[{i, k}] = 0.25;
    auto top3 = select_top_k(equal, 3);
    REQUIRE(top3.size() == 3);
    CHECK(top3[0] == ModuleId{0, ModuleKind::Spatial});
    CHECK(top3[1] == ModuleId{0, ModuleKind::Semantic});
    CHECK(top3[2] == ModuleId{0, ModuleKind::Frequency});

    // random table matches a full-sort oracle
    Rng rng(5);
    std::map<ModuleId, double> table;
    for (std::size_t i = 0; i < 4; ++i)
        for (ModuleKind k : kAllKinds) table[{i, k}] = rng.uniform(0.01, 1.0);
    auto top5 = select_top_k(table, 5);
    std::vector<std::pair<double, ModuleId>> sorted;
    for (const auto& [id, v] : table) sorted.emplace_back(v, id);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    REQUIRE(top5.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(top5[i] == sorted[i].second);

    // k beyond module count clamps (with a warning) instead of failing
    CHECK(select_top_k(scores, 99).size() == 3);
    // zero-score modules are never selected
    std::map<ModuleId, double> with_dead = scores;
    with_dead[{3, ModuleKind::Spatial}] = 0.0;
    CHECK(select_top_k(with_dead, 99).size() == 3);
}

TEST_CASE("kl_categorical") {
    std::vector<double> p{0.3, 0.7}, q{0.4, 0.6};
    CHECK(kl_categorical(p, p) == 0.0);
    std::vector<double> onehot{1.0, 0.0}, uniform{0.5, 0.5};
    CHECK(kl_categorical(onehot, uniform) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    double ref = 0.3 * std::log(0.3 / 0.4) + 0.7 * std::log(0.7 / 0.6);
    CHECK(std::abs(kl_categorical(p, q) - ref) < 1e-12);
    std::vector<double> bad{0.0, 1.0};
    CHECK_THROWS_AS(kl_categorical(p, bad), std::domain_error);
}

TEST_CASE("loss rescaling scales raw scores by c^2 and preserves selection") {
    Rng rng(6);
    Tensor w = oracle::random_tensor({3, 2}, rng, -1, 1, true);
    Tensor u = oracle::random_tensor({3}, rng, -1, 1, true);
    auto run = [&](double c) {
        FisherAccumulator acc;
        acc.reset({{kIdA, ParamList{{"w", w}}}, {kIdB, ParamList{{"u", u}}}});
        std::vector<std::function<Tensor()>> losses;
        for (int s = 0; s < 3; ++s)
            losses.push_back([&, s, c]() -> Tensor {
                Tensor x({1, 3}, {0.5 + s, -0.3, 0.8 * s});
                Tensor base = add(cross_entropy(matmul(x, w), {s % 2}),
                                  sum(mul(u, Tensor({3}, {1.0, 2.0, 3.0}))));
                return scale(base, c);
            });
        accumulate_fisher(losses, {{"w", w}, {"u", u}}, acc);
        return aggregate_module_scores(acc);
    };
    auto raw1 = run(1.0);
    auto raw10 = run(10.0);
    for (const auto& [id, v] : raw1)
        CHECK(raw10[id] == doctest::Approx(100.0 * v).epsilon(1e-10));
    auto n1 = normalize_scores(raw1), n10 = normalize_scores(raw10);
    for (const auto& [id, v] : n1) CHECK(n10[id] == doctest::Approx(v).epsilon(1e-12));
    CHECK(select_top_k(n1, 1) == select_top_k(n10, 1));
}

TEST_CASE("gating_step selects top-k, gates gradients, and is deterministic") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        BackboneConfig cfg;
        cfg.image_size = 8;
        cfg.channels = 1;
        cfg.patch_size = 2;
        cfg.depth = 2;
        cfg.dim = 8;
        cfg.heads = 2;
        cfg.mlp_ratio = 2;
        cfg.num_classes = 3;
        Backbone bb = Backbone::init(cfg, rng);
        bb.freeze();
        ToolboxDims dims;
        dims.spatial_rank = 2;
        dims.semantic_dim = 2;
        dims.frequency_dim = 2;
        Toolbox tb = Toolbox::attach(cfg.depth, cfg.dim, cfg.tokens(), dims,
                                     {ModuleKind::Spatial, ModuleKind::Semantic,
                                      ModuleKind::Frequency},
                                     rng);
        // leave the init point so every module carries gradient signal
        for (const auto& np : tb.all_params()) {
            Tensor t = np.tensor;
            for (auto& v : t.data()) v += 0.05 * rng.gaussian();
        }
        GateConfig gate;
        gate.top_k = 3;
        gate.accumulation_steps = 4;
        gate.selection_count = 1;
        gate.total_iterations = 10;

        Rng data_rng(seed + 1);
        auto draw = [&]() -> std::function<Tensor()> {
            auto img = std::make_shared<std::vector<double>>(64);
            for (auto& v : *img) v = data_rng.uniform();
            std::vector<int> labels(cfg.tokens(), static_cast<int>(data_rng.below(3)));
            return [&bb, &tb, img, labels]() -> Tensor {
                return cross_entropy(bb.encode(*img, &tb).logits, labels);
            };
        };
        FisherAccumulator acc;
        ImportanceTable table = gating_step(tb, draw, gate, acc, bb.head_params());
        return std::make_tuple(table.selected, table.normalized, tb.active());
    };

    auto [sel1, norm1, active1] = run(42);
    auto [sel2, norm2, active2] = run(42);
    CHECK(sel1 == sel2);
    CHECK(norm1 == norm2);
    REQUIRE(sel1.size() == 3);
    CHECK(active1 == std::set<ModuleId>(sel1.begin(), sel1.end()));

    // per-kind normalized sums are 1 for kinds with mass
    std::map<ModuleKind, double> kind_sum;
    for (const auto& [id, v] : norm1) kind_sum[id.kind] += v;
    for (const auto& [k, s] : kind_sum) {
        (void)k;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    // non-negativity of raw scores
    for (const auto& [id, v] : norm1) {
        (void)id;
        CHECK(v >= 0.0);
    }
}

TEST_CASE("KL curvature is proportional to the empirical diagonal Fisher") {
    // softmax toy model: logits = x . W over two fixed inputs; labels are
    // drawn from the model's own distribution so the empirical Fisher
    // estimates the true one
    Rng rng(7);
    Tensor w = oracle::random_tensor({4, 3}, rng, -1.0, 1.0, true);
    std::vector<std::vector<double>> inputs{{2.0, 0.5, -1.0, 0.1},
                                            {-0.4, 1.5, 0.3, -2.0}};

    auto probs_for = [&](const std::vector<double>& wvals,
                         const std::vector<double>& x) {
        std::vector<double> logits(3, 0.0);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j) logits[j] += x[i] * wvals[i * 3 + j];
        return oracle::softmax(logits);
    };

    // empirical diagonal Fisher via the accumulator
    FisherAccumulator acc;
    acc.reset({{kIdA, ParamList{{"w", w}}}});
    Rng label_rng(99);
    const int samples = 20000;
    std::vector<std::function<Tensor()>> losses;
    losses.reserve(samples);
    for (int s = 0; s < samples; ++s) {
        const auto& x = inputs[s % 2];
        auto p = probs_for(w.data(), x);
        double u = label_rng.uniform();
        int y = (u < p[0]) ? 0 : (u < p[0] + p[1] ? 1 : 2);
        losses.push_back([&w, x, y]() -> Tensor {
            Tensor xt({1, 4}, x);
            return cross_entropy(matmul(xt, w), {y});
        });
    }
    accumulate_fisher(losses, {{"w", w}}, acc);
    auto fisher = acc.fisher(kIdA)[0];

    // KL curvature per parameter, averaged over inputs
    const double delta = 1e-3;
    std::vector<double> ratio(12);
    for (int j = 0; j < 12; ++j) {
        auto perturbed = w.data();
        perturbed[j] += delta;
        double kl = 0.0;
        for (const auto& x : inputs) {
            auto p = probs_for(w.data(), x);
            auto q = probs_for(perturbed, x);
            kl += kl_categorical(p, q);
        }
        ratio[j] = (kl / inputs.size()) / (delta * delta);
    }

    // Pearson correlation over the 12 parameters
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / v.size();
    };
    double mf = mean(fisher), mr = mean(ratio);
    double num = 0.0, df = 0.0, dr = 0.0;
    for (int j = 0; j < 12; ++j) {
        num += (fisher[j] - mf) * (ratio[j] - mr);
        df += (fisher[j] - mf) * (fisher[j] - mf);
        dr += (ratio[j] - mr) * (ratio[j] - mr);
    }
    double pearson = num / std::sqrt(df * dr);
    CHECK(pearson > 0.99);
}
