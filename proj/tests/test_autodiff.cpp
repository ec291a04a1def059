#include <gtest/gtest.h>

#include "op_gradients.hpp"

using namespace vistra;

TEST(Tape, SumGradientIsOnes) {
    auto x = gradcheck::random_tensor({3, 4}, *[] {
        static Rng rng(1);
        return &rng;
    }());
    x.set_requires_grad(true);
    Tape<double> tape;
    {
        TapeScope<double> scope(tape);
        auto loss = sum_all(x);
        tape.backward(loss);
    }
    for (auto g : *x.grad) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Tape, CrossEntropyGradMatchesSoftmaxMinusOnehot) {
    Rng rng(2);
    auto logits = gradcheck::random_tensor({1, 4}, rng, -2, 2);
    logits.set_requires_grad(true);
    Tape<double> tape;
    {
        TapeScope<double> scope(tape);
        auto loss = softmax_cross_entropy(logits, {2});
        tape.backward(loss);
    }
    auto sm = softmax(logits, -1);
    for (int j = 0; j < 4; ++j) {
        double expect = (*sm.data)[size_t(j)] - (j == 2 ? 1.0 : 0.0);
        EXPECT_NEAR((*logits.grad)[size_t(j)], expect, 1e-12);
    }
}

TEST(Tape, SecondBackwardWithoutReforwardFails) {
    Rng rng(3);
    auto x = gradcheck::random_tensor({3}, rng);
    x.set_requires_grad(true);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    auto loss = sum_all(x);
    tape.backward(loss);
    EXPECT_THROW(tape.backward(loss), Error);
}

TEST(Tape, NonScalarLossAndDetachedGraphFail) {
    Rng rng(4);
    auto x = gradcheck::random_tensor({3}, rng);
    x.set_requires_grad(true);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    auto y = scale(x, 2.0);
    EXPECT_THROW(tape.backward(y), ShapeError);  // non-scalar
    auto detached = Tensor<double>::scalar(1.0);
    EXPECT_THROW(tape.backward(detached), Error);  // no recorded graph
}

TEST(Tape, NoRequiresGradLeavesProducesNoGradients) {
    Rng rng(5);
    auto x = gradcheck::random_tensor({3}, rng);  // requires_grad = false
    Tape<double> tape;
    TapeScope<double> scope(tape);
    auto y = scale(x, 2.0);
    EXPECT_EQ(y.node, -1);       // nothing recorded
    EXPECT_EQ(tape.size(), 0u);  // graph stayed empty
}

TEST(Tape, GradAccumulatesAcrossBackwards) {
    Rng rng(6);
    auto x = gradcheck::random_tensor({2}, rng);
    x.set_requires_grad(true);
    for (int it = 0; it < 2; ++it) {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        auto loss = sum_all(x);
        tape.backward(loss);
    }
    for (auto g : *x.grad) EXPECT_DOUBLE_EQ(g, 2.0);
}

TEST(Tape, ReusedParameterAccumulatesBothPaths) {
    Rng rng(7);
    auto w = gradcheck::random_tensor({2, 2}, rng);
    auto x = gradcheck::random_tensor({2, 2}, rng);
    w.set_requires_grad(true);
    {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        auto y = add(matmul(x, w), matmul(w, x));  // w used twice
        tape.backward(sum_all(y));
    }
    w.requires_grad = false;
    // finite-difference the combined expression
    auto eval = [&] {
        double s = 0;
        auto a = matmul(x, w);
        auto b = matmul(w, x);
        for (int64_t i = 0; i < 4; ++i) s += (*a.data)[size_t(i)] + (*b.data)[size_t(i)];
        return s;
    };
    const double h = 1e-6;
    for (int64_t i = 0; i < 4; ++i) {
        double& v = (*w.data)[size_t(i)];
        const double saved = v;
        v = saved + h;
        double sp = eval();
        v = saved - h;
        double sm = eval();
        v = saved;
        EXPECT_NEAR((*w.grad)[size_t(i)], (sp - sm) / (2 * h), 1e-5);
    }
}

// Every differentiable op vs central finite differences (h=1e-4, float64).
// The acceptance suite re-runs this with >= 10 instances per op.
TEST(GradientSuite, AllOpsMatchFiniteDifferences) {
    auto results = op_gradients::run_suite(/*instances=*/3);
    for (const auto& r : results) {
        EXPECT_LE(r.max_rel_err, 1e-4) << "op " << r.op << " rel err " << r.max_rel_err;
    }
    EXPECT_GE(results.size(), 30u);
}
