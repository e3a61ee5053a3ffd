#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gridident/tensor.hpp"
#include "gridident/util.hpp"

using namespace gridident;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0,
                   bool requires_grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("elementwise forward values") {
    Tensor a = Tensor::from_data({2}, {1, 2});
    Tensor b = Tensor::from_data({2}, {3, 4});
    auto r = add(a, b);
    CHECK(r.data() == std::vector<double>{4, 6});
    CHECK(sub(b, a).data() == std::vector<double>{2, 2});
    CHECK(mul(a, b).data() == std::vector<double>{3, 8});
    CHECK(scalar_mul(a, 2.5).data() == std::vector<double>{2.5, 5.0});
    CHECK(relu(Tensor::from_data({3}, {-1, 0, 2})).data() == std::vector<double>{0, 0, 2});
}

TEST_CASE("matmul identity") {
    Rng rng(7);
    Tensor eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0;
    Tensor a = rand_tensor({3, 3}, rng);
    Tensor r = matmul(eye, a);
    for (int i = 0; i < 9; ++i) CHECK(r.data()[i] == a.data()[i]);
}

TEST_CASE("broadcasting trailing dims") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({3}, {10, 20, 30});
    Tensor r = add(a, b);
    CHECK(r.data() == std::vector<double>{11, 22, 33, 14, 25, 36});
    // grad of the broadcast operand sums over the expanded dim
    b.set_requires_grad(true);
    Tape tape;
    Tensor loss = sum(mul(add(a, b), a));
    tape.backward(loss);
    CHECK(b.grad() == std::vector<double>{1 + 4, 2 + 5, 3 + 6});
}

TEST_CASE("shape mismatch reports both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4});
    try {
        add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4]") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("backward of sum(square(x))") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    Tape tape;
    Tensor loss = sum(square(x));
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("backward through matmul (linear map)") {
    Tensor w = Tensor::from_data({1, 2}, {1, 2}, true);
    Tensor x = Tensor::from_data({2, 1}, {3, 4});
    Tape tape;
    Tensor loss = matmul(w, x);
    tape.backward(loss);
    CHECK(w.grad() == std::vector<double>{3, 4});
}

TEST_CASE("silu gradient at zero matches central differences") {
    // independent oracle: central difference of x*sigmoid(x) at 0
    auto f = [](double x) { return x / (1.0 + std::exp(-x)); };
    double eps = 1e-6;
    double numeric = (f(eps) - f(-eps)) / (2 * eps);
    CHECK(numeric == doctest::Approx(0.5).epsilon(1e-6));

    Tensor x = Tensor::scalar(0.0, true);
    Tape tape;
    tape.backward(sum(silu(x)));
    CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar; empty tape leaves grads zero") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    {
        Tape tape;
        Tensor y = square(x);
        CHECK_THROWS_AS(tape.backward(y), ShapeError);
    }
    {
        Tape tape;
        Tensor c = Tensor::scalar(5.0);
        tape.backward(c);
        CHECK(x.grad() == std::vector<double>{0, 0});
    }
}

TEST_CASE("repeated backward accumulates; zero_grad resets") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tape tape;
    Tensor loss = sum(square(x));
    tape.backward(loss);
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>{4, 8});
    x.zero_grad();
    CHECK(x.grad() == std::vector<double>{0, 0});
}

TEST_CASE("grad_check of sum(square(x))") {
    Rng rng(11);
    Tensor x = rand_tensor({10}, rng);
    double err = grad_check([](const Tensor& t) { return sum(square(t)); }, x, 1e-6);
    CHECK(err < 1e-7);
}

TEST_CASE("grad_check of a constant is zero") {
    Tensor x = Tensor::from_data({4}, {1, 2, 3, 4});
    double err = grad_check([](const Tensor&) { return Tensor::scalar(3.0); }, x, 1e-6);
    CHECK(err == 0.0);
}

TEST_CASE("grad_check rejects non-scalar f") {
    Tensor x = Tensor::from_data({2}, {1, 2});
    CHECK_THROWS_AS(grad_check([](const Tensor& t) { return square(t); }, x, 1e-6),
                    ShapeError);
}

// Every primitive against central differences, random inputs in [-2,2].
TEST_CASE("primitive gradients match central differences at 1e-6") {
    Rng rng(42);
    auto check_unary = [&](const char* name, auto op, double lo, double hi) {
        Tensor x = rand_tensor({7}, rng, lo, hi);
        double err = grad_check([&](const Tensor& t) { return sum(op(t)); }, x, 1e-6);
        INFO(name);
        CHECK(err < 1e-6);
    };
    check_unary("square", [](const Tensor& t) { return square(t); }, -2, 2);
    check_unary("sqrt", [](const Tensor& t) { return sqrt_t(t); }, 0.5, 2);
    check_unary("exp", [](const Tensor& t) { return exp_t(t); }, -2, 2);
    check_unary("sin", [](const Tensor& t) { return sin_t(t); }, -2, 2);
    check_unary("cos", [](const Tensor& t) { return cos_t(t); }, -2, 2);
    check_unary("relu", [](const Tensor& t) { return relu(t); }, -2, 2);
    check_unary("silu", [](const Tensor& t) { return silu(t); }, -2, 2);
    check_unary("gelu", [](const Tensor& t) { return gelu(t); }, -2, 2);
    check_unary("tanh", [](const Tensor& t) { return tanh_t(t); }, -2, 2);
    check_unary("sigmoid", [](const Tensor& t) { return sigmoid(t); }, -2, 2);
    check_unary("mean", [](const Tensor& t) { return mean(square(t)); }, -2, 2);
    check_unary("scalar_mul", [](const Tensor& t) { return sum(scalar_mul(t, -1.7)); }, -2, 2);
    check_unary("scalar_add", [](const Tensor& t) { return sum(square(scalar_add(t, 0.3))); },
                -2, 2);

    Tensor b = rand_tensor({7}, rng);
    auto check_binary = [&](const char* name, auto op) {
        Tensor x = rand_tensor({7}, rng);
        double err = grad_check([&](const Tensor& t) { return sum(op(t, b)); }, x, 1e-6);
        INFO(name);
        CHECK(err < 1e-6);
        // and through the second operand
        Tensor y = rand_tensor({7}, rng);
        err = grad_check([&](const Tensor& t) { return sum(op(y, t)); }, x, 1e-6);
        CHECK(err < 1e-6);
    };
    check_binary("add", [](const Tensor& l, const Tensor& r) { return add(l, r); });
    check_binary("sub", [](const Tensor& l, const Tensor& r) { return sub(l, r); });
    check_binary("mul", [](const Tensor& l, const Tensor& r) { return mul(l, r); });

    Tensor m = rand_tensor({4, 5}, rng);
    Tensor x = rand_tensor({3, 4}, rng);
    double err =
        grad_check([&](const Tensor& t) { return sum(square(matmul(t, m))); }, x, 1e-6);
    CHECK(err < 1e-6);
    err = grad_check([&](const Tensor& t) { return sum(square(matmul(x, t))); }, m, 1e-6);
    CHECK(err < 1e-6);
}

TEST_CASE("structural op gradients") {
    Rng rng(3);
    Tensor x = rand_tensor({3, 4}, rng);
    double err = grad_check(
        [](const Tensor& t) { return sum(square(slice(t, 1, 1, 3))); }, x, 1e-6);
    CHECK(err < 1e-6);
    err = grad_check(
        [](const Tensor& t) {
            return sum(square(concat({t, scalar_mul(t, 2.0)}, 0)));
        },
        x, 1e-6);
    CHECK(err < 1e-6);
    err = grad_check([](const Tensor& t) { return sum(square(reshape(t, {4, 3}))); }, x, 1e-6);
    CHECK(err < 1e-6);
    Tensor row = rand_tensor({4}, rng);
    err = grad_check(
        [](const Tensor& t) { return sum(square(repeat_rows(t, 5))); }, row, 1e-6);
    CHECK(err < 1e-6);
}

TEST_CASE("structural op values") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({1, 2}, {5, 6});
    Tensor c = concat({a, b}, 0);
    CHECK(c.shape() == Shape{3, 2});
    CHECK(c.data() == std::vector<double>{1, 2, 3, 4, 5, 6});
    Tensor s = slice(c, 0, 1, 3);
    CHECK(s.data() == std::vector<double>{3, 4, 5, 6});
    CHECK_THROWS_AS(slice(c, 0, 2, 2), ShapeError);
    CHECK_THROWS_AS(concat({a, Tensor::zeros({2, 3})}, 0), ShapeError);
    Tensor r = repeat_rows(Tensor::from_data({2}, {7, 8}), 3);
    CHECK(r.shape() == Shape{3, 2});
    CHECK(r.data() == std::vector<double>{7, 8, 7, 8, 7, 8});
}

TEST_CASE("tape replay determinism: bit-identical gradients") {
    Rng rng(5);
    Tensor x = rand_tensor({6}, rng, -2, 2, true);
    Tensor w = rand_tensor({6}, rng, -2, 2, true);
    auto run = [&]() {
        x.zero_grad();
        w.zero_grad();
        Tape tape;
        Tensor loss = sum(mul(silu(x), exp_t(scalar_mul(w, 0.5))));
        tape.backward(loss);
        return std::make_pair(x.grad(), w.grad());
    };
    auto [gx1, gw1] = run();
    auto [gx2, gw2] = run();
    CHECK(gx1 == gx2);
    CHECK(gw1 == gw2);
}

TEST_CASE("linearity of backward") {
    Rng rng(9);
    Tensor x = rand_tensor({5}, rng, -2, 2, true);
    double a = 1.7, b = -0.4;
    auto grad_of = [&](auto fn) {
        x.zero_grad();
        Tape tape;
        tape.backward(fn());
        return x.grad();
    };
    auto gf = grad_of([&] { return sum(square(x)); });
    auto gg = grad_of([&] { return sum(sin_t(x)); });
    auto gc = grad_of([&] {
        return add(scalar_mul(sum(square(x)), a), scalar_mul(sum(sin_t(x)), b));
    });
    for (size_t i = 0; i < gc.size(); ++i) {
        CHECK(gc[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-12));
    }
}

TEST_CASE("debug mode flags non-finite results") {
    set_debug_checks(true);
    Tensor x = Tensor::from_data({1}, {-1.0});
    CHECK_THROWS_AS(sqrt_t(x), NumericError);
    set_debug_checks(false);
    CHECK(std::isnan(sqrt_t(x).data()[0]));
}

TEST_CASE("grad_check_params over several tensors") {
    Rng rng(12);
    Tensor w = rand_tensor({3, 2}, rng, -1, 1, true);
    Tensor b = rand_tensor({2}, rng, -1, 1, true);
    Tensor x = rand_tensor({4, 3}, rng);
    auto f = [&] { return sum(square(add(matmul(x, w), b))); };
    CHECK(grad_check_params(f, {w, b}, 1e-6) < 1e-6);
}
