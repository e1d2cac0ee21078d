#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atcn/tensor.hpp>

#include <cmath>

using namespace atcn;

TEST_CASE("tensor_new fills and validates") {
    Tensor3 a = tensor_new(1, 1, 4, 0.0f);
    CHECK(a.size() == 4);
    for (float v : a.data) CHECK(v == 0.0f);

    Tensor3 b = tensor_new(2, 3, 5, 1.5f);
    CHECK(b.size() == 30);
    for (float v : b.data) CHECK(v == 1.5f);

    CHECK_THROWS_AS(tensor_new(0, 1, 4, 0.0f), ShapeError);
    CHECK_THROWS_AS(tensor_new(1, 0, 4, 0.0f), ShapeError);
    CHECK_THROWS_AS(tensor_new(1, 1, -1, 0.0f), ShapeError);
    CHECK_NOTHROW(tensor_new(1, 1, 0, 0.0f));  // empty sequence is representable
}

TEST_CASE("elementwise add and hadamard") {
    Tensor3 a(1, 1, 2);
    a.data = {1, 2};
    Tensor3 b(1, 1, 2);
    b.data = {3, 4};

    Tensor3 s = elementwise(a, b, Elementwise::Add);
    CHECK(s.data[0] == 4);
    CHECK(s.data[1] == 6);

    Tensor3 h(1, 1, 2);
    h.data = {2, 3};
    Tensor3 h2(1, 1, 2);
    h2.data = {4, 5};
    Tensor3 p = elementwise(h, h2, Elementwise::Hadamard);
    CHECK(p.data[0] == 8);
    CHECK(p.data[1] == 15);

    Tensor3 ones(1, 1, 2, 1.0f);
    Tensor3 idp = elementwise(a, ones, Elementwise::Hadamard);
    CHECK(idp.data == a.data);

    Tensor3 bad(1, 2, 1);
    CHECK_THROWS_AS(elementwise(a, bad, Elementwise::Add), ShapeError);
}

TEST_CASE("rand_uniform determinism and range") {
    Prng r1(42), r2(42);
    Tensor3 a = rand_uniform(r1, 2, 3, 7, -1.0f, 1.0f);
    Tensor3 b = rand_uniform(r2, 2, 3, 7, -1.0f, 1.0f);
    CHECK(a.data == b.data);  // bit-identical under the same seed

    Prng r3(7);
    Tensor3 big = rand_uniform(r3, 1, 1, 10000, 0.0f, 1.0f);
    double mean = 0;
    for (float v : big.data) {
        CHECK(v >= 0.0f);
        CHECK(v < 1.0f);
        mean += v;
    }
    mean /= double(big.size());
    CHECK(mean == doctest::Approx(0.5).epsilon(0.04));

    Prng r4(1);
    CHECK_THROWS_AS(rand_uniform(r4, 1, 1, 1, 1.0f, 1.0f), RangeError);
}

TEST_CASE("prng streams are reproducible and distinct per seed") {
    Prng a(123), b(123), c(124);
    bool all_eq = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
        all_eq = all_eq && (va == vb);
        any_diff = any_diff || (va != vc);
    }
    CHECK(all_eq);
    CHECK(any_diff);
}

TEST_CASE("prng gaussian moments") {
    Prng r(99);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = r.gaussian();
        sum += z;
        sq += z * z;
    }
    double mean = sum / n, var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("param storage") {
    Param<float> w("w", {4, 2, 3});
    CHECK(w.size() == 24);
    CHECK(w.g.size() == 24);
    w.g[5] = 1.0f;
    w.zero_grad();
    CHECK(w.g[5] == 0.0f);
}
