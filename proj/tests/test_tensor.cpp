#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "ck/ops.hpp"
#include "ck/serialize.hpp"
#include "ck/tensor.hpp"
#include "testutil.hpp"

using namespace ck;

TEST_CASE("tensor shape/data agreement is enforced") {
    CHECK_THROWS_AS(make_tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    auto t = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t->size() == 6);
    CHECK_THROWS_AS(t->item(), ContractError);
    CHECK(scalar_tensor(4.0)->item() == 4.0);
}

TEST_CASE("backward on sum gives all-ones gradient") {
    auto w = make_tensor({2, 3}, {0.5, -1.0, 2.0, 3.0, -0.25, 0.75}, true);
    Tape tape;
    Tape::Scope scope(tape);
    auto loss = sum(w);
    tape.backward(loss);
    for (double g : w->grad) CHECK(g == 1.0);
    CHECK(tape.size() == 0);  // consumed
}

TEST_CASE("backward rejects non-scalar and detached losses") {
    auto w = make_tensor({2}, {1.0, 2.0}, true);
    Tape tape;
    {
        Tape::Scope scope(tape);
        auto out = relu(w);
        CHECK_THROWS_AS(tape.backward(out), ContractError);
    }
    // scalar but produced with no active tape
    auto loss = sum(w);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);
    // produced on a different tape
    Tape other;
    TensorPtr foreign;
    {
        Tape::Scope scope(other);
        foreign = sum(w);
    }
    CHECK_THROWS_AS(tape.backward(foreign), ContractError);
}

TEST_CASE("sigmoid gradient at zero is a quarter") {
    auto x = scalar_tensor(0.0, true);
    Tape tape;
    Tape::Scope scope(tape);
    auto loss = sum(sigmoid(x));
    tape.backward(loss);
    CHECK(x->grad[0] == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("tape replays once in reverse and can be reused after clear") {
    auto w = scalar_tensor(2.0, true);
    Tape tape;
    for (int round = 0; round < 3; ++round) {
        Tape::Scope scope(tape);
        w->zero_grad();
        auto loss = mul(w, w);
        tape.backward(loss);
        CHECK(w->grad[0] == doctest::Approx(4.0));
    }
}

TEST_CASE("no-grad guard suppresses recording") {
    auto w = scalar_tensor(1.0, true);
    Tape tape;
    Tape::Scope scope(tape);
    {
        NoGradGuard ng;
        auto silent = mul(w, w);
        CHECK(tape.size() == 0);
        CHECK(silent->producer == nullptr);
    }
    auto tracked_out = mul(w, w);
    CHECK(tape.size() == 1);
    CHECK(tracked(tracked_out));
}

TEST_CASE("determinism: identical op sequences give bitwise-identical outputs") {
    std::mt19937_64 rng(7);
    auto a = oracle::random_tensor({4, 4}, rng);
    auto b = oracle::random_tensor({4, 4}, rng);
    auto first = matmul(sigmoid(a), relu(b));
    auto second = matmul(sigmoid(a), relu(b));
    for (std::size_t i = 0; i < first->data.size(); ++i) CHECK(first->data[i] == second->data[i]);
}

TEST_CASE("tensor container round-trips exactly") {
    std::mt19937_64 rng(3);
    auto t = oracle::random_tensor({2, 3, 4}, rng);
    std::stringstream ss;
    write_tensor(ss, *t);
    auto back = read_tensor(ss);
    CHECK(back->shape == t->shape);
    for (std::size_t i = 0; i < t->data.size(); ++i) CHECK(back->data[i] == t->data[i]);
}

TEST_CASE("tensor container header starts with magic bytes and 64-bit dims") {
    auto t = make_tensor({2, 1}, {1.5, -2.5});
    std::stringstream ss;
    write_tensor(ss, *t);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4 + 8 + 2 * 8 + 2 * 8);
    CHECK(bytes.substr(0, 4) == "CKT1");
    CHECK(static_cast<unsigned char>(bytes[4]) == 2);  // rank, little-endian
    CHECK(static_cast<unsigned char>(bytes[12]) == 2);
    CHECK(static_cast<unsigned char>(bytes[20]) == 1);
}

TEST_CASE("corrupt container is rejected") {
    std::stringstream ss("XXXXjunk");
    CHECK_THROWS_AS(read_tensor(ss), DataError);
}

TEST_CASE("multi-tensor file save/load preserves order and content") {
    namespace fs = std::filesystem;
    std::mt19937_64 rng(11);
    std::vector<TensorPtr> tensors = {oracle::random_tensor({3}, rng),
                                      oracle::random_tensor({2, 2}, rng)};
    const auto path = fs::temp_directory_path() / "ck_test_tensors.ckt";
    save_tensors(path.string(), tensors);
    auto back = load_tensors(path.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0]->shape == tensors[0]->shape);
    CHECK(back[1]->shape == tensors[1]->shape);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < tensors[i]->data.size(); ++j) {
            CHECK(back[i]->data[j] == tensors[i]->data[j]);
        }
    }
    fs::remove(path);
}
