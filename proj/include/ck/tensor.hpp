#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ck/error.hpp"

namespace ck {

class Tape;

// Dense row-major double tensor. `grad` stays empty until the tensor takes
// part in a recorded computation or is a requires_grad leaf.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    // Tape bookkeeping: which tape (and which use of it) produced this value.
    Tape* producer = nullptr;
    std::uint64_t producer_epoch = 0;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> s, std::vector<double> d, bool req = false);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    bool is_scalar() const { return data.size() == 1; }
    double item() const;

    void ensure_grad();
    void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

std::int64_t numel(const std::vector<std::int64_t>& shape);
std::string shape_str(const std::vector<std::int64_t>& shape);

TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> data,
                      bool requires_grad = false);
TensorPtr zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
TensorPtr full(std::vector<std::int64_t> shape, double value, bool requires_grad = false);
TensorPtr scalar_tensor(double value, bool requires_grad = false);

// Ordered record of executed primitive operations. Replaying it backward
// visits each recorded step exactly once, in reverse execution order.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_step);

    // Seeds loss->grad with 1, replays the tape in reverse, then consumes it.
    // Throws ContractError for non-scalar or detached losses.
    void backward(const TensorPtr& loss);

    void clear();
    std::size_t size() const { return steps_.size(); }
    std::uint64_t epoch() const { return epoch_; }

    static Tape* active();

    // RAII activation of a tape on the current thread.
    class Scope {
    public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

private:
    std::vector<std::function<void()>> steps_;
    std::uint64_t epoch_ = 1;
};

// Suspends recording on the active tape for its lifetime (teacher inference,
// detector decoding, evaluation).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    Tape* prev_;
};

// True when an op consuming `t` must be recorded on the active tape.
bool tracked(const TensorPtr& t);

// Marks `out` as produced by the active tape and allocates its grad buffer.
void mark_output(const TensorPtr& out);

}  // namespace ck
