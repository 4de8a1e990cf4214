#include "ck/tensor.hpp"

#include <numeric>
#include <sstream>

namespace ck {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tensor::Tensor(std::vector<std::int64_t> s, std::vector<double> d, bool req)
    : shape(std::move(s)), data(std::move(d)), requires_grad(req) {
    if (numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
    if (requires_grad) ensure_grad();
}

double Tensor::item() const {
    if (!is_scalar()) {
        throw ContractError("item: tensor of shape " + shape_str(shape) + " is not scalar");
    }
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    grad.assign(data.size(), 0.0);
}

std::int64_t numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d <= 0) throw ShapeError("numel: non-positive dimension in " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> data,
                      bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data), requires_grad);
}

TensorPtr zeros(std::vector<std::int64_t> shape, bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(numel(shape)), 0.0);
    return make_tensor(std::move(shape), std::move(d), requires_grad);
}

TensorPtr full(std::vector<std::int64_t> shape, double value, bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(numel(shape)), value);
    return make_tensor(std::move(shape), std::move(d), requires_grad);
}

TensorPtr scalar_tensor(double value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

void Tape::record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss) throw ContractError("backward: null loss");
    if (!loss->is_scalar()) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss->shape));
    }
    if (loss->producer != this || loss->producer_epoch != epoch_) {
        throw ContractError("backward: loss is detached from this tape");
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    clear();
}

void Tape::clear() {
    steps_.clear();
    ++epoch_;
}

Tape* Tape::active() {
    return g_active_tape;
}

Tape::Scope::Scope(Tape& tape) : prev_(g_active_tape) {
    g_active_tape = &tape;
}

Tape::Scope::~Scope() {
    g_active_tape = prev_;
}

NoGradGuard::NoGradGuard() : prev_(g_active_tape) {
    g_active_tape = nullptr;
}

NoGradGuard::~NoGradGuard() {
    g_active_tape = prev_;
}

bool tracked(const TensorPtr& t) {
    if (!t) return false;
    if (t->requires_grad) return true;
    Tape* tp = Tape::active();
    return tp != nullptr && t->producer == tp && t->producer_epoch == tp->epoch();
}

void mark_output(const TensorPtr& out) {
    Tape* tp = Tape::active();
    if (!tp) throw ContractError("mark_output: no active tape");
    out->producer = tp;
    out->producer_epoch = tp->epoch();
    out->ensure_grad();
}

}  // namespace ck
