#include "adcast/models/blocks.hpp"

#include "adcast/errors.hpp"

#include <cmath>

namespace adcast::models {

using namespace ad;

Value Context::bind(const std::string& name, std::size_t rows, std::size_t cols, std::optional<double> fill) {
    if (auto it = bound_.find(name); it != bound_.end()) return it->second;
    if (!store_.contains(name)) {
        if (!init_) throw NotFoundError("missing parameter " + name);
        if (fill) {
            store_.get_or_create(name, rows, cols, *fill);
        } else {
            store_.get_or_create(name, rows, cols, *init_);
        }
    }
    const Param& p = store_.at(name);
    if (p.rows != rows || p.cols != cols) {
        throw ValidationError("parameter " + name + " has shape " + std::to_string(p.rows) + "x" +
                              std::to_string(p.cols) + ", expected " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    Value v = tape_.param(store_, name);
    bound_.emplace(name, v);
    return v;
}

Value Context::weight(const std::string& name, std::size_t rows, std::size_t cols) {
    return bind(name, rows, cols, std::nullopt);
}

Value Context::bias(const std::string& name, std::size_t cols, double fill) { return bind(name, 1, cols, fill); }

Value Context::bias(const std::string& name, std::vector<double> init) {
    const bool fresh = !store_.contains(name) && init_;
    const Value v = bind(name, 1, init.size(), 0.0);
    if (fresh) {
        store_.at(name).value = init;
        v.node().value = std::move(init);
    }
    return v;
}

Value linear(Context& ctx, const std::string& name, const Value& x, std::size_t out) {
    return add_row(matmul(x, ctx.weight(name + ".w", x.cols(), out)), ctx.bias(name + ".b", out));
}

Value glu(Context& ctx, const std::string& name, const Value& x, std::size_t out) {
    return mul(sigmoid(linear(ctx, name + ".gate", x, out)), linear(ctx, name + ".value", x, out));
}

Value grn(Context& ctx, const std::string& name, const Value& a, std::size_t hidden, std::size_t out,
          const Value* context) {
    Value pre = linear(ctx, name + ".fc2", a, hidden);
    if (context) pre = add(pre, matmul(*context, ctx.weight(name + ".ctx", context->cols(), hidden)));
    const Value eta = linear(ctx, name + ".fc1", elu(pre), hidden);
    const Value skip = a.cols() == out ? a : linear(ctx, name + ".skip", a, out);
    return add(skip, glu(ctx, name + ".glu", eta, out));
}

VsnOutput variable_selection(Context& ctx, const std::string& name, const std::vector<Value>& embeddings,
                             std::size_t hidden) {
    if (embeddings.empty()) throw ValidationError("variable selection needs at least one variable");
    const std::size_t n_vars = embeddings.size();
    const Value flat = concat(embeddings, 1);
    const Value weights = softmax(grn(ctx, name + ".grn", flat, hidden, n_vars), 1);
    Value combined;
    for (std::size_t v = 0; v < n_vars; ++v) {
        const Value term = mul_col(embeddings[v], slice(weights, 1, v, v + 1));
        combined = v == 0 ? term : add(combined, term);
    }
    return {combined, weights};
}

LstmState lstm_cell(Context& ctx, const std::string& name, const Value& x_proj, const LstmState& prev) {
    const std::size_t d = prev.h.cols();
    const Value gates = add(x_proj, matmul(prev.h, ctx.weight(name + ".wh", d, 4 * d)));
    const Value i = sigmoid(slice(gates, 1, 0, d));
    const Value f = sigmoid(slice(gates, 1, d, 2 * d));
    const Value g = tanh(slice(gates, 1, 2 * d, 3 * d));
    const Value o = sigmoid(slice(gates, 1, 3 * d, 4 * d));
    const Value c = add(mul(f, prev.c), mul(i, g));
    return {mul(o, tanh(c)), c};
}

LstmState zero_state(Tape& tape, std::size_t batch, std::size_t hidden) {
    return {tape.constant(batch, hidden), tape.constant(batch, hidden)};
}

LstmSequence lstm_sequence(Context& ctx, const std::string& name, const Value& x, std::size_t batch,
                           std::size_t hidden, const LstmState& init) {
    if (batch == 0 || x.rows() % batch != 0) throw ValidationError("lstm_sequence: rows not a multiple of batch");
    const std::size_t steps = x.rows() / batch;
    // Forget-gate bias starts at 1 so early training keeps the cell state.
    std::vector<double> b(4 * hidden, 0.0);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
    const Value proj =
        add_row(matmul(x, ctx.weight(name + ".wx", x.cols(), 4 * hidden)), ctx.bias(name + ".b", std::move(b)));
    std::vector<Value> outs;
    outs.reserve(steps);
    LstmState state = init;
    for (std::size_t t = 0; t < steps; ++t) {
        state = lstm_cell(ctx, name, slice(proj, 0, t * batch, (t + 1) * batch), state);
        outs.push_back(state.h);
    }
    return {concat(outs, 0), state};
}

AttentionOutput interpretable_attention(Context& ctx, const std::string& name, const Value& queries,
                                        const Value& keys, std::size_t batch, std::size_t heads) {
    if (batch == 0 || queries.rows() % batch != 0 || keys.rows() % batch != 0) {
        throw ValidationError("attention: rows not a multiple of batch");
    }
    if (heads == 0) throw ValidationError("attention needs at least one head");
    const std::size_t d = queries.cols();
    const std::size_t dh = std::max<std::size_t>(1, d / heads);
    const std::size_t nq = queries.rows() / batch;
    const std::size_t nk = keys.rows() / batch;
    const Value q_all = linear(ctx, name + ".q", queries, heads * dh);
    // No key bias: it shifts every score of a query equally and cancels in the softmax.
    const Value k_all = matmul(keys, ctx.weight(name + ".k.w", keys.cols(), heads * dh));
    const Value v_all = linear(ctx, name + ".v", keys, d);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    AttentionOutput out;
    std::vector<Value> rows;
    rows.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const Value qb = slice(q_all, 0, b * nq, (b + 1) * nq);
        const Value kb = slice(k_all, 0, b * nk, (b + 1) * nk);
        Value avg;
        for (std::size_t h = 0; h < heads; ++h) {
            const Value qh = slice(qb, 1, h * dh, (h + 1) * dh);
            const Value kh = slice(kb, 1, h * dh, (h + 1) * dh);
            const Value a = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
            avg = h == 0 ? a : add(avg, a);
        }
        if (heads > 1) avg = scale(avg, 1.0 / static_cast<double>(heads));
        rows.push_back(matmul(avg, slice(v_all, 0, b * nk, (b + 1) * nk)));
        out.weights.push_back(avg);
    }
    out.output = linear(ctx, name + ".o", concat(rows, 0), d);
    return out;
}

Value quantile_head(Context& ctx, const std::string& name, const Value& x, std::size_t n_quantiles) {
    return linear(ctx, name, x, n_quantiles);
}

namespace {

Value replicate_target(Tape& tape, const std::vector<double>& target, std::size_t cols) {
    std::vector<double> t(target.size() * cols);
    for (std::size_t r = 0; r < target.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) t[r * cols + c] = target[r];
    }
    return tape.constant(target.size(), cols, std::move(t));
}

} // namespace

Value pinball_loss(Tape& tape, const Value& pred, const std::vector<double>& target,
                   const std::vector<double>& quantiles) {
    if (pred.rows() != target.size() || pred.cols() != quantiles.size()) {
        throw ValidationError("pinball_loss: prediction shape does not match target and quantiles");
    }
    std::vector<double> q(pred.size());
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t c = 0; c < quantiles.size(); ++c) q[r * quantiles.size() + c] = quantiles[c];
    }
    const Value e = sub(replicate_target(tape, target, pred.cols()), pred);
    return mean(add(mul(tape.constant(pred.rows(), pred.cols(), std::move(q)), e), relu(neg(e))));
}

Value mse_loss(Tape& tape, const Value& pred, const std::vector<double>& target) {
    if (pred.rows() != target.size()) throw ValidationError("mse_loss: prediction rows do not match target");
    const Value e = sub(replicate_target(tape, target, pred.cols()), pred);
    return mean(mul(e, e));
}

} // namespace adcast::models
