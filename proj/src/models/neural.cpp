#include "adcast/models/neural.hpp"

#include "adcast/autodiff/ops.hpp"
#include "adcast/autodiff/params.hpp"
#include "adcast/errors.hpp"
#include "adcast/models/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace adcast::models {

using namespace ad;

WindowSplit split_windows(std::size_t history, std::size_t encoder_length, std::size_t horizon) {
    const std::size_t span = encoder_length + horizon;
    if (history < span + 1) {
        throw ValidationError("insufficient history: " + std::to_string(history) + " days, sequence models need " +
                              std::to_string(span + 1) + " (encoder " + std::to_string(encoder_length) +
                              " + horizon " + std::to_string(horizon) + " + 1)");
    }
    const std::size_t n = history - span + 1;
    const std::size_t n_val = std::max<std::size_t>(1, n / 10);
    WindowSplit s;
    for (std::size_t a = n - n_val; a < n; ++a) s.validation.push_back(a);
    const std::size_t first_val = n - n_val;
    const std::size_t train_end = first_val > horizon ? first_val - horizon + 1 : first_val;
    for (std::size_t a = 0; a < train_end; ++a) s.train.push_back(a);
    return s;
}

bool is_competitor_channel(const std::string& name) {
    return name.rfind("peer_", 0) == 0 || name == "cluster_mean_cpc";
}

namespace {

// Standardised copy of a model input.
struct Prepared {
    std::size_t e = 0, h = 0, t = 0;
    Matrix past;
    Matrix known;
    std::vector<double> target;
    ChannelStats target_stats;
    std::vector<KnownVariable> vars;
    std::vector<double> statics;
};

std::vector<ChannelStats> known_stats_for(const ModelInput& input) {
    auto stats = column_stats(input.known, input.history());
    for (const auto& v : input.known_vars) {
        if (v.standardize) continue;
        for (std::size_t k = 0; k < v.width; ++k) stats[v.begin + k] = {0.0, 1.0};
    }
    return stats;
}

Prepared prepare(const ModelInput& input, const TrainedModel& m) {
    if (input.past_names != m.past_names || input.known_vars != m.known_vars) {
        throw ValidationError("input channels differ from the channels the model was trained on");
    }
    Prepared p;
    p.e = m.config.encoder_length;
    p.h = m.config.horizon;
    p.t = input.history();
    p.past = input.past;
    for (std::size_t r = 0; r < p.past.rows(); ++r) {
        for (std::size_t c = 0; c < p.past.cols(); ++c) {
            p.past(r, c) = (p.past(r, c) - m.past_stats[c].mean) / m.past_stats[c].sd;
        }
    }
    p.known = input.known;
    for (std::size_t r = 0; r < p.known.rows(); ++r) {
        for (std::size_t c = 0; c < p.known.cols(); ++c) {
            p.known(r, c) = (p.known(r, c) - m.known_stats[c].mean) / m.known_stats[c].sd;
        }
    }
    p.target = p.past.column(input.target);
    p.target_stats = m.past_stats[input.target];
    p.vars = input.known_vars;
    p.statics = input.static_values.empty() ? std::vector<double>{1.0} : input.static_values;
    return p;
}

// Time-major block of past columns [c0, c1) over the encoder rows: row t*B + b.
std::vector<double> past_rows(const Prepared& p, const std::vector<std::size_t>& anchors, std::size_t c0,
                              std::size_t c1) {
    const std::size_t b_n = anchors.size(), w = c1 - c0;
    std::vector<double> out(p.e * b_n * w);
    for (std::size_t t = 0; t < p.e; ++t) {
        for (std::size_t b = 0; b < b_n; ++b) {
            for (std::size_t c = 0; c < w; ++c) out[(t * b_n + b) * w + c] = p.past(anchors[b] + t, c0 + c);
        }
    }
    return out;
}

// Known columns [c0, c1) for window offsets [from, from + len); time-major or sample-major.
std::vector<double> known_rows(const Prepared& p, const std::vector<std::size_t>& anchors, std::size_t c0,
                               std::size_t c1, std::size_t from, std::size_t len, bool sample_major) {
    const std::size_t b_n = anchors.size(), w = c1 - c0;
    std::vector<double> out(len * b_n * w);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t b = 0; b < b_n; ++b) {
            const std::size_t row = sample_major ? b * len + t : t * b_n + b;
            for (std::size_t c = 0; c < w; ++c) out[row * w + c] = p.known(anchors[b] + from + t, c0 + c);
        }
    }
    return out;
}

// Sample-major decoder targets: row b*H + h.
std::vector<double> targets(const Prepared& p, const std::vector<std::size_t>& anchors) {
    std::vector<double> out;
    out.reserve(anchors.size() * p.h);
    for (std::size_t a : anchors) {
        for (std::size_t h = 0; h < p.h; ++h) out.push_back(p.target.at(a + p.e + h));
    }
    return out;
}

Value static_block(Tape& tape, const Prepared& p, std::size_t batch) {
    std::vector<double> s;
    for (std::size_t b = 0; b < batch; ++b) s.insert(s.end(), p.statics.begin(), p.statics.end());
    return tape.constant(batch, p.statics.size(), std::move(s));
}

// ---------------------------------------------------------------------------
// Network definitions. Both return sample-major (B*H) x Q predictions on the
// standardised target scale.

Value lstm_forward(Context& ctx, const Prepared& p, const std::vector<std::size_t>& anchors, const ModelConfig& cfg) {
    Tape& tape = ctx.tape();
    const std::size_t b_n = anchors.size(), vp = p.past.cols(), kc = p.known.cols(), q_n = cfg.quantiles.size();
    std::vector<Value> enc_parts{tape.constant(p.e * b_n, vp, past_rows(p, anchors, 0, vp))};
    if (kc > 0) enc_parts.push_back(tape.constant(p.e * b_n, kc, known_rows(p, anchors, 0, kc, 0, p.e, false)));
    const Value x = concat(enc_parts, 1);
    const auto seq = lstm_sequence(ctx, "lstm", x, b_n, cfg.hidden, zero_state(tape, b_n, cfg.hidden));
    Value out = reshape(linear(ctx, "head", seq.final.h, p.h * q_n), b_n * p.h, q_n);
    if (kc > 0) {
        const Value fut = tape.constant(b_n * p.h, kc, known_rows(p, anchors, 0, kc, p.e, p.h, true));
        out = add(out, matmul(fut, ctx.weight("future.w", kc, q_n)));
    }
    return out;
}

struct TftTrace {
    Value pred;
    Value enc_weights;  // (E*B) x V_enc
    Value dec_weights;  // (H*B) x V_known
    std::vector<Value> attention;
};

TftTrace tft_forward(Context& ctx, const Prepared& p, const std::vector<std::size_t>& anchors, const ModelConfig& cfg) {
    Tape& tape = ctx.tape();
    const std::size_t b_n = anchors.size(), d = cfg.hidden, vp = p.past.cols();

    std::vector<Value> enc_emb, dec_emb;
    for (std::size_t c = 0; c < vp; ++c) {
        const Value x = tape.constant(p.e * b_n, 1, past_rows(p, anchors, c, c + 1));
        enc_emb.push_back(linear(ctx, "emb.past" + std::to_string(c), x, d));
    }
    for (std::size_t k = 0; k < p.vars.size(); ++k) {
        const auto& v = p.vars[k];
        const std::string name = "emb.known" + std::to_string(k);
        const auto c0 = v.begin, c1 = v.begin + v.width;
        enc_emb.push_back(linear(ctx, name, tape.constant(p.e * b_n, v.width, known_rows(p, anchors, c0, c1, 0, p.e, false)), d));
        dec_emb.push_back(linear(ctx, name, tape.constant(p.h * b_n, v.width, known_rows(p, anchors, c0, c1, p.e, p.h, false)), d));
    }
    const auto enc_vsn = variable_selection(ctx, "vsn.enc", enc_emb, d);
    // Without known-future variables the decoder is fed a learned constant.
    VsnOutput dec_vsn;
    if (dec_emb.empty()) {
        dec_vsn.combined = linear(ctx, "dec.const", tape.constant(p.h * b_n, 1, 1.0), d);
    } else {
        dec_vsn = variable_selection(ctx, "vsn.dec", dec_emb, d);
    }

    const Value context = linear(ctx, "static", static_block(tape, p, b_n), d);
    const LstmState init{tanh(linear(ctx, "static.h", context, d)), linear(ctx, "static.c", context, d)};
    const auto enc = lstm_sequence(ctx, "lstm.enc", enc_vsn.combined, b_n, d, init);
    const auto dec = lstm_sequence(ctx, "lstm.dec", dec_vsn.combined, b_n, d, enc.final);

    const Value lstm_out = concat({enc.outputs, dec.outputs}, 0);
    const Value selected = concat({enc_vsn.combined, dec_vsn.combined}, 0);
    const Value phi = add(glu(ctx, "gate.lstm", lstm_out, d), selected);

    std::vector<std::size_t> enc_idx, dec_idx;
    for (std::size_t b = 0; b < b_n; ++b) {
        for (std::size_t t = 0; t < p.e; ++t) enc_idx.push_back(t * b_n + b);
        for (std::size_t h = 0; h < p.h; ++h) dec_idx.push_back((p.e + h) * b_n + b);
    }
    const Value phi_enc = gather_rows(phi, enc_idx);
    const Value phi_dec = gather_rows(phi, dec_idx);
    auto att = interpretable_attention(ctx, "attn", phi_dec, phi_enc, b_n, cfg.heads);
    const Value delta = add(glu(ctx, "gate.attn", att.output, d), phi_dec);
    const Value psi = grn(ctx, "ff", delta, d, d);
    const Value out = add(glu(ctx, "gate.out", psi, d), phi_dec);
    return {quantile_head(ctx, "head", out, cfg.quantiles.size()), enc_vsn.weights, dec_vsn.weights,
            std::move(att.weights)};
}

using Forward = std::function<Value(Context&, const std::vector<std::size_t>&)>;

Value loss_of(Tape& tape, const Value& pred, const std::vector<double>& target, const ModelConfig& cfg) {
    return cfg.loss == LossKind::pinball ? pinball_loss(tape, pred, target, cfg.quantiles) : mse_loss(tape, pred, target);
}

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& anchors, std::size_t size) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < anchors.size(); i += size) {
        out.emplace_back(anchors.begin() + static_cast<std::ptrdiff_t>(i),
                         anchors.begin() + static_cast<std::ptrdiff_t>(std::min(anchors.size(), i + size)));
    }
    return out;
}

// Adam with gradient clipping and early stopping on the validation windows;
// the best parameters are restored at the end.
void train_network(ParamStore& store, TrainedModel& model, const Prepared& p, const Forward& forward) {
    const ModelConfig& cfg = model.config;
    const WindowSplit split = split_windows(p.t, p.e, p.h);
    Rng init = Rng::substream(cfg.seed, 1);
    Rng sampler = Rng::substream(cfg.seed, 2);
    {
        Tape tape;
        Context ctx(tape, store, &init);
        forward(ctx, {split.train.front()});
    }
    // Evenly spaced validation subset bounds the per-epoch cost.
    std::vector<std::size_t> val;
    const std::size_t n_val = std::min(split.validation.size(), std::max<std::size_t>(cfg.windows_per_epoch / 2, 1));
    for (std::size_t i = 0; i < n_val; ++i) val.push_back(split.validation[i * split.validation.size() / n_val]);

    auto evaluate = [&](const std::vector<std::size_t>& anchors) {
        double total = 0.0;
        for (const auto& batch : batches_of(anchors, cfg.batch_size)) {
            Tape tape;
            Context ctx(tape, store);
            const Value loss = loss_of(tape, forward(ctx, batch), targets(p, batch), cfg);
            total += loss.item() * static_cast<double>(batch.size());
        }
        return total / static_cast<double>(anchors.size());
    };

    double best = std::numeric_limits<double>::infinity();
    auto best_values = store.snapshot();
    std::size_t since_best = 0;
    std::vector<std::size_t> order = split.train;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        sampler.shuffle(order);
        const std::vector<std::size_t> chosen(order.begin(),
                                              order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), cfg.windows_per_epoch)));
        double epoch_loss = 0.0;
        for (const auto& batch : batches_of(chosen, cfg.batch_size)) {
            store.zero_grad();
            Tape tape;
            Context ctx(tape, store);
            const Value loss = loss_of(tape, forward(ctx, batch), targets(p, batch), cfg);
            if (!std::isfinite(loss.item())) {
                throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
            }
            tape.backward(loss);
            if (cfg.clip_norm > 0.0) store.clip_grad_norm(cfg.clip_norm);
            store.adam_step(cfg.learning_rate);
            epoch_loss += loss.item() * static_cast<double>(batch.size());
        }
        model.train_loss.push_back(epoch_loss / static_cast<double>(chosen.size()));
        const double v = evaluate(val);
        if (!std::isfinite(v)) throw NumericalError("training diverged at epoch " + std::to_string(epoch));
        model.validation_loss.push_back(v);
        if (v < best) {
            best = v;
            best_values = store.snapshot();
            since_best = 0;
        } else if (++since_best >= cfg.patience && cfg.patience > 0) {
            break;
        }
    }
    store.restore(best_values);
}

TrainedModel base_model(const ModelInput& input, const ModelConfig& config) {
    TrainedModel m;
    m.kind = config.kind;
    m.config = config;
    m.past_names = input.past_names;
    m.known_vars = input.known_vars;
    m.static_names = input.static_names;
    m.past_stats = column_stats(input.past, input.history());
    m.known_stats = known_stats_for(input);
    return m;
}

Matrix destandardize(const Value& pred, const Prepared& p) {
    Matrix band(pred.rows(), pred.cols());
    for (std::size_t i = 0; i < band.data().size(); ++i) {
        band.data()[i] = pred.data()[i] * p.target_stats.sd + p.target_stats.mean;
    }
    return band;
}

std::size_t prediction_anchor(const Prepared& p) {
    if (p.t < p.e) {
        throw ValidationError("insufficient history: " + std::to_string(p.t) + " days for an encoder of " +
                              std::to_string(p.e));
    }
    return p.t - p.e;
}

} // namespace

TrainedModel fit_lstm(const ModelInput& input, const ModelConfig& config) {
    TrainedModel m = base_model(input, config);
    const Prepared p = prepare(input, m);
    ParamStore store;
    train_network(store, m, p, [&](Context& ctx, const std::vector<std::size_t>& a) { return lstm_forward(ctx, p, a, config); });
    m.state = {{"parameters", checkpoint_json(store)}};
    return m;
}

ForecastResult predict_lstm(const TrainedModel& model, const ModelInput& input) {
    if (model.kind != ModelKind::lstm) throw ValidationError("predict_lstm needs an lstm model");
    const Prepared p = prepare(input, model);
    ParamStore store = load_checkpoint(model.state.at("parameters"));
    Tape tape;
    Context ctx(tape, store);
    const Value pred = lstm_forward(ctx, p, {prediction_anchor(p)}, model.config);
    return assemble_forecast(model.config, input, destandardize(pred, p));
}

TrainedModel fit_tft(const ModelInput& input, const ModelConfig& config) {
    TrainedModel m = base_model(input, config);
    const Prepared p = prepare(input, m);
    ParamStore store;
    train_network(store, m, p,
                  [&](Context& ctx, const std::vector<std::size_t>& a) { return tft_forward(ctx, p, a, config).pred; });
    m.state = {{"parameters", checkpoint_json(store)}};
    return m;
}

namespace {

struct TftRun {
    Matrix band;
    TftInterpretation interp;
};

TftRun run_tft(const TrainedModel& model, const ModelInput& input) {
    if (model.kind != ModelKind::tft) throw ValidationError("model kind " + to_string(model.kind) + " is not a tft");
    const Prepared p = prepare(input, model);
    ParamStore store = load_checkpoint(model.state.at("parameters"));
    Tape tape;
    Context ctx(tape, store);
    const auto trace = tft_forward(ctx, p, {prediction_anchor(p)}, model.config);

    TftRun run;
    run.band = destandardize(trace.pred, p);
    auto& in = run.interp;
    in.encoder_names = input.past_names;
    for (const auto& v : input.known_vars) {
        in.encoder_names.push_back(v.name);
        in.decoder_names.push_back(v.name);
    }
    in.encoder_importance = mean_rows(trace.enc_weights).data();
    if (trace.dec_weights) in.decoder_importance = mean_rows(trace.dec_weights).data();
    in.attention = mean_rows(trace.attention.front()).data();
    for (std::size_t i = 0; i < in.encoder_names.size(); ++i) {
        if (is_competitor_channel(in.encoder_names[i])) in.competitors += in.encoder_importance[i];
    }
    return run;
}

} // namespace

ForecastResult predict_tft(const TrainedModel& model, const ModelInput& input) {
    TftRun run = run_tft(model, input);
    ForecastResult r = assemble_forecast(model.config, input, std::move(run.band));
    r.encoder_names = run.interp.encoder_names;
    r.encoder_importance = run.interp.encoder_importance;
    r.decoder_names = run.interp.decoder_names;
    r.decoder_importance = run.interp.decoder_importance;
    r.attention = run.interp.attention;
    return r;
}

TftInterpretation interpret_tft(const TrainedModel& model, const ModelInput& input) {
    return run_tft(model, input).interp;
}

} // namespace adcast::models
