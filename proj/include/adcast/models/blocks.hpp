#pragma once

#include "adcast/autodiff/ops.hpp"
#include "adcast/autodiff/params.hpp"
#include "adcast/autodiff/tape.hpp"
#include "adcast/rng.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adcast::models {

/// Parameter access for one forward pass. With an init generator, missing
/// parameters are created (Glorot, or zeros for biases); without one they
/// must already exist. Each parameter is bound to the tape at most once.
class Context {
public:
    Context(ad::Tape& tape, ad::ParamStore& store, Rng* init = nullptr) : tape_(tape), store_(store), init_(init) {}

    ad::Value weight(const std::string& name, std::size_t rows, std::size_t cols);
    ad::Value bias(const std::string& name, std::size_t cols, double fill = 0.0);
    /// Bias created with explicit initial values.
    ad::Value bias(const std::string& name, std::vector<double> init);
    ad::Tape& tape() { return tape_; }

private:
    ad::Value bind(const std::string& name, std::size_t rows, std::size_t cols, std::optional<double> fill);

    ad::Tape& tape_;
    ad::ParamStore& store_;
    Rng* init_;
    std::map<std::string, ad::Value> bound_;
};

/// x W + b, row-wise.
ad::Value linear(Context& ctx, const std::string& name, const ad::Value& x, std::size_t out);

/// Gated linear unit: sigmoid(x W1 + b1) * (x W2 + b2).
ad::Value glu(Context& ctx, const std::string& name, const ad::Value& x, std::size_t out);

/// Gated residual network: skip(a) + GLU(W1 elu(W2 a + W3 c + b2) + b1).
/// The skip is the identity when widths agree, otherwise a linear map.
/// Layer normalisation is omitted.
ad::Value grn(Context& ctx, const std::string& name, const ad::Value& a, std::size_t hidden, std::size_t out,
              const ad::Value* context = nullptr);

struct VsnOutput {
    ad::Value combined;  // rows x d
    ad::Value weights;   // rows x V, rows sum to 1
};

/// Variable selection: a GRN over the concatenated embeddings yields softmax
/// weights across variables; the output is the weighted embedding sum.
VsnOutput variable_selection(Context& ctx, const std::string& name, const std::vector<ad::Value>& embeddings,
                             std::size_t hidden);

struct LstmState {
    ad::Value h;
    ad::Value c;
};

/// One LSTM step. `x_proj` is the already projected input x Wx + b (B x 4d),
/// gates ordered i, f, g, o.
LstmState lstm_cell(Context& ctx, const std::string& name, const ad::Value& x_proj, const LstmState& prev);

struct LstmSequence {
    ad::Value outputs;  // time-major (T*B) x d
    LstmState final;
};

/// Unrolls an LSTM over a time-major input (row t*B + b).
LstmSequence lstm_sequence(Context& ctx, const std::string& name, const ad::Value& x, std::size_t batch,
                           std::size_t hidden, const LstmState& init);

/// Zero state for `batch` rows.
LstmState zero_state(ad::Tape& tape, std::size_t batch, std::size_t hidden);

struct AttentionOutput {
    ad::Value output;                  // sample-major (B*Hq) x d
    std::vector<ad::Value> weights;    // per sample, Hq x E, head-averaged
};

/// Interpretable multi-head attention: per-head queries and keys, one value
/// projection shared by all heads, so averaging the heads' weights gives the
/// reported attention. Queries are sample-major (B*Hq rows), keys and values
/// sample-major (B*E rows).
AttentionOutput interpretable_attention(Context& ctx, const std::string& name, const ad::Value& queries,
                                        const ad::Value& keys, std::size_t batch, std::size_t heads);

/// Linear head emitting one column per quantile.
ad::Value quantile_head(Context& ctx, const std::string& name, const ad::Value& x, std::size_t n_quantiles);

/// Mean pinball loss of pred (n x Q) against target (n x 1) over all quantile columns.
ad::Value pinball_loss(ad::Tape& tape, const ad::Value& pred, const std::vector<double>& target,
                       const std::vector<double>& quantiles);

/// Mean squared error of every column of pred against target.
ad::Value mse_loss(ad::Tape& tape, const ad::Value& pred, const std::vector<double>& target);

} // namespace adcast::models
