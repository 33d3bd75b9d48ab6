#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "kgqa/dataset.hpp"

namespace kgqa {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Vocab {
    std::vector<std::string> tokens;  // index 0 is <unk>
    std::map<std::string, int> index;

    static Vocab build(const std::vector<std::string>& texts);
    int id(const std::string& token) const;
    std::vector<int> encode_text(const std::string& text) const;
    int size() const { return (int)tokens.size(); }
};

struct ModelConfig {
    int d_e = 100;    // token embedding width
    int d_h = 300;    // BiLSTM output width (concatenated directions; even)
    int d_s = 300;    // decoder state size
    int d_tau = 100;  // output-kind embedding width
    int max_actions = 4;
    double init_scale = 0.08;
    std::uint64_t seed = 1;
};

// Decoder fixed vocabulary: the 16 functions then <eos>.
inline constexpr int kEosToken = kNumFunctions;
inline constexpr int kFixedVocab = kNumFunctions + 1;
inline constexpr int kBosRow = kFixedVocab;  // extra row of w_func fed at t=1

/// Every learnable tensor. Gradients reuse the same layout.
struct TensorBag {
    Mat embedding;            // V x d_e
    Mat ef_wx, ef_wh;         // encoder forward cell, hidden d_h/2
    Vec ef_b;
    Mat eb_wx, eb_wh;         // encoder backward cell
    Vec eb_b;
    Mat d_wx, d_wh;           // decoder cell, input d_e + d_tau + d_h, hidden d_s
    Vec d_b;
    Mat w_attn;               // d_s x d_h
    Mat w_ptr;                // d_s x d_e
    Mat w_out;                // kFixedVocab x d_s
    Vec w_gate;               // d_h
    Mat w_func;               // (kFixedVocab + 1) x d_e; last row is <bos>
    Mat w_type;               // 2 x d_tau; row 0 = function, row 1 = argument

    template <typename Self, typename F>
    static void visit_impl(Self& self, F&& f) {
        f("embedding", self.embedding);
        f("ef_wx", self.ef_wx); f("ef_wh", self.ef_wh); f("ef_b", self.ef_b);
        f("eb_wx", self.eb_wx); f("eb_wh", self.eb_wh); f("eb_b", self.eb_b);
        f("d_wx", self.d_wx); f("d_wh", self.d_wh); f("d_b", self.d_b);
        f("w_attn", self.w_attn); f("w_ptr", self.w_ptr); f("w_out", self.w_out);
        f("w_gate", self.w_gate); f("w_func", self.w_func); f("w_type", self.w_type);
    }
    template <typename F>
    void visit(F&& f) { visit_impl(*this, f); }
    template <typename F>
    void visit(F&& f) const { visit_impl(*this, f); }

    void set_zero();
    static TensorBag zeros_like(const TensorBag& other);
    bool all_finite() const;
};

struct ModelParams {
    ModelConfig cfg;
    Vocab vocab;
    TensorBag t;

    static ModelParams init(const ModelConfig& cfg, Vocab vocab);
    void save(const std::string& path) const;
    static ModelParams load(const std::string& path);
};

using Gradients = TensorBag;

struct EncoderOutput {
    Mat H;   // n x d_h
    Mat EG;  // m x d_e, row i = mean embedding of argument i's label tokens
};

// H from one bidirectional recurrent pass; EG by mean pooling.
EncoderOutput encode(const ModelParams& p, const std::vector<int>& tokens,
                     const std::vector<std::vector<int>>& arg_tokens);

struct DecoderState {
    Vec h, c;  // zero-initialized at t = 0
};

DecoderState initial_decoder_state(const ModelParams& p);

struct StepDistribution {
    Vec p_fix;   // over the fixed vocabulary
    Vec p_dyn;   // over the m arguments
    Vec alpha;   // attention over encoder positions
    double gate; // P_t, probability of the fixed vocabulary
    Vec mixed;   // length kFixedVocab + m
};

// prev_token: -1 for <bos>, [0, kFixedVocab) fixed, >= kFixedVocab dynamic.
// prev_kind: 0 when the previous output was a function, 1 for an argument.
std::pair<StepDistribution, DecoderState> decode_step(const ModelParams& p,
                                                      const DecoderState& prev, int prev_token,
                                                      int prev_kind, const EncoderOutput& enc);

/// Grammar state tracked during decoding: masks type-invalid tokens and
/// assembles the action sequence incrementally.
class SequenceBuilder {
public:
    SequenceBuilder(const ArgumentSet& args, int max_actions);

    // Valid next decoder tokens (sorted ascending).
    std::vector<int> valid_tokens() const;
    void apply(int token);
    bool finished() const { return finished_; }
    const ActionSequence& sequence() const { return seq_; }
    int last_token() const { return last_token_; }
    int last_kind() const { return last_kind_; }

private:
    const ArgumentSet* args_;
    int max_actions_;
    std::set<Func> available_;
    AbstractState abstract_;
    ActionSequence seq_;
    int actions_done_ = 0;
    int open_func_ = -1;  // function index while arguments are pending
    std::vector<Artifact> open_args_;
    bool finished_ = false;
    int last_token_ = -1;
    int last_kind_ = 0;
};

/// One training item: encoder input ids, per-argument label token ids, and
/// (for teacher forcing) the target decoder token stream ending in <eos>.
struct CompiledExample {
    std::string question_id;
    std::vector<int> tokens;
    std::vector<std::vector<int>> arg_tokens;
    ArgumentSet args;
    std::vector<int> target;
};

// Target token stream for a gold sequence (throws when an argument is not in
// the argument set).
std::vector<int> compile_target(const ActionSequence& seq, const ArgumentSet& args);

// Teacher-forced negative log-likelihood of the example's target under the
// mixed distribution; accumulates gradients scaled by `scale` when grads is
// non-null.
double sequence_loss(const ModelParams& p, const CompiledExample& ex, Gradients* grads,
                     double scale);

std::vector<Candidate> beam_search(const ModelParams& p, const CompiledExample& ex, int beam,
                                   int n_best);

// Greedy reference decode used by tests (must equal beam_search with beam 1).
std::optional<Candidate> greedy_decode(const ModelParams& p, const CompiledExample& ex);

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<Eigen::ArrayXXd> m, v;  // aligned with TensorBag visit order

    void update(ModelParams& p, const Gradients& g);
};

// Teacher-forced pretraining; returns the mean loss per epoch. Throws on
// divergence (non-finite loss or parameters).
std::vector<double> pretrain(ModelParams& p, const std::vector<CompiledExample>& examples,
                             int epochs, double lr, std::uint64_t seed);

/// Per-question reward baselines: exponential moving average with a bonus for
/// full-reward episodes.
struct BaselineState {
    std::map<std::string, double> value;
    double decay = 0.9;
    double bonus = 0.5;
};

// Centered reward (R - B_q, plus bonus when R == 1); updates B_q in place.
double adaptive_reward(double reward, BaselineState& state, const std::string& question_id);

struct ReinforceResult {
    double reward = 0.0;
    double adjusted = 0.0;
    ActionSequence sampled;
};

ReinforceResult reinforce_step(ModelParams& p, const CompiledExample& ex,
                               const KnowledgeGraph& kg, const Answer& gold,
                               BaselineState& baseline, AdamState& adam, std::mt19937_64& rng,
                               const ExecOptions& opts = {});

// Max relative error between analytic gradients and central finite
// differences over >= n_samples randomly chosen parameters.
double gradient_check(ModelParams& p, const CompiledExample& ex, int n_samples, double h,
                      std::uint64_t seed);

}  // namespace kgqa
