#include "kgqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace kgqa {

// ---- Vocab ----

Vocab Vocab::build(const std::vector<std::string>& texts) {
    Vocab v;
    v.tokens.push_back("<unk>");
    v.index["<unk>"] = 0;
    for (const auto& text : texts) {
        for (const auto& tok : tokenize(text)) {
            if (v.index.emplace(tok, (int)v.tokens.size()).second) v.tokens.push_back(tok);
        }
    }
    return v;
}

int Vocab::id(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? 0 : it->second;
}

std::vector<int> Vocab::encode_text(const std::string& text) const {
    std::vector<int> out;
    for (const auto& tok : tokenize(text)) out.push_back(id(tok));
    return out;
}

// ---- TensorBag ----

void TensorBag::set_zero() {
    visit([](const char*, auto& t) { t.setZero(); });
}

TensorBag TensorBag::zeros_like(const TensorBag& other) {
    TensorBag g = other;
    g.set_zero();
    return g;
}

bool TensorBag::all_finite() const {
    bool ok = true;
    visit([&](const char*, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
}

// ---- Initialization / checkpoints ----

namespace {

void uniform_init(std::mt19937_64& rng, double scale, Mat& m) {
    constexpr double kInv = 1.0 / 9007199254740992.0;  // 2^-53
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            m(i, j) = ((double)(rng() >> 11) * kInv * 2.0 - 1.0) * scale;
}

void uniform_init(std::mt19937_64& rng, double scale, Vec& v) {
    constexpr double kInv = 1.0 / 9007199254740992.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = ((double)(rng() >> 11) * kInv * 2.0 - 1.0) * scale;
}

Vec sigmoid(const Vec& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vec softmax(const Vec& z) {
    const double mx = z.maxCoeff();
    Vec e = (z.array() - mx).exp();
    return e / e.sum();
}

// dlogits for y = softmax(z) given dL/dy.
Vec softmax_backward(const Vec& y, const Vec& dy) {
    const double dot = y.dot(dy);
    return y.cwiseProduct(dy.array().matrix() - Vec::Constant(y.size(), dot));
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Vocab vocab) {
    if (cfg.d_h % 2 != 0) throw Error("d_h must be even (two encoder directions)");
    ModelParams p;
    p.cfg = cfg;
    p.vocab = std::move(vocab);
    const int half = cfg.d_h / 2;
    const int d_in = cfg.d_e + cfg.d_tau + cfg.d_h;

    std::mt19937_64 rng(cfg.seed);
    auto& t = p.t;
    t.embedding.resize(p.vocab.size(), cfg.d_e);
    t.ef_wx.resize(4 * half, cfg.d_e);
    t.ef_wh.resize(4 * half, half);
    t.ef_b = Vec::Zero(4 * half);
    t.eb_wx.resize(4 * half, cfg.d_e);
    t.eb_wh.resize(4 * half, half);
    t.eb_b = Vec::Zero(4 * half);
    t.d_wx.resize(4 * cfg.d_s, d_in);
    t.d_wh.resize(4 * cfg.d_s, cfg.d_s);
    t.d_b = Vec::Zero(4 * cfg.d_s);
    t.w_attn.resize(cfg.d_s, cfg.d_h);
    t.w_ptr.resize(cfg.d_s, cfg.d_e);
    t.w_out.resize(kFixedVocab, cfg.d_s);
    t.w_gate = Vec::Zero(cfg.d_h);
    t.w_func.resize(kFixedVocab + 1, cfg.d_e);
    t.w_type.resize(2, cfg.d_tau);

    t.visit([&](const char* name, auto& tensor) {
        (void)name;
        uniform_init(rng, cfg.init_scale, tensor);
    });
    return p;
}

namespace {
constexpr char kCkptMagic[9] = "KGQAM001";
}

void ModelParams::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(kCkptMagic, 8);
    auto w_i64 = [&](std::int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    auto w_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    w_i64(cfg.d_e);
    w_i64(cfg.d_h);
    w_i64(cfg.d_s);
    w_i64(cfg.d_tau);
    w_i64(cfg.max_actions);
    w_f64(cfg.init_scale);
    w_i64((std::int64_t)cfg.seed);
    w_i64((std::int64_t)vocab.tokens.size());
    for (const auto& tok : vocab.tokens) {
        w_i64((std::int64_t)tok.size());
        out.write(tok.data(), (std::streamsize)tok.size());
    }
    t.visit([&](const char* name, const auto& tensor) {
        const std::string n = name;
        w_i64((std::int64_t)n.size());
        out.write(n.data(), (std::streamsize)n.size());
        w_i64(tensor.rows());
        w_i64(tensor.cols());
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  (std::streamsize)(sizeof(double) * (size_t)tensor.size()));
    });
}

ModelParams ModelParams::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kCkptMagic, 8))
        throw Error("bad checkpoint magic in " + path);
    auto r_i64 = [&]() {
        std::int64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    auto r_f64 = [&]() {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    ModelConfig cfg;
    cfg.d_e = (int)r_i64();
    cfg.d_h = (int)r_i64();
    cfg.d_s = (int)r_i64();
    cfg.d_tau = (int)r_i64();
    cfg.max_actions = (int)r_i64();
    cfg.init_scale = r_f64();
    cfg.seed = (std::uint64_t)r_i64();
    Vocab vocab;
    const auto n_tokens = r_i64();
    for (std::int64_t i = 0; i < n_tokens; ++i) {
        std::string tok((size_t)r_i64(), '\0');
        in.read(tok.data(), (std::streamsize)tok.size());
        vocab.index[tok] = (int)vocab.tokens.size();
        vocab.tokens.push_back(tok);
    }
    ModelParams p = ModelParams::init(cfg, std::move(vocab));
    p.t.visit([&](const char* name, auto& tensor) {
        const std::string expect = name;
        std::string got((size_t)r_i64(), '\0');
        in.read(got.data(), (std::streamsize)got.size());
        const auto rows = r_i64(), cols = r_i64();
        if (got != expect || rows != tensor.rows() || cols != tensor.cols())
            throw Error("checkpoint shape mismatch for tensor " + expect);
        in.read(reinterpret_cast<char*>(tensor.data()),
                (std::streamsize)(sizeof(double) * (size_t)tensor.size()));
    });
    if (!in) throw Error("truncated checkpoint: " + path);
    return p;
}

// ---- LSTM cell ----

namespace {

struct LstmStepCache {
    Vec i, f, g, o, c, h;
};

void lstm_forward(const Mat& wx, const Mat& wh, const Vec& b, const Vec& x, const Vec& h_prev,
                  const Vec& c_prev, LstmStepCache& out) {
    const Eigen::Index hdim = wh.cols();
    Vec z = wx * x + wh * h_prev + b;
    out.i = sigmoid(z.segment(0, hdim));
    out.f = sigmoid(z.segment(hdim, hdim));
    out.g = z.segment(2 * hdim, hdim).array().tanh().matrix();
    out.o = sigmoid(z.segment(3 * hdim, hdim));
    out.c = out.f.cwiseProduct(c_prev) + out.i.cwiseProduct(out.g);
    out.h = out.o.cwiseProduct(out.c.array().tanh().matrix());
}

// dh: gradient on h_t; dc: in/out cell-gradient carry. Outputs dx, dh_prev.
void lstm_backward(const Mat& wx, const Mat& wh, const Vec& x, const Vec& h_prev,
                   const Vec& c_prev, const LstmStepCache& cc, const Vec& dh, Vec& dc, Mat& dwx,
                   Mat& dwh, Vec& db, Vec& dx, Vec& dh_prev) {
    const Eigen::Index hdim = cc.h.size();
    const Vec tc = cc.c.array().tanh().matrix();
    const Vec do_ = dh.cwiseProduct(tc);
    const Vec dct = dc + dh.cwiseProduct(cc.o).cwiseProduct(
                             (1.0 - tc.array().square()).matrix());
    const Vec di = dct.cwiseProduct(cc.g);
    const Vec df = dct.cwiseProduct(c_prev);
    const Vec dg = dct.cwiseProduct(cc.i);
    dc = dct.cwiseProduct(cc.f);

    Vec dz(4 * hdim);
    dz.segment(0, hdim) = di.cwiseProduct(cc.i).cwiseProduct((1.0 - cc.i.array()).matrix());
    dz.segment(hdim, hdim) = df.cwiseProduct(cc.f).cwiseProduct((1.0 - cc.f.array()).matrix());
    dz.segment(2 * hdim, hdim) = dg.cwiseProduct((1.0 - cc.g.array().square()).matrix());
    dz.segment(3 * hdim, hdim) =
        do_.cwiseProduct(cc.o).cwiseProduct((1.0 - cc.o.array()).matrix());

    dwx.noalias() += dz * x.transpose();
    dwh.noalias() += dz * h_prev.transpose();
    db += dz;
    dx.noalias() = wx.transpose() * dz;
    dh_prev.noalias() = wh.transpose() * dz;
}

struct EncCache {
    std::vector<int> tokens;
    std::vector<std::vector<int>> arg_tokens;
    std::vector<LstmStepCache> fwd, bwd;
    Mat H;
    Mat EG;
};

void check_token(const ModelParams& p, int id) {
    if (id < 0 || id >= p.vocab.size()) throw Error("unknown token id " + std::to_string(id));
}

EncCache encoder_forward(const ModelParams& p, const std::vector<int>& tokens,
                         const std::vector<std::vector<int>>& arg_tokens) {
    if (tokens.empty()) throw Error("encode: empty token list");
    if (arg_tokens.empty()) throw Error("encode: empty argument set");
    for (int id : tokens) check_token(p, id);
    for (const auto& at : arg_tokens) {
        if (at.empty()) throw Error("encode: argument with no label tokens");
        for (int id : at) check_token(p, id);
    }
    const int n = (int)tokens.size();
    const int half = p.cfg.d_h / 2;
    EncCache enc;
    enc.tokens = tokens;
    enc.arg_tokens = arg_tokens;
    enc.fwd.resize((size_t)n);
    enc.bwd.resize((size_t)n);

    Vec h = Vec::Zero(half), c = Vec::Zero(half);
    for (int t = 0; t < n; ++t) {
        const Vec x = p.t.embedding.row(tokens[(size_t)t]).transpose();
        lstm_forward(p.t.ef_wx, p.t.ef_wh, p.t.ef_b, x, h, c, enc.fwd[(size_t)t]);
        h = enc.fwd[(size_t)t].h;
        c = enc.fwd[(size_t)t].c;
    }
    h.setZero();
    c.setZero();
    for (int t = n - 1; t >= 0; --t) {
        const Vec x = p.t.embedding.row(tokens[(size_t)t]).transpose();
        lstm_forward(p.t.eb_wx, p.t.eb_wh, p.t.eb_b, x, h, c, enc.bwd[(size_t)t]);
        h = enc.bwd[(size_t)t].h;
        c = enc.bwd[(size_t)t].c;
    }
    enc.H.resize(n, p.cfg.d_h);
    for (int t = 0; t < n; ++t) {
        enc.H.row(t).head(half) = enc.fwd[(size_t)t].h.transpose();
        enc.H.row(t).tail(half) = enc.bwd[(size_t)t].h.transpose();
    }
    enc.EG.resize((Eigen::Index)arg_tokens.size(), p.cfg.d_e);
    for (size_t i = 0; i < arg_tokens.size(); ++i) {
        Vec mean = Vec::Zero(p.cfg.d_e);
        for (int id : arg_tokens[i]) mean += p.t.embedding.row(id).transpose();
        enc.EG.row((Eigen::Index)i) = (mean / (double)arg_tokens[i].size()).transpose();
    }
    return enc;
}

// Accumulates encoder gradients given dH and dEG.
void encoder_backward(const ModelParams& p, const EncCache& enc, const Mat& dH, const Mat& dEG,
                      Gradients& g) {
    const int n = (int)enc.tokens.size();
    const int half = p.cfg.d_h / 2;

    Vec dh_carry = Vec::Zero(half), dc_carry = Vec::Zero(half);
    Vec dx(p.cfg.d_e), dh_prev(half);
    for (int t = n - 1; t >= 0; --t) {
        const Vec x = p.t.embedding.row(enc.tokens[(size_t)t]).transpose();
        const Vec h_prev = t > 0 ? enc.fwd[(size_t)t - 1].h : Vec::Zero(half);
        const Vec c_prev = t > 0 ? enc.fwd[(size_t)t - 1].c : Vec::Zero(half);
        const Vec dh = dH.row(t).head(half).transpose() + dh_carry;
        lstm_backward(p.t.ef_wx, p.t.ef_wh, x, h_prev, c_prev, enc.fwd[(size_t)t], dh, dc_carry,
                      g.ef_wx, g.ef_wh, g.ef_b, dx, dh_prev);
        g.embedding.row(enc.tokens[(size_t)t]) += dx.transpose();
        dh_carry = dh_prev;
    }
    dh_carry.setZero();
    dc_carry.setZero();
    for (int t = 0; t < n; ++t) {
        const Vec x = p.t.embedding.row(enc.tokens[(size_t)t]).transpose();
        const Vec h_prev = t < n - 1 ? enc.bwd[(size_t)t + 1].h : Vec::Zero(half);
        const Vec c_prev = t < n - 1 ? enc.bwd[(size_t)t + 1].c : Vec::Zero(half);
        const Vec dh = dH.row(t).tail(half).transpose() + dh_carry;
        lstm_backward(p.t.eb_wx, p.t.eb_wh, x, h_prev, c_prev, enc.bwd[(size_t)t], dh, dc_carry,
                      g.eb_wx, g.eb_wh, g.eb_b, dx, dh_prev);
        g.embedding.row(enc.tokens[(size_t)t]) += dx.transpose();
        dh_carry = dh_prev;
    }
    for (size_t i = 0; i < enc.arg_tokens.size(); ++i) {
        const double inv = 1.0 / (double)enc.arg_tokens[i].size();
        for (int id : enc.arg_tokens[i])
            g.embedding.row(id) += dEG.row((Eigen::Index)i) * inv;
    }
}

struct DecCache {
    int prev_token = -1;
    int prev_kind = 0;
    Vec s_prev, c_prev;
    Vec e, alpha, ctx, x;
    LstmStepCache lstm;
    Vec p_fix, p_dyn, mixed;
    double gate = 0.0;
    int chosen = -1;
    std::vector<int> valid;  // empty = every token
};

Vec prev_output_embedding(const ModelParams& p, const EncCache& enc, int prev_token) {
    if (prev_token < 0) return p.t.w_func.row(kBosRow).transpose();
    if (prev_token < kFixedVocab) return p.t.w_func.row(prev_token).transpose();
    return enc.EG.row(prev_token - kFixedVocab).transpose();
}

DecCache decoder_forward_step(const ModelParams& p, const EncCache& enc, const Vec& s_prev,
                              const Vec& c_prev, int prev_token, int prev_kind) {
    DecCache d;
    d.prev_token = prev_token;
    d.prev_kind = prev_kind;
    d.s_prev = s_prev;
    d.c_prev = c_prev;

    d.e = enc.H * (p.t.w_attn.transpose() * s_prev);
    d.alpha = softmax(d.e);
    d.ctx = enc.H.transpose() * d.alpha;

    const Vec o_prev = prev_output_embedding(p, enc, prev_token);
    const Vec tau = p.t.w_type.row(prev_kind).transpose();
    d.x.resize(p.cfg.d_e + p.cfg.d_tau + p.cfg.d_h);
    d.x << o_prev, tau, d.ctx;
    lstm_forward(p.t.d_wx, p.t.d_wh, p.t.d_b, d.x, s_prev, c_prev, d.lstm);

    const Vec& s = d.lstm.h;
    d.p_fix = softmax(p.t.w_out * s);
    const Vec u = p.t.w_ptr.transpose() * s;
    d.p_dyn = softmax(enc.EG * u);
    d.gate = sigmoid(p.t.w_gate.dot(d.ctx));

    d.mixed.resize(kFixedVocab + d.p_dyn.size());
    d.mixed.head(kFixedVocab) = d.gate * d.p_fix;
    d.mixed.tail(d.p_dyn.size()) = (1.0 - d.gate) * d.p_dyn;
    return d;
}

// Masked cross-entropy over the mixture: -log P(chosen) + log sum_valid P.
double step_loss(const DecCache& d) {
    double z = 0.0;
    if (d.valid.empty()) {
        z = d.mixed.sum();
    } else {
        for (int v : d.valid) z += d.mixed((Eigen::Index)v);
    }
    return -std::log(d.mixed((Eigen::Index)d.chosen)) + std::log(z);
}

void decoder_backward(const ModelParams& p, const EncCache& enc, std::vector<DecCache>& steps,
                      double scale, Gradients& g, Mat& dH, Mat& dEG) {
    const Eigen::Index n = enc.H.rows();
    Vec ds_carry = Vec::Zero(p.cfg.d_s);
    Vec dc_carry = Vec::Zero(p.cfg.d_s);

    for (int t = (int)steps.size() - 1; t >= 0; --t) {
        DecCache& d = steps[(size_t)t];
        const Eigen::Index m = d.p_dyn.size();

        // Mixture backward.
        double z = 0.0;
        if (d.valid.empty()) {
            z = d.mixed.sum();
        } else {
            for (int v : d.valid) z += d.mixed((Eigen::Index)v);
        }
        Vec dP = Vec::Zero(d.mixed.size());
        if (d.valid.empty()) {
            dP.array() += scale / z;
        } else {
            for (int v : d.valid) dP((Eigen::Index)v) += scale / z;
        }
        dP((Eigen::Index)d.chosen) -= scale / d.mixed((Eigen::Index)d.chosen);

        const Vec dp_fix_raw = dP.head(kFixedVocab);
        const Vec dp_dyn_raw = dP.tail(m);
        double dgate = dp_fix_raw.dot(d.p_fix) - dp_dyn_raw.dot(d.p_dyn);
        const Vec dp_fix = dp_fix_raw * d.gate;
        const Vec dp_dyn = dp_dyn_raw * (1.0 - d.gate);

        // Output heads.
        const Vec& s = d.lstm.h;
        const Vec dlogits_fix = softmax_backward(d.p_fix, dp_fix);
        g.w_out.noalias() += dlogits_fix * s.transpose();
        Vec ds = ds_carry + p.t.w_out.transpose() * dlogits_fix;

        const Vec dlogits_dyn = softmax_backward(d.p_dyn, dp_dyn);
        const Vec u = p.t.w_ptr.transpose() * s;
        dEG.noalias() += dlogits_dyn * u.transpose();
        const Vec du = enc.EG.transpose() * dlogits_dyn;
        g.w_ptr.noalias() += s * du.transpose();
        ds.noalias() += p.t.w_ptr * du;

        // Decoder LSTM.
        Vec dx(d.x.size()), ds_prev(p.cfg.d_s);
        lstm_backward(p.t.d_wx, p.t.d_wh, d.x, d.s_prev, d.c_prev, d.lstm, ds, dc_carry, g.d_wx,
                      g.d_wh, g.d_b, dx, ds_prev);

        const Vec do_prev = dx.head(p.cfg.d_e);
        const Vec dtau = dx.segment(p.cfg.d_e, p.cfg.d_tau);
        Vec dctx = dx.tail(p.cfg.d_h);

        // Gate path: gate = sigmoid(w_gate . ctx).
        const double dgate_z = dgate * d.gate * (1.0 - d.gate);
        g.w_gate += dgate_z * d.ctx;
        dctx += dgate_z * p.t.w_gate;

        // Attention: ctx = H^T alpha; e = H (W_a^T s_prev).
        const Vec dalpha = enc.H * dctx;
        for (Eigen::Index i = 0; i < n; ++i) dH.row(i) += d.alpha(i) * dctx.transpose();
        const Vec de = softmax_backward(d.alpha, dalpha);
        const Vec hde = enc.H.transpose() * de;  // sum_i de_i h_i
        g.w_attn.noalias() += d.s_prev * hde.transpose();
        const Vec ds_attn = p.t.w_attn * hde;
        const Vec was = p.t.w_attn.transpose() * d.s_prev;
        for (Eigen::Index i = 0; i < n; ++i) dH.row(i) += de(i) * was.transpose();

        // Previous-output embedding and kind rows.
        if (d.prev_token < 0) {
            g.w_func.row(kBosRow) += do_prev.transpose();
        } else if (d.prev_token < kFixedVocab) {
            g.w_func.row(d.prev_token) += do_prev.transpose();
        } else {
            dEG.row(d.prev_token - kFixedVocab) += do_prev.transpose();
        }
        g.w_type.row(d.prev_kind) += dtau.transpose();

        ds_carry = ds_prev + ds_attn;
    }
}

}  // namespace

// ---- Public inference API ----

EncoderOutput encode(const ModelParams& p, const std::vector<int>& tokens,
                     const std::vector<std::vector<int>>& arg_tokens) {
    auto enc = encoder_forward(p, tokens, arg_tokens);
    return EncoderOutput{std::move(enc.H), std::move(enc.EG)};
}

DecoderState initial_decoder_state(const ModelParams& p) {
    return DecoderState{Vec::Zero(p.cfg.d_s), Vec::Zero(p.cfg.d_s)};
}

std::pair<StepDistribution, DecoderState> decode_step(const ModelParams& p,
                                                      const DecoderState& prev, int prev_token,
                                                      int prev_kind, const EncoderOutput& enc) {
    EncCache cache;
    cache.H = enc.H;
    cache.EG = enc.EG;
    const DecCache d =
        decoder_forward_step(p, cache, prev.h, prev.c, prev_token, prev_kind);
    StepDistribution dist;
    dist.p_fix = d.p_fix;
    dist.p_dyn = d.p_dyn;
    dist.alpha = d.alpha;
    dist.gate = d.gate;
    dist.mixed = d.mixed;
    return {std::move(dist), DecoderState{d.lstm.h, d.lstm.c}};
}

// ---- SequenceBuilder ----

SequenceBuilder::SequenceBuilder(const ArgumentSet& args, int max_actions)
    : args_(&args), max_actions_(max_actions), available_(available_functions(args)) {}

std::vector<int> SequenceBuilder::valid_tokens() const {
    std::vector<int> out;
    if (finished_) return out;
    if (open_func_ >= 0) {
        const auto& sig = signature((Func)open_func_);
        const ArtifactKind need = sig.arg_kinds[open_args_.size()];
        for (size_t i = 0; i < args_->size(); ++i)
            if ((*args_)[i].kind == need) out.push_back(kFixedVocab + (int)i);
        return out;
    }
    if (actions_done_ >= 1 && is_final_state(abstract_)) out.push_back(kEosToken);
    if (actions_done_ < max_actions_) {
        for (const auto& sig : function_table()) {
            if (!available_.count(sig.func)) continue;
            try {
                AbstractState next = step_abstract(abstract_, sig.func);
                if (can_reach_final(next, max_actions_ - actions_done_ - 1, available_))
                    out.push_back((int)sig.func);
            } catch (const Error&) {
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void SequenceBuilder::apply(int token) {
    last_token_ = token;
    if (token == kEosToken) {
        finished_ = true;
        last_kind_ = 0;
        return;
    }
    if (token < kNumFunctions) {
        last_kind_ = 0;
        const auto& sig = signature((Func)token);
        if (sig.arg_kinds.empty()) {
            seq_.actions.push_back(Action{(Func)token, {}});
            abstract_ = step_abstract(abstract_, (Func)token);
            ++actions_done_;
        } else {
            open_func_ = token;
            open_args_.clear();
        }
        return;
    }
    // Dynamic token: one argument of the open action.
    last_kind_ = 1;
    if (open_func_ < 0) throw Error("argument token outside an action");
    open_args_.push_back((*args_)[(size_t)(token - kFixedVocab)]);
    const auto& sig = signature((Func)open_func_);
    if (open_args_.size() == sig.arg_kinds.size()) {
        seq_.actions.push_back(Action{(Func)open_func_, open_args_});
        abstract_ = step_abstract(abstract_, (Func)open_func_);
        ++actions_done_;
        open_func_ = -1;
        open_args_.clear();
    }
}

// ---- Teacher-forced loss ----

std::vector<int> compile_target(const ActionSequence& seq, const ArgumentSet& args) {
    std::vector<int> out;
    for (const auto& action : seq.actions) {
        out.push_back((int)action.func);
        for (const auto& a : action.args) {
            const int idx = args.find(a.kind, a.id);
            if (idx < 0)
                throw Error("target argument not present in argument set: " + a.id);
            out.push_back(kFixedVocab + idx);
        }
    }
    out.push_back(kEosToken);
    return out;
}

namespace {

double run_path(const ModelParams& p, const EncCache& enc, const std::vector<int>& chosen,
                std::vector<DecCache>* caches) {
    Vec s = Vec::Zero(p.cfg.d_s), c = Vec::Zero(p.cfg.d_s);
    int prev_token = -1, prev_kind = 0;
    double loss = 0.0;
    for (int tok : chosen) {
        DecCache d = decoder_forward_step(p, enc, s, c, prev_token, prev_kind);
        d.chosen = tok;
        loss += step_loss(d);
        s = d.lstm.h;
        c = d.lstm.c;
        prev_token = tok;
        prev_kind = tok < kFixedVocab ? 0 : 1;
        if (caches) caches->push_back(std::move(d));
    }
    return loss;
}

}  // namespace

double sequence_loss(const ModelParams& p, const CompiledExample& ex, Gradients* grads,
                     double scale) {
    const EncCache enc = encoder_forward(p, ex.tokens, ex.arg_tokens);
    if (ex.target.empty()) throw Error("example has no target sequence");
    std::vector<DecCache> caches;
    const double loss = run_path(p, enc, ex.target, grads ? &caches : nullptr);
    if (grads) {
        Mat dH = Mat::Zero(enc.H.rows(), enc.H.cols());
        Mat dEG = Mat::Zero(enc.EG.rows(), enc.EG.cols());
        decoder_backward(p, enc, caches, scale, *grads, dH, dEG);
        encoder_backward(p, enc, dH, dEG, *grads);
    }
    return loss;
}

// ---- Beam search ----

namespace {

struct Hypothesis {
    DecoderState state;
    SequenceBuilder builder;
    double logp = 0.0;
    std::vector<int> tokens;
};

}  // namespace

std::vector<Candidate> beam_search(const ModelParams& p, const CompiledExample& ex, int beam,
                                   int n_best) {
    if (beam < n_best || n_best < 1) throw Error("beam_search: need beam >= n_best >= 1");
    const EncCache enc = encoder_forward(p, ex.tokens, ex.arg_tokens);
    const int max_tokens = p.cfg.max_actions * 4 + 1;

    std::vector<Hypothesis> live;
    live.push_back(Hypothesis{initial_decoder_state(p), SequenceBuilder(ex.args, p.cfg.max_actions),
                              0.0, {}});
    struct Finished {
        double norm;
        std::vector<int> tokens;
        ActionSequence seq;
    };
    std::vector<Finished> done;

    for (int step = 0; step < max_tokens && !live.empty(); ++step) {
        struct Expansion {
            double logp;
            size_t parent;
            int token;
        };
        std::vector<Expansion> expansions;
        std::vector<DecoderState> next_states(live.size());
        for (size_t i = 0; i < live.size(); ++i) {
            const auto valid = live[i].builder.valid_tokens();
            if (valid.empty()) continue;
            const DecCache d =
                decoder_forward_step(p, enc, live[i].state.h, live[i].state.c,
                                     live[i].builder.last_token(), live[i].builder.last_kind());
            next_states[i] = DecoderState{d.lstm.h, d.lstm.c};
            double z = 0.0;
            for (int v : valid) z += d.mixed((Eigen::Index)v);
            for (int v : valid) {
                const double lp = live[i].logp + std::log(d.mixed((Eigen::Index)v) / z);
                expansions.push_back(Expansion{lp, i, v});
            }
        }
        std::sort(expansions.begin(), expansions.end(), [&](const auto& a, const auto& b) {
            if (a.logp != b.logp) return a.logp > b.logp;
            // Deterministic tie-break on the token path.
            const auto& ta = live[a.parent].tokens;
            const auto& tb = live[b.parent].tokens;
            if (ta != tb) return ta < tb;
            return a.token < b.token;
        });
        std::vector<Hypothesis> next;
        int taken = 0;  // finished hypotheses occupy their beam slot
        for (const auto& exp : expansions) {
            if (taken >= beam) break;
            ++taken;
            Hypothesis h = live[exp.parent];
            h.state = next_states[exp.parent];
            h.logp = exp.logp;
            h.tokens.push_back(exp.token);
            h.builder.apply(exp.token);
            if (h.builder.finished()) {
                done.push_back(Finished{h.logp / (double)h.tokens.size(), h.tokens,
                                        h.builder.sequence()});
            } else {
                next.push_back(std::move(h));
            }
        }
        live = std::move(next);
    }

    std::sort(done.begin(), done.end(), [](const Finished& a, const Finished& b) {
        if (a.norm != b.norm) return a.norm > b.norm;
        return serialize_sequence(a.seq) < serialize_sequence(b.seq);
    });
    std::vector<Candidate> out;
    std::set<std::string> seen;
    for (const auto& f : done) {
        if (!seen.insert(serialize_sequence(f.seq)).second) continue;
        out.push_back(Candidate{f.seq, f.norm});
        if ((int)out.size() >= n_best) break;
    }
    return out;
}

std::optional<Candidate> greedy_decode(const ModelParams& p, const CompiledExample& ex) {
    const EncoderOutput enc = encode(p, ex.tokens, ex.arg_tokens);
    DecoderState state = initial_decoder_state(p);
    SequenceBuilder builder(ex.args, p.cfg.max_actions);
    const int max_tokens = p.cfg.max_actions * 4 + 1;
    double logp = 0.0;
    int emitted = 0;
    for (int step = 0; step < max_tokens; ++step) {
        const auto valid = builder.valid_tokens();
        if (valid.empty()) return std::nullopt;
        auto [dist, next] =
            decode_step(p, state, builder.last_token(), builder.last_kind(), enc);
        double z = 0.0;
        for (int v : valid) z += dist.mixed((Eigen::Index)v);
        int best = valid[0];
        for (int v : valid)
            if (dist.mixed((Eigen::Index)v) > dist.mixed((Eigen::Index)best)) best = v;
        logp += std::log(dist.mixed((Eigen::Index)best) / z);
        ++emitted;
        builder.apply(best);
        state = next;
        if (builder.finished())
            return Candidate{builder.sequence(), logp / (double)emitted};
    }
    return std::nullopt;
}

// ---- Optimization ----

void AdamState::update(ModelParams& p, const Gradients& g) {
    std::vector<Eigen::Map<Eigen::ArrayXd>> params;
    std::vector<Eigen::Map<const Eigen::ArrayXd>> grads;
    p.t.visit([&](const char*, auto& t) {
        params.push_back(Eigen::Map<Eigen::ArrayXd>(t.data(), t.size()));
    });
    const_cast<Gradients&>(g).visit([&](const char*, auto& t) {
        grads.push_back(Eigen::Map<const Eigen::ArrayXd>(t.data(), t.size()));
    });
    if (m.empty()) {
        for (const auto& pa : params) {
            m.emplace_back(Eigen::ArrayXXd::Zero(pa.size(), 1));
            v.emplace_back(Eigen::ArrayXXd::Zero(pa.size(), 1));
        }
    }
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, (double)step);
    const double bc2 = 1.0 - std::pow(beta2, (double)step);
    for (size_t i = 0; i < params.size(); ++i) {
        auto mi = m[i].col(0);
        auto vi = v[i].col(0);
        mi = beta1 * mi + (1.0 - beta1) * grads[i];
        vi = beta2 * vi + (1.0 - beta2) * grads[i].square();
        params[i] -= lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
    }
}

std::vector<double> pretrain(ModelParams& p, const std::vector<CompiledExample>& examples,
                             int epochs, double lr, std::uint64_t seed) {
    if (examples.empty()) throw Error("pretrain: no training examples");
    std::mt19937_64 rng(seed);
    AdamState adam;
    adam.lr = lr;
    Gradients grads = Gradients::zeros_like(p.t);
    std::vector<double> losses;
    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (size_t idx : order) {
            grads.set_zero();
            const double loss = sequence_loss(p, examples[idx], &grads, 1.0);
            if (!std::isfinite(loss))
                throw Error("pretrain diverged (non-finite loss) on example " +
                            examples[idx].question_id);
            adam.update(p, grads);
            total += loss;
        }
        if (!p.t.all_finite()) throw Error("pretrain diverged (non-finite parameters)");
        losses.push_back(total / (double)examples.size());
    }
    return losses;
}

double adaptive_reward(double reward, BaselineState& state, const std::string& question_id) {
    double& b = state.value[question_id];  // inserts 0 on first visit
    double adjusted = reward - b;
    if (reward == 1.0) adjusted += state.bonus;
    b = state.decay * b + (1.0 - state.decay) * reward;
    return adjusted;
}

ReinforceResult reinforce_step(ModelParams& p, const CompiledExample& ex,
                               const KnowledgeGraph& kg, const Answer& gold,
                               BaselineState& baseline, AdamState& adam, std::mt19937_64& rng,
                               const ExecOptions& opts) {
    const EncCache enc = encoder_forward(p, ex.tokens, ex.arg_tokens);
    SequenceBuilder builder(ex.args, p.cfg.max_actions);
    std::vector<DecCache> caches;
    Vec s = Vec::Zero(p.cfg.d_s), c = Vec::Zero(p.cfg.d_s);
    const int max_tokens = p.cfg.max_actions * 4 + 1;
    constexpr double kInv = 1.0 / 9007199254740992.0;  // 2^-53

    for (int step = 0; step < max_tokens && !builder.finished(); ++step) {
        const auto valid = builder.valid_tokens();
        if (valid.empty()) break;
        DecCache d =
            decoder_forward_step(p, enc, s, c, builder.last_token(), builder.last_kind());
        double z = 0.0;
        for (int v : valid) z += d.mixed((Eigen::Index)v);
        const double u = (double)(rng() >> 11) * kInv * z;
        double acc = 0.0;
        int chosen = valid.back();
        for (int v : valid) {
            acc += d.mixed((Eigen::Index)v);
            if (u < acc) {
                chosen = v;
                break;
            }
        }
        d.chosen = chosen;
        d.valid = valid;
        s = d.lstm.h;
        c = d.lstm.c;
        caches.push_back(std::move(d));
        builder.apply(chosen);
    }

    ReinforceResult res;
    if (!builder.finished() || builder.sequence().actions.empty()) return res;  // reward 0
    res.sampled = builder.sequence();
    try {
        res.reward = f1(execute(kg, res.sampled, opts), gold);
    } catch (const Error&) {
        res.reward = 0.0;
    }
    res.adjusted = adaptive_reward(res.reward, baseline, ex.question_id);
    if (res.adjusted != 0.0) {
        Gradients grads = Gradients::zeros_like(p.t);
        Mat dH = Mat::Zero(enc.H.rows(), enc.H.cols());
        Mat dEG = Mat::Zero(enc.EG.rows(), enc.EG.cols());
        decoder_backward(p, enc, caches, res.adjusted, grads, dH, dEG);
        encoder_backward(p, enc, dH, dEG, grads);
        adam.update(p, grads);
    }
    return res;
}

double gradient_check(ModelParams& p, const CompiledExample& ex, int n_samples, double h,
                      std::uint64_t seed) {
    Gradients grads = Gradients::zeros_like(p.t);
    sequence_loss(p, ex, &grads, 1.0);

    std::vector<std::pair<double*, Eigen::Index>> param_spans, grad_spans;
    p.t.visit([&](const char*, auto& t) { param_spans.push_back({t.data(), t.size()}); });
    grads.visit([&](const char*, auto& t) { grad_spans.push_back({t.data(), t.size()}); });
    Eigen::Index total = 0;
    for (const auto& [ptr, sz] : param_spans) total += sz;

    std::mt19937_64 rng(seed);
    double max_rel = 0.0;
    for (int k = 0; k < n_samples; ++k) {
        Eigen::Index flat = (Eigen::Index)(rng() % (std::uint64_t)total);
        size_t tensor = 0;
        while (flat >= param_spans[tensor].second) {
            flat -= param_spans[tensor].second;
            ++tensor;
        }
        double* slot = param_spans[tensor].first + flat;
        const double analytic = *(grad_spans[tensor].first + flat);
        const double orig = *slot;
        *slot = orig + h;
        const double lp = sequence_loss(p, ex, nullptr, 1.0);
        *slot = orig - h;
        const double lm = sequence_loss(p, ex, nullptr, 1.0);
        *slot = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

}  // namespace kgqa
