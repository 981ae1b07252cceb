#include "osd/vre.hpp"

#include <cmath>
#include <stdexcept>

namespace osd {

using ad::Var;

namespace {
std::atomic<int64_t> g_distance_evals{0};
}

int64_t distance_eval_count() { return g_distance_evals.load(); }
void reset_distance_eval_count() { g_distance_evals.store(0); }

CodeDictionary CodeDictionary::create(ParamStore& ps, const std::string& name, int N, int d, Rng& rng) {
    if (N < 2) throw std::invalid_argument("CodeDictionary: N must be >= 2");
    CodeDictionary c;
    c.param = name;
    c.N = N;
    c.d = d;
    c.usage.assign(static_cast<size_t>(N), 0);
    ps.create(name, rng.uniform_tensor({N, d}, -1.0 / N, 1.0 / N));
    return c;
}

void CodeDictionary::count_usage(const std::vector<int>& tokens) {
    for (int q : tokens) usage[static_cast<size_t>(q)]++;
}

VreEncoder VreEncoder::create(ParamStore& ps, const std::string& prefix, const VreConfig& cfg, Rng& rng) {
    VreEncoder e;
    e.K = cfg.K;
    e.d = cfg.d;
    e.grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cfg.K))));
    if (e.grid * e.grid != cfg.K) throw std::invalid_argument("VreEncoder: K must be a perfect square");
    e.c1 = Conv2dLayer::create(ps, prefix + ".c1", 3, 32, 3, 2, 1, rng);
    e.c2 = Conv2dLayer::create(ps, prefix + ".c2", 32, 64, 3, 2, 1, rng);
    e.c3 = Conv2dLayer::create(ps, prefix + ".c3", 64, cfg.d, 3, 2, 1, rng);
    e.attn = SelfAttention::create(ps, prefix + ".attn", cfg.d, rng);
    return e;
}

Var VreEncoder::forward(Binder& bind, Var image, Tensor* pre_attn_grid, Tensor* attn_matrix) const {
    const Tensor& im = image.val();
    if (im.rank() != 3 || im.dim(0) != 3) throw std::invalid_argument("VreEncoder: expected [3,H,W] image");
    if (im.dim(1) != grid * 8 || im.dim(2) != grid * 8)
        throw std::invalid_argument("VreEncoder: image size " + shape_str(im.shape) + " does not match configured K");
    Var h = ad::silu(c1.forward(bind, image));
    h = ad::silu(c2.forward(bind, h));
    h = c3.forward(bind, h);  // [d, grid, grid]
    if (pre_attn_grid) *pre_attn_grid = h.val();
    Var seq = ad::transpose(ad::reshape(h, {d, K}));  // [K, d]
    return attn.forward(bind, seq, attn_matrix);
}

VreDecoder VreDecoder::create(ParamStore& ps, const std::string& prefix, const VreConfig& cfg, Rng& rng) {
    VreDecoder dec;
    dec.d = cfg.d;
    dec.grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cfg.K))));
    dec.c1 = Conv2dLayer::create(ps, prefix + ".c1", cfg.d, 64, 3, 1, 1, rng);
    dec.c2 = Conv2dLayer::create(ps, prefix + ".c2", 64, 32, 3, 1, 1, rng);
    dec.c3 = Conv2dLayer::create(ps, prefix + ".c3", 32, 16, 3, 1, 1, rng);
    dec.c4 = Conv2dLayer::create(ps, prefix + ".c4", 16, 3, 3, 1, 1, rng);
    return dec;
}

Var VreDecoder::forward(Binder& bind, Var features) const {
    Var g = ad::reshape(ad::transpose(features), {d, grid, grid});
    Var h = ad::silu(c1.forward(bind, g));
    h = ad::silu(c2.forward(bind, ad::upsample_nearest2x(h)));
    h = ad::silu(c3.forward(bind, ad::upsample_nearest2x(h)));
    return ad::sigmoid(c4.forward(bind, ad::upsample_nearest2x(h)));
}

VreModel VreModel::create(ParamStore& ps, const VreConfig& cfg, Rng& rng) {
    VreModel m;
    m.cfg = cfg;
    m.enc_hq = VreEncoder::create(ps, "vre.hq.enc", cfg, rng);
    m.dec_hq = VreDecoder::create(ps, "vre.hq.dec", cfg, rng);
    m.dict_hq = CodeDictionary::create(ps, "vre.hq.dict", cfg.N, cfg.d, rng);
    m.enc_lq = VreEncoder::create(ps, "vre.lq.enc", cfg, rng);
    m.dec_lq = VreDecoder::create(ps, "vre.lq.dec", cfg, rng);
    m.dict_lq = CodeDictionary::create(ps, "vre.lq.dict", cfg.N, cfg.d, rng);
    return m;
}

std::vector<int> match(const Tensor& features, const Tensor& dict) {
    if (features.rank() != 2 || dict.rank() != 2 || features.dim(1) != dict.dim(1))
        throw std::invalid_argument("match: feature width does not match dictionary");
    const int K = features.dim(0), N = dict.dim(0), d = dict.dim(1);
    std::vector<int> tokens(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        double best = 0;
        int best_q = -1;
        for (int q = 0; q < N; ++q) {
            double dist = 0;
            for (int j = 0; j < d; ++j) {
                const double diff = features.at(k, j) - dict.at(q, j);
                dist += diff * diff;
            }
            g_distance_evals.fetch_add(1, std::memory_order_relaxed);
            if (best_q < 0 || dist < best) {  // strict <: ties keep the lowest index
                best = dist;
                best_q = q;
            }
        }
        tokens[static_cast<size_t>(k)] = best_q;
    }
    return tokens;
}

Tensor embed(const std::vector<int>& tokens, const Tensor& dict) {
    const int N = dict.dim(0), d = dict.dim(1);
    Tensor out({static_cast<int>(tokens.size()), d});
    for (size_t k = 0; k < tokens.size(); ++k) {
        const int q = tokens[k];
        if (q < 0 || q >= N) throw std::out_of_range("embed: token " + std::to_string(q) + " out of [0,N)");
        std::copy(dict.data.begin() + static_cast<int64_t>(q) * d, dict.data.begin() + static_cast<int64_t>(q + 1) * d,
                  out.data.begin() + static_cast<int64_t>(k) * d);
    }
    return out;
}

Tensor vre_forward(const Tensor& image, const VreModel& model, ParamStore& ps) {
    ad::Tape tape;
    Binder bind(tape, ps);
    Tensor features = model.enc_lq.forward(bind, bind.input(image)).val();
    return embed(match(features, ps.value(model.dict_lq.param)), ps.value(model.dict_lq.param));
}

Var straight_through(Var z, Var z_q) {
    if (z.val().shape != z_q.val().shape) throw std::invalid_argument("straight_through: shape mismatch");
    return ad::add(z, ad::stopgrad(ad::sub(z_q, z)));
}

Var quantization_loss(Var z, Var z_q, double beta) {
    if (beta < 0) throw std::invalid_argument("quantization_loss: beta must be >= 0");
    Var codebook = ad::sum(ad::square(ad::sub(ad::stopgrad(z), z_q)));
    Var commit = ad::sum(ad::square(ad::sub(z, ad::stopgrad(z_q))));
    return ad::axpy(codebook, commit, beta);
}

double quantization_loss(const Tensor& z, const Tensor& z_q, double beta) {
    ad::Tape tape;
    return quantization_loss(tape.leaf(z), tape.leaf(z_q), beta).val().data[0];
}

Var association_loss(Var z_hq, Var z_lq, double temperature) {
    if (temperature <= 0) throw std::invalid_argument("association_loss: temperature must be positive");
    const Tensor& a = z_hq.val();
    const Tensor& b = z_lq.val();
    if (a.shape != b.shape || a.rank() != 2) throw std::invalid_argument("association_loss: shape mismatch");
    auto normalize = [](Var x) {
        Var inv = ad::pow_const(ad::affine(ad::row_sumsq(x), 1.0, 1e-24), -0.5);
        return ad::rows_scale(x, inv);
    };
    Var nh = normalize(z_hq);
    Var nl = normalize(z_lq);
    Var logits = ad::affine(ad::matmul(nh, nl, false, true), 1.0 / temperature, 0.0);
    Var ce_h = ad::neg(ad::mean(ad::log_(ad::diag(ad::softmax_rows(logits)))));
    Var ce_l = ad::neg(ad::mean(ad::log_(ad::diag(ad::softmax_rows(ad::transpose(logits))))));
    return ad::affine(ad::add(ce_h, ce_l), 0.5, 0.0);
}

double association_loss(const Tensor& z_hq, const Tensor& z_lq, double temperature) {
    ad::Tape tape;
    Var a = tape.leaf(z_hq), b = tape.leaf(z_lq);
    return association_loss(a, b, temperature).val().data[0];
}

ReconLossGraph reconstruction_losses(Binder& bind, Var target, Var recon, const FeatureExtractor& feat,
                                     const PatchDiscriminator& disc) {
    if (target.val().shape != recon.val().shape) throw std::invalid_argument("reconstruction_losses: shape mismatch");
    ReconLossGraph g;
    g.l1 = ad::l1(target, recon);
    auto ft = feat.stages(bind, target);
    auto fr = feat.stages(bind, recon);
    Var per;
    for (size_t i = 1; i < ft.size(); ++i) {
        Var stage = ad::mean(ad::square(ad::sub(ft[i], fr[i])));
        per = (i == 1) ? stage : ad::add(per, stage);
    }
    g.per = per;
    const double eps = 1e-12;
    Var d_real = disc.prob(bind, target);
    Var d_fake = disc.prob(bind, recon);
    g.dis = ad::add(ad::log_(ad::affine(d_real, 1.0, eps)),
                    ad::log_(ad::affine(ad::neg(d_fake), 1.0, 1.0 + eps)));
    return g;
}

LossReport reconstruction_losses(const Tensor& target, const Tensor& recon, const FeatureExtractor& feat,
                                 const PatchDiscriminator& disc, ParamStore& ps) {
    ad::Tape tape;
    Binder bind(tape, ps);
    auto g = reconstruction_losses(bind, bind.input(target), bind.input(recon), feat, disc);
    LossReport r;
    r.set("l1", g.l1.val().data[0]);
    r.set("per", g.per.val().data[0]);
    r.set("dis", g.dis.val().data[0]);
    return r;
}

double stage1_total(const LossReport& components, double lambda_per, double lambda_dis, double lambda_assoc) {
    double total = components.at("l1") + lambda_per * components.at("per") + lambda_dis * components.at("dis") +
                   components.at("quant");
    if (lambda_assoc != 0.0) total += lambda_assoc * components.at("assoc");
    return total;
}

InspectionBundle inspect(const VreModel& model, const std::vector<Tensor>& images, ParamStore& ps, int num_maps) {
    if (images.empty()) throw std::invalid_argument("inspect: need at least one image");
    InspectionBundle out;
    const int grid = model.enc_lq.grid;
    out.usage.assign(static_cast<size_t>(model.cfg.N), 0);

    for (size_t i = 0; i < images.size(); ++i) {
        ad::Tape tape;
        Binder bind(tape, ps);
        Tensor pre, attn;
        Tensor features = model.enc_lq.forward(bind, bind.input(images[i]), &pre, &attn).val();
        auto tokens = match(features, ps.value(model.dict_lq.param));
        for (int q : tokens) out.usage[static_cast<size_t>(q)]++;
        if (i == 0) {
            out.attention = attn;
            // spread selected rows/channels across the available range
            for (int m = 0; m < num_maps; ++m) {
                const int k = m * (model.cfg.K - 1) / std::max(1, num_maps - 1);
                out.att_indices.push_back(k);
                Tensor row({grid, grid});
                for (int j = 0; j < model.cfg.K; ++j) row.data[static_cast<size_t>(j)] = attn.at(k, j);
                out.att_maps.push_back(row);
                const int c = m * (model.cfg.d - 1) / std::max(1, num_maps - 1);
                out.enc_indices.push_back(c);
                Tensor ch({grid, grid});
                for (int j = 0; j < grid * grid; ++j)
                    ch.data[static_cast<size_t>(j)] = pre.data[static_cast<size_t>(c) * grid * grid + j];
                out.enc_maps.push_back(ch);
            }
        }
    }
    return out;
}

}  // namespace osd
