#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "osd/features.hpp"
#include "osd/nn.hpp"
#include "osd/report.hpp"

namespace osd {

// Learnable N x d codebook living in the ParamStore; usage counts are
// observability state, not parameters.
struct CodeDictionary {
    std::string param;  // [N, d]
    int N = 0, d = 0;
    std::vector<int64_t> usage;

    static CodeDictionary create(ParamStore& ps, const std::string& name, int N, int d, Rng& rng);
    void count_usage(const std::vector<int>& tokens);
};

struct VreConfig {
    int image_size = 64;
    int K = 64;   // spatial positions after flattening (8x8)
    int d = 64;   // code channel size (paper-scale 512)
    int N = 256;  // code items (paper-scale 1024)
    double beta = 0.25;
    double temperature = 0.07;
};

// Convolutional encoder to K feature vectors of width d, final residual
// self-attention with an inspectable weight matrix.
struct VreEncoder {
    Conv2dLayer c1, c2, c3;
    SelfAttention attn;
    int K = 0, d = 0, grid = 0;

    static VreEncoder create(ParamStore& ps, const std::string& prefix, const VreConfig& cfg, Rng& rng);
    // returns [K, d]; pre-attention grid and attention matrix optionally captured
    ad::Var forward(Binder& bind, ad::Var image, Tensor* pre_attn_grid = nullptr, Tensor* attn_matrix = nullptr) const;
};

// Stage-1-only decoder from the quantized [K, d] grid back to an image.
struct VreDecoder {
    Conv2dLayer c1, c2, c3, c4;
    int grid = 0, d = 0;

    static VreDecoder create(ParamStore& ps, const std::string& prefix, const VreConfig& cfg, Rng& rng);
    ad::Var forward(Binder& bind, ad::Var features) const;  // [K,d] -> [3,H,W]
};

// One HQ + one LQ branch sharing a config. Parameter prefixes:
// vre.hq.* / vre.lq.*
struct VreModel {
    VreConfig cfg;
    VreEncoder enc_hq, enc_lq;
    VreDecoder dec_hq, dec_lq;
    CodeDictionary dict_hq, dict_lq;

    static VreModel create(ParamStore& ps, const VreConfig& cfg, Rng& rng);
};

// --- visual tokenizer / embedder (pure tensor ops) ---

// argmin_q ||z_k - c_q||_2 per row, ties to the lowest index
std::vector<int> match(const Tensor& features, const Tensor& dict);

// row k = dict[tokens[k]]; O(1) per token, no distance evaluations
Tensor embed(const std::vector<int>& tokens, const Tensor& dict);

// instrumentation: distance evaluations since last reset (embed must not add any)
int64_t distance_eval_count();
void reset_distance_eval_count();

// embed(match(encode(image))) on the LQ branch
Tensor vre_forward(const Tensor& image, const VreModel& model, ParamStore& ps);

// --- training losses ---

// z + stopgrad(z_q - z): forward value z_q, gradient passes to z
ad::Var straight_through(ad::Var z, ad::Var z_q);

// ||sg(z) - z_q||_F^2 + beta ||z - sg(z_q)||_F^2
ad::Var quantization_loss(ad::Var z, ad::Var z_q, double beta);
double quantization_loss(const Tensor& z, const Tensor& z_q, double beta);

// symmetric InfoNCE-style cross entropy over the HQ/LQ similarity matrix
ad::Var association_loss(ad::Var z_hq, ad::Var z_lq, double temperature);
double association_loss(const Tensor& z_hq, const Tensor& z_lq, double temperature);

struct ReconLossGraph {
    ad::Var l1, per, dis;
};
// L1, perceptual and discriminative reconstruction terms
ReconLossGraph reconstruction_losses(Binder& bind, ad::Var target, ad::Var recon, const FeatureExtractor& feat,
                                     const PatchDiscriminator& disc);
LossReport reconstruction_losses(const Tensor& target, const Tensor& recon, const FeatureExtractor& feat,
                                 const PatchDiscriminator& disc, ParamStore& ps);

// l1 + lambda_per*per + lambda_dis*dis + quant + lambda_assoc*assoc
double stage1_total(const LossReport& components, double lambda_per, double lambda_dis, double lambda_assoc);

// --- inspection (Fig. 4-style exports) ---

struct InspectionBundle {
    Tensor attention;            // [K, K] row-stochastic
    std::vector<Tensor> att_maps;  // selected rows reshaped to [grid, grid]
    std::vector<Tensor> enc_maps;  // selected pre-attention channels [grid, grid]
    std::vector<int> att_indices, enc_indices;
    std::vector<int64_t> usage;  // dictionary usage histogram over the batch
};

InspectionBundle inspect(const VreModel& model, const std::vector<Tensor>& images, ParamStore& ps,
                         int num_maps = 4);

}  // namespace osd
