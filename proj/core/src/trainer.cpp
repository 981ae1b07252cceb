#include "osd/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <stdexcept>

#include "osd/checkpoint.hpp"

namespace fs = std::filesystem;

namespace osd {

using ad::Var;

void TrainConfig::validate() const {
    if (lr <= 0 || lr_osd <= 0) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (iterations < 1 || iters_hq < 1 || iters_lq < 1 || iters_assoc < 1)
        throw std::invalid_argument("TrainConfig: iterations must be >= 1");
    if (batch < 1 || batch_osd < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (stage != "vre" && stage != "osd") throw std::invalid_argument("TrainConfig: stage must be 'vre' or 'osd'");
    weights_osd.validate();
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j;
    j["stage"] = stage;
    j["iters_hq"] = iters_hq;
    j["iters_lq"] = iters_lq;
    j["iters_assoc"] = iters_assoc;
    j["batch"] = batch;
    j["lr"] = lr;
    j["beta"] = beta;
    j["temperature"] = temperature;
    j["lambda_per"] = lambda_per;
    j["lambda_dis"] = lambda_dis;
    j["lambda_assoc"] = lambda_assoc;
    j["gan_start"] = gan_start;
    j["iterations"] = iterations;
    j["warmup_ae"] = warmup_ae;
    j["warmup_unet"] = warmup_unet;
    j["batch_osd"] = batch_osd;
    j["lr_osd"] = lr_osd;
    j["weight_decay_osd"] = weight_decay_osd;
    j["lambda2_dis"] = weights_osd.lambda_dis;
    j["lambda2_id"] = weights_osd.lambda_id;
    j["lambda2_per"] = weights_osd.lambda_per;
    j["seed"] = seed;
    j["checkpoint_every"] = checkpoint_every;
    j["out_dir"] = out_dir;
    j["vre"] = {{"image_size", vre.image_size}, {"K", vre.K},       {"d", vre.d},
                {"N", vre.N},                   {"beta", vre.beta}, {"temperature", vre.temperature}};
    j["gen"] = {{"image_size", gen.image_size}, {"latent_h", gen.latent_h},   {"latent_w", gen.latent_w},
                {"latent_c", gen.latent_c},     {"T_L", gen.T_L},             {"lora_rank", gen.lora_rank},
                {"lora_scale", gen.lora_scale}, {"prompt_dim", gen.prompt_dim}};
    j["T"] = T;
    j["beta_start"] = beta_start;
    j["beta_end"] = beta_end;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    auto get = [&j](const char* key, auto& dst) {
        if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    get("stage", c.stage);
    get("iters_hq", c.iters_hq);
    get("iters_lq", c.iters_lq);
    get("iters_assoc", c.iters_assoc);
    get("batch", c.batch);
    get("lr", c.lr);
    get("beta", c.beta);
    get("temperature", c.temperature);
    get("lambda_per", c.lambda_per);
    get("lambda_dis", c.lambda_dis);
    get("lambda_assoc", c.lambda_assoc);
    get("gan_start", c.gan_start);
    get("iterations", c.iterations);
    get("warmup_ae", c.warmup_ae);
    get("warmup_unet", c.warmup_unet);
    get("batch_osd", c.batch_osd);
    get("lr_osd", c.lr_osd);
    get("weight_decay_osd", c.weight_decay_osd);
    get("lambda2_dis", c.weights_osd.lambda_dis);
    get("lambda2_id", c.weights_osd.lambda_id);
    get("lambda2_per", c.weights_osd.lambda_per);
    get("seed", c.seed);
    get("checkpoint_every", c.checkpoint_every);
    get("out_dir", c.out_dir);
    if (j.contains("vre")) {
        const auto& v = j.at("vre");
        c.vre.image_size = v.value("image_size", c.vre.image_size);
        c.vre.K = v.value("K", c.vre.K);
        c.vre.d = v.value("d", c.vre.d);
        c.vre.N = v.value("N", c.vre.N);
        c.vre.beta = v.value("beta", c.vre.beta);
        c.vre.temperature = v.value("temperature", c.vre.temperature);
    }
    if (j.contains("gen")) {
        const auto& g = j.at("gen");
        c.gen.image_size = g.value("image_size", c.gen.image_size);
        c.gen.latent_h = g.value("latent_h", c.gen.latent_h);
        c.gen.latent_w = g.value("latent_w", c.gen.latent_w);
        c.gen.latent_c = g.value("latent_c", c.gen.latent_c);
        c.gen.T_L = g.value("T_L", c.gen.T_L);
        c.gen.lora_rank = g.value("lora_rank", c.gen.lora_rank);
        c.gen.lora_scale = g.value("lora_scale", c.gen.lora_scale);
        c.gen.prompt_dim = g.value("prompt_dim", c.gen.prompt_dim);
    }
    get("T", c.T);
    get("beta_start", c.beta_start);
    get("beta_end", c.beta_end);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("adam_eps", c.adam_eps);
    return c;
}

void append_log_line(const std::string& path, const LossReport& r) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::app);
    nlohmann::json j(r.values);
    out << j.dump() << "\n";
}

namespace {

std::vector<int> batch_indices(Rng& rng, int n, int b) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = 0; i < std::min(b, n - 1); ++i) {
        const int j = i + static_cast<int>(rng.below(n - i));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(std::min(b, n)));
    return idx;
}

void save_moments(Archive& a, const std::string& tag, AdamOptimizer& opt) {
    for (auto& [name, mv] : opt.moments()) {
        a.tensors.emplace("opt." + tag + ".m." + name, mv.first);
        a.tensors.emplace("opt." + tag + ".v." + name, mv.second);
    }
    a.meta["opt"][tag]["t"] = opt.step_count();
}

void load_moments(const Archive& a, const std::string& tag, AdamOptimizer& opt) {
    const std::string pm = "opt." + tag + ".m.";
    for (const auto& [name, t] : a.tensors) {
        if (name.rfind(pm, 0) != 0) continue;
        const std::string pname = name.substr(pm.size());
        auto& mv = opt.moments()[pname];
        mv.first = t;
        mv.second = a.tensors.at("opt." + tag + ".v." + pname);
    }
    if (a.meta.contains("opt") && a.meta["opt"].contains(tag)) opt.step_count() = a.meta["opt"][tag]["t"].get<int64_t>();
}

void load_prefix_into_store(const Archive& a, ParamStore& ps, const std::string& prefix) {
    bool any = false;
    for (const auto& [name, t] : a.tensors) {
        if (name.rfind(prefix, 0) != 0) continue;
        any = true;
        if (!ps.has(name)) throw std::runtime_error("checkpoint incompatibility: unexpected tensor '" + name + "'");
        auto& p = ps.at(name);
        if (p.value.shape != t.shape)
            throw std::runtime_error("checkpoint incompatibility: shape mismatch for '" + name + "': " +
                                     shape_str(p.value.shape) + " vs " + shape_str(t.shape));
        p.value = t;
    }
    if (!any) throw std::runtime_error("checkpoint incompatibility: no '" + prefix + "' tensors in archive");
}

[[noreturn]] void abort_with_snapshot(const std::string& out_dir, ParamStore& ps, const std::string& what) {
    std::string snap;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        snap = (fs::path(out_dir) / "nan_snapshot.ckpt").string();
        Archive a = archive_from_store(ps);
        a.meta["diagnostic"] = what;
        save_archive(snap, a);
    }
    throw std::runtime_error(what + (snap.empty() ? "" : " (snapshot: " + snap + ")"));
}

// ---------------- stage 1 ----------------

struct Stage1Ctx {
    ParamStore ps;
    VreModel vre;
    std::unique_ptr<SeededPyramidExtractor> feat;
    PatchDiscriminator pd_hq, pd_lq;
    AdamOptimizer opt_g, opt_d;

    Stage1Ctx(const TrainConfig& cfg)
        : opt_g({cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, 0.0}),
          // slower critic keeps the small-data adversarial game balanced
          opt_d({0.25 * cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, 0.0}) {
        Rng rng(cfg.seed);
        vre = VreModel::create(ps, cfg.vre, rng);
        pd_hq = PatchDiscriminator::create(ps, "pdisc.hq", rng);
        pd_lq = PatchDiscriminator::create(ps, "pdisc.lq", rng);
        feat = std::make_unique<SeededPyramidExtractor>(ps, "fx", cfg.seed ^ 0x5eedf00dull);
    }
};

struct BranchRefs {
    VreEncoder* enc;
    VreDecoder* dec;
    CodeDictionary* dict;
    PatchDiscriminator* pd;
};

}  // namespace

TrainOutcome train_vre(const Stage1Dataset& data, const TrainConfig& cfg, const std::string& resume_path,
                       const std::string& only_phase) {
    cfg.validate();
    if (data.hq.empty() || data.hq.size() != data.lq.size())
        throw std::invalid_argument("train_vre: need a non-empty paired HQ/LQ dataset");

    Stage1Ctx ctx(cfg);
    nlohmann::json progress = {{"hq", 0}, {"lq", 0}, {"assoc", 0}};
    if (!resume_path.empty()) {
        Archive a = load_archive(resume_path);
        archive_into_store(a, ctx.ps);
        load_moments(a, "g", ctx.opt_g);
        load_moments(a, "d", ctx.opt_d);
        if (a.meta.contains("stage1_progress")) progress = a.meta["stage1_progress"];
        if (a.meta.contains("usage")) {
            auto uh = a.meta["usage"]["hq"].get<std::vector<int64_t>>();
            auto ul = a.meta["usage"]["lq"].get<std::vector<int64_t>>();
            ctx.vre.dict_hq.usage = uh;
            ctx.vre.dict_lq.usage = ul;
        }
    }

    struct Phase {
        std::string name;
        int target;
    };
    std::vector<Phase> phases{{"hq", cfg.iters_hq}, {"lq", cfg.iters_lq}, {"assoc", cfg.iters_assoc}};
    if (!only_phase.empty()) {
        if (only_phase == "assoc" && (progress["hq"].get<int>() < cfg.iters_hq || progress["lq"].get<int>() < cfg.iters_lq))
            throw std::runtime_error("train_vre: association phase requires completed hq and lq checkpoints");
        if (only_phase == "lq" && progress["hq"].get<int>() < cfg.iters_hq)
            throw std::runtime_error("train_vre: lq phase requires a completed hq checkpoint");
        std::erase_if(phases, [&](const Phase& p) { return p.name != only_phase; });
        if (phases.empty()) throw std::invalid_argument("train_vre: unknown phase '" + only_phase + "'");
    }

    const std::string log_path = cfg.out_dir.empty() ? "" : (fs::path(cfg.out_dir) / "train_vre_log.jsonl").string();
    if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

    TrainOutcome outcome;
    const int n = static_cast<int>(data.hq.size());

    auto branch = [&](bool hq_side) -> BranchRefs {
        if (hq_side) return {&ctx.vre.enc_hq, &ctx.vre.dec_hq, &ctx.vre.dict_hq, &ctx.pd_hq};
        return {&ctx.vre.enc_lq, &ctx.vre.dec_lq, &ctx.vre.dict_lq, &ctx.pd_lq};
    };

    // builds recon graph + component values for one branch on one image
    struct BranchPass {
        Var total;    // l1 + lp*per + ld*dis + quant
        Var features;
        Tensor recon_value;
        double l1, per, dis, quant;
    };
    auto branch_pass = [&](Binder& bind, const BranchRefs& br, const Tensor& target, double lambda_dis) -> BranchPass {
        BranchPass bp;
        Var img = bind.input(target);
        Var feats = br.enc->forward(bind, img);
        auto tokens = match(feats.val(), bind.store().value(br.dict->param));
        br.dict->count_usage(tokens);
        Var dict_var = bind(br.dict->param);
        Var z_q = ad::gather_rows(dict_var, tokens);
        // per-element scaling keeps the code-alignment term from drowning
        // the reconstruction gradients at K*d scale
        Var quant = ad::affine(quantization_loss(feats, z_q, cfg.beta),
                               1.0 / static_cast<double>(feats.val().size()), 0.0);
        Var st = straight_through(feats, z_q);
        Var recon = br.dec->forward(bind, st);
        auto rl = reconstruction_losses(bind, img, recon, *ctx.feat, *br.pd);
        Var total = ad::add(rl.l1, ad::affine(rl.per, cfg.lambda_per, 0.0));
        if (lambda_dis != 0.0) total = ad::add(total, ad::affine(rl.dis, lambda_dis, 0.0));
        total = ad::add(total, quant);
        bp.total = total;
        bp.features = feats;
        bp.recon_value = recon.val();
        bp.l1 = rl.l1.val().data[0];
        bp.per = rl.per.val().data[0];
        bp.dis = rl.dis.val().data[0];
        bp.quant = quant.val().data[0];
        return bp;
    };

    auto disc_update = [&](const BranchRefs& br, const Tensor& real, const Tensor& fake, Rng&) -> double {
        ad::Tape tape;
        Binder bind(tape, ctx.ps);
        const double eps = 1e-12;
        Var p_real = br.pd->prob(bind, bind.input(real));
        Var p_fake = br.pd->prob(bind, bind.input(fake));
        Var loss = ad::neg(ad::add(ad::log_(ad::affine(p_real, 1.0, eps)),
                                   ad::log_(ad::affine(ad::neg(p_fake), 1.0, 1.0 + eps))));
        tape.backward(loss);
        bind.harvest();
        return loss.val().data[0];
    };

    int phase_salt = 0;
    for (const auto& phase : phases) {
        phase_salt = phase.name == "hq" ? 1 : (phase.name == "lq" ? 2 : 3);
        for (int it = progress[phase.name].get<int>(); it < phase.target; ++it) {
            Rng iter_rng = Rng::derive(cfg.seed + 1000ull * static_cast<uint64_t>(phase_salt), static_cast<uint64_t>(it));
            auto idx = batch_indices(iter_rng, n, cfg.batch);
            const bool gan_active = it >= cfg.gan_start;
            const double ld = gan_active ? cfg.lambda_dis : 0.0;

            LossReport rep;
            double sum_total = 0, sum_l1 = 0, sum_per = 0, sum_dis = 0, sum_quant = 0, sum_assoc = 0, sum_d = 0;
            std::vector<std::pair<int, Tensor>> recon_hq, recon_lq;

            ctx.ps.zero_grads();
            for (int i : idx) {
                ad::Tape tape;
                Binder bind(tape, ctx.ps);
                Var total;
                if (phase.name == "assoc") {
                    BranchPass ph = branch_pass(bind, branch(true), data.hq[static_cast<size_t>(i)], ld);
                    BranchPass pl = branch_pass(bind, branch(false), data.lq[static_cast<size_t>(i)], ld);
                    Var assoc = association_loss(ph.features, pl.features, cfg.temperature);
                    total = ad::add(ad::add(ph.total, pl.total), ad::affine(assoc, cfg.lambda_assoc, 0.0));
                    sum_assoc += assoc.val().data[0];
                    sum_l1 += 0.5 * (ph.l1 + pl.l1);
                    sum_per += 0.5 * (ph.per + pl.per);
                    sum_dis += 0.5 * (ph.dis + pl.dis);
                    sum_quant += ph.quant + pl.quant;
                    recon_hq.emplace_back(i, ph.recon_value);
                    recon_lq.emplace_back(i, pl.recon_value);
                } else {
                    const bool hq_side = phase.name == "hq";
                    BranchPass bp = branch_pass(bind, branch(hq_side),
                                                hq_side ? data.hq[static_cast<size_t>(i)] : data.lq[static_cast<size_t>(i)],
                                                ld);
                    total = bp.total;
                    sum_l1 += bp.l1;
                    sum_per += bp.per;
                    sum_dis += bp.dis;
                    sum_quant += bp.quant;
                    (hq_side ? recon_hq : recon_lq).emplace_back(i, bp.recon_value);
                }
                const double tv = total.val().data[0];
                if (!std::isfinite(tv))
                    abort_with_snapshot(cfg.out_dir, ctx.ps,
                                        "train_vre: non-finite loss in phase " + phase.name + " at iteration " +
                                            std::to_string(it));
                sum_total += tv;
                tape.backward(total);
                bind.harvest();
            }
            const double bs = static_cast<double>(idx.size());
            ctx.opt_g.step(ctx.ps, phase.name == "assoc" ? "vre." : ("vre." + phase.name + "."), bs);

            ctx.ps.zero_grads();
            if (gan_active) {
                for (auto& [i, rec] : recon_hq)
                    sum_d += disc_update(branch(true), data.hq[static_cast<size_t>(i)], rec, iter_rng);
                for (auto& [i, rec] : recon_lq)
                    sum_d += disc_update(branch(false), data.lq[static_cast<size_t>(i)], rec, iter_rng);
                ctx.opt_d.step(ctx.ps, "pdisc.", bs);
                ctx.ps.zero_grads();
            }

            rep.set("phase", static_cast<double>(phase_salt));
            rep.set("iteration", static_cast<double>(it));
            rep.set("total", sum_total / bs);
            rep.set("l1", sum_l1 / bs);
            rep.set("per", sum_per / bs);
            rep.set("dis", sum_dis / bs);
            rep.set("quant", sum_quant / bs);
            if (phase.name == "assoc") rep.set("assoc", sum_assoc / bs);
            rep.set("d_loss", sum_d / bs);
            outcome.log.push_back(rep);
            append_log_line(log_path, rep);

            progress[phase.name] = it + 1;
            if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 && !cfg.out_dir.empty()) {
                Archive a = archive_from_store(ctx.ps);
                save_moments(a, "g", ctx.opt_g);
                save_moments(a, "d", ctx.opt_d);
                a.meta["stage1_progress"] = progress;
                a.meta["config"] = cfg.to_json();
                a.meta["usage"] = {{"hq", ctx.vre.dict_hq.usage}, {"lq", ctx.vre.dict_lq.usage}};
                save_archive((fs::path(cfg.out_dir) / ("vre_iter_" + phase.name + "_" + std::to_string(it + 1) + ".ckpt"))
                                 .string(),
                             a);
            }
        }
    }

    Archive a = archive_from_store(ctx.ps);
    save_moments(a, "g", ctx.opt_g);
    save_moments(a, "d", ctx.opt_d);
    a.meta["stage1_progress"] = progress;
    a.meta["config"] = cfg.to_json();
    a.meta["usage"] = {{"hq", ctx.vre.dict_hq.usage}, {"lq", ctx.vre.dict_lq.usage}};
    a.meta["vre"] = cfg.to_json()["vre"];
    outcome.checkpoint_path = cfg.out_dir.empty() ? "" : (fs::path(cfg.out_dir) / "vre.ckpt").string();
    if (!outcome.checkpoint_path.empty()) save_archive(outcome.checkpoint_path, a);
    outcome.vre_hash_after = ctx.ps.hash_prefix("vre.");
    return outcome;
}

// ---------------- stage 2 ----------------

namespace {

struct Stage2Ctx {
    ParamStore ps;
    VreModel vre;
    AutoencoderModel ae;
    DenoiserModel unet;
    LatentDiscriminator ldisc;
    std::unique_ptr<SeededPyramidExtractor> feat;
    std::unique_ptr<FaceEmbedder> face;
    NoiseSchedule sched;

    Stage2Ctx(const TrainConfig& cfg) {
        Rng rng(cfg.seed);
        vre = VreModel::create(ps, cfg.vre, rng);
        ae = AutoencoderModel::create(ps, "ae", cfg.gen, rng);
        unet = DenoiserModel::create(ps, "unet", cfg.gen, rng);
        apply_lora(unet, ps, cfg.gen, rng);
        ldisc = LatentDiscriminator::create(ps, "ldisc", cfg.gen.latent_c, rng);
        feat = std::make_unique<SeededPyramidExtractor>(ps, "fx", cfg.seed ^ 0x5eedf00dull);
        face = std::make_unique<FaceEmbedder>(ps, "face", 128, cfg.seed ^ 0xfacef00dull);
        sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
        cfg.gen.validate(sched.T);
    }
};

}  // namespace

TrainOutcome train_osd(const Stage2Dataset& data, const std::string& vre_checkpoint, const TrainConfig& cfg,
                       const std::string& resume_path) {
    cfg.validate();
    if (data.hq.empty() || data.hq.size() != data.lq.size())
        throw std::invalid_argument("train_osd: need a non-empty paired HQ/LQ dataset");

    Stage2Ctx ctx(cfg);
    {
        Archive vre_arch = load_archive(vre_checkpoint);
        load_prefix_into_store(vre_arch, ctx.ps, "vre.");
    }

    // frozen stand-ins and the pretrained prompt embedder
    ctx.ps.set_trainable_prefix("vre.", false);
    ctx.ps.set_trainable_prefix("fx.", false);
    ctx.ps.set_trainable_prefix("face.", false);

    AdamOptimizer opt_ae({cfg.lr_osd, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, 0.0});
    AdamOptimizer opt_unet({cfg.lr_osd, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, 0.0});
    AdamOptimizer opt_lora({cfg.lr_osd, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay_osd});
    // slower critic, as in stage 1
    AdamOptimizer opt_disc({0.25 * cfg.lr_osd, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, 0.0});

    nlohmann::json progress = {{"warmup_ae", 0}, {"warmup_unet", 0}, {"steps", 0}, {"g_updates", 0}, {"d_updates", 0}};
    if (!resume_path.empty()) {
        Archive a = load_archive(resume_path);
        archive_into_store(a, ctx.ps);
        load_moments(a, "ae", opt_ae);
        load_moments(a, "unet", opt_unet);
        load_moments(a, "lora", opt_lora);
        load_moments(a, "disc", opt_disc);
        if (a.meta.contains("stage2_progress")) progress = a.meta["stage2_progress"];
    }

    const std::string log_path = cfg.out_dir.empty() ? "" : (fs::path(cfg.out_dir) / "train_osd_log.jsonl").string();
    if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

    TrainOutcome outcome;
    const int n = static_cast<int>(data.hq.size());
    const uint64_t vre_hash0 = ctx.ps.hash_prefix("vre.");

    // --- warm-up 1: autoencoder self-reconstruction on HQ and LQ frames ---
    for (int it = progress["warmup_ae"].get<int>(); it < cfg.warmup_ae; ++it) {
        Rng iter_rng = Rng::derive(cfg.seed + 10000, static_cast<uint64_t>(it));
        auto idx = batch_indices(iter_rng, 2 * n, cfg.batch_osd);
        ctx.ps.zero_grads();
        double sum = 0;
        for (int i : idx) {
            const Tensor& img = (i < n) ? data.hq[static_cast<size_t>(i)] : data.lq[static_cast<size_t>(i - n)];
            ad::Tape tape;
            Binder bind(tape, ctx.ps);
            Var im = bind.input(img);
            Var loss = ad::mse(im, ctx.ae.decode(bind, ctx.ae.encode(bind, im)));
            sum += loss.val().data[0];
            tape.backward(loss);
            bind.harvest();
        }
        if (!std::isfinite(sum)) abort_with_snapshot(cfg.out_dir, ctx.ps, "train_osd: non-finite AE warm-up loss");
        opt_ae.step(ctx.ps, "ae.", static_cast<double>(idx.size()));
        ctx.ps.zero_grads();
        progress["warmup_ae"] = it + 1;
        LossReport rep;
        rep.set("phase", 10);
        rep.set("iteration", it);
        rep.set("ae_mse", sum / idx.size());
        outcome.log.push_back(rep);
        append_log_line(log_path, rep);
    }
    ctx.ps.set_trainable_prefix("ae.", false);

    // cache latents and prompts once the AE and VRE are frozen
    std::vector<Tensor> z_hq(static_cast<size_t>(n)), z_lq(static_cast<size_t>(n)), prompts(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        z_hq[static_cast<size_t>(i)] = ctx.ae.encode(ctx.ps, data.hq[static_cast<size_t>(i)]);
        z_lq[static_cast<size_t>(i)] = ctx.ae.encode(ctx.ps, data.lq[static_cast<size_t>(i)]);
        prompts[static_cast<size_t>(i)] = vre_forward(data.lq[static_cast<size_t>(i)], ctx.vre, ctx.ps);
    }

    // --- warm-up 2: base UNet latent-recovery regression ---
    for (int it = progress["warmup_unet"].get<int>(); it < cfg.warmup_unet; ++it) {
        Rng iter_rng = Rng::derive(cfg.seed + 20000, static_cast<uint64_t>(it));
        auto idx = batch_indices(iter_rng, n, cfg.batch_osd);
        ctx.ps.zero_grads();
        double sum = 0;
        for (int i : idx) {
            ad::Tape tape;
            Binder bind(tape, ctx.ps);
            Var zl = bind.input(z_lq[static_cast<size_t>(i)]);
            Var p = bind.input(prompts[static_cast<size_t>(i)]);
            Var eps_hat = ctx.unet.forward(bind, zl, p, cfg.gen.T_L);
            Var z_hat = recover_clean(zl, eps_hat, std::max(1, cfg.gen.T_L), ctx.sched);
            Var loss = ad::mse(z_hat, bind.input(z_hq[static_cast<size_t>(i)]));
            sum += loss.val().data[0];
            tape.backward(loss);
            bind.harvest();
        }
        if (!std::isfinite(sum)) abort_with_snapshot(cfg.out_dir, ctx.ps, "train_osd: non-finite UNet warm-up loss");
        opt_unet.step(ctx.ps, "unet.", static_cast<double>(idx.size()));
        ctx.ps.zero_grads();
        progress["warmup_unet"] = it + 1;
        LossReport rep;
        rep.set("phase", 11);
        rep.set("iteration", it);
        rep.set("latent_mse", sum / idx.size());
        outcome.log.push_back(rep);
        append_log_line(log_path, rep);
    }
    ctx.ps.set_trainable_prefix("unet.", false);
    outcome.unet_hash_before = ctx.ps.hash_prefix("unet.");
    outcome.vre_hash_before = vre_hash0;

    // restoration MSE over the whole dataset, free of batch-sampling noise
    auto dataset_mse = [&]() {
        double acc = 0;
        for (int i = 0; i < n; ++i) {
            ad::Tape tape;
            Binder bind(tape, ctx.ps);
            RestoreGraph rg = one_step_restore_from_latent(bind, bind.input(z_lq[static_cast<size_t>(i)]),
                                                           prompts[static_cast<size_t>(i)], ctx.unet, ctx.ae, cfg.gen,
                                                           ctx.sched);
            const Tensor& img = rg.image.val();
            const Tensor& ref = data.hq[static_cast<size_t>(i)];
            double s = 0;
            for (int64_t k = 0; k < img.size(); ++k) {
                const double d = img.data[static_cast<size_t>(k)] - ref.data[static_cast<size_t>(k)];
                s += d * d;
            }
            acc += s / static_cast<double>(img.size());
        }
        return acc / static_cast<double>(n);
    };
    outcome.mse_before = dataset_mse();
    {
        LossReport rep;
        rep.set("phase", 13);
        rep.set("dataset_mse_before", outcome.mse_before);
        outcome.log.push_back(rep);
        append_log_line(log_path, rep);
    }

    // --- alternating G / D training (LoRA + discriminator only) ---
    for (int step = progress["steps"].get<int>(); step < cfg.iterations; ++step) {
        Rng iter_rng = Rng::derive(cfg.seed + 30000, static_cast<uint64_t>(step));
        auto idx = batch_indices(iter_rng, n, cfg.batch_osd);


        // G-step
        ctx.ps.zero_grads();
        double s_total = 0, s_gan = 0, s_id = 0, s_ea = 0, s_mse = 0;
        std::vector<std::pair<int, Tensor>> z_hats;
        for (int i : idx) {
            ad::Tape tape;
            Binder bind(tape, ctx.ps);
            Var zl = bind.input(z_lq[static_cast<size_t>(i)]);
            RestoreGraph rg =
                one_step_restore_from_latent(bind, zl, prompts[static_cast<size_t>(i)], ctx.unet, ctx.ae, cfg.gen, ctx.sched);
            Var img_hq = bind.input(data.hq[static_cast<size_t>(i)]);
            Var zh = bind.input(z_hq[static_cast<size_t>(i)]);
            auto g = generator_total(bind, img_hq, rg.image, zh, rg.z_hat, cfg.weights_osd, *ctx.face, *ctx.feat,
                                     ctx.ldisc, ctx.sched, iter_rng);
            const double tv = g.total.val().data[0];
            if (!std::isfinite(tv))
                abort_with_snapshot(cfg.out_dir, ctx.ps, "train_osd: non-finite generator loss at step " + std::to_string(step));
            s_total += tv;
            s_gan += g.gan.val().data[0];
            s_id += g.id.val().data[0];
            s_ea += g.ea.val().data[0];
            s_mse += g.mse.val().data[0];
            z_hats.emplace_back(i, rg.z_hat.val());
            tape.backward(g.total);
            bind.harvest();
        }
        opt_lora.step(ctx.ps, "lora.", static_cast<double>(idx.size()));
        progress["g_updates"] = progress["g_updates"].get<int>() + 1;

        // D-step
        ctx.ps.zero_grads();
        double s_d = 0;
        for (auto& [i, zh_val] : z_hats) {
            ad::Tape tape;
            Binder bind(tape, ctx.ps);
            Var loss = gan_discriminator_loss(bind, bind.input(z_hq[static_cast<size_t>(i)]), bind.input(zh_val),
                                              ctx.ldisc, ctx.sched, iter_rng);
            s_d += loss.val().data[0];
            tape.backward(loss);
            bind.harvest();
        }
        if (!std::isfinite(s_d)) abort_with_snapshot(cfg.out_dir, ctx.ps, "train_osd: non-finite discriminator loss");
        opt_disc.step(ctx.ps, "ldisc.", static_cast<double>(idx.size()));
        ctx.ps.zero_grads();
        progress["d_updates"] = progress["d_updates"].get<int>() + 1;
        progress["steps"] = step + 1;

        const double bs = static_cast<double>(idx.size());
        LossReport rep;
        rep.set("phase", 12);
        rep.set("iteration", step);
        rep.set("total", s_total / bs);
        rep.set("gan", s_gan / bs);
        rep.set("id", s_id / bs);
        rep.set("ea_dists", s_ea / bs);
        rep.set("mse", s_mse / bs);
        rep.set("d_loss", s_d / bs);
        outcome.log.push_back(rep);
        append_log_line(log_path, rep);

        if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && !cfg.out_dir.empty()) {
            Archive a = archive_from_store(ctx.ps);
            save_moments(a, "ae", opt_ae);
            save_moments(a, "unet", opt_unet);
            save_moments(a, "lora", opt_lora);
            save_moments(a, "disc", opt_disc);
            a.meta["stage2_progress"] = progress;
            a.meta["config"] = cfg.to_json();
            save_archive((fs::path(cfg.out_dir) / ("osd_iter_" + std::to_string(step + 1) + ".ckpt")).string(), a);
        }
    }

    outcome.mse_after = dataset_mse();
    {
        LossReport rep;
        rep.set("phase", 13);
        rep.set("dataset_mse_after", outcome.mse_after);
        outcome.log.push_back(rep);
        append_log_line(log_path, rep);
    }

    outcome.unet_hash_after = ctx.ps.hash_prefix("unet.");
    outcome.vre_hash_after = ctx.ps.hash_prefix("vre.");
    outcome.g_updates = progress["g_updates"].get<int>();
    outcome.d_updates = progress["d_updates"].get<int>();

    Archive a = archive_from_store(ctx.ps);
    save_moments(a, "ae", opt_ae);
    save_moments(a, "unet", opt_unet);
    save_moments(a, "lora", opt_lora);
    save_moments(a, "disc", opt_disc);
    a.meta["stage2_progress"] = progress;
    a.meta["config"] = cfg.to_json();
    a.meta["schedule"] = {{"T", cfg.T}, {"beta_start", cfg.beta_start}, {"beta_end", cfg.beta_end}};
    a.meta["generator"] = cfg.to_json()["gen"];
    outcome.checkpoint_path = cfg.out_dir.empty() ? "" : (fs::path(cfg.out_dir) / "osd.ckpt").string();
    if (!outcome.checkpoint_path.empty()) save_archive(outcome.checkpoint_path, a);
    return outcome;
}

std::unique_ptr<RestorerBundle> load_restorer(const std::string& osd_checkpoint) {
    Archive a = load_archive(osd_checkpoint);
    if (!a.meta.contains("config")) throw std::runtime_error("load_restorer: checkpoint missing 'config' metadata");
    TrainConfig cfg = TrainConfig::from_json(a.meta["config"]);

    auto b = std::make_unique<RestorerBundle>();
    Rng rng(cfg.seed);
    b->vre = VreModel::create(b->ps, cfg.vre, rng);
    b->ae = AutoencoderModel::create(b->ps, "ae", cfg.gen, rng);
    b->unet = DenoiserModel::create(b->ps, "unet", cfg.gen, rng);
    apply_lora(b->unet, b->ps, cfg.gen, rng);
    LatentDiscriminator::create(b->ps, "ldisc", cfg.gen.latent_c, rng);
    SeededPyramidExtractor fx(b->ps, "fx", cfg.seed ^ 0x5eedf00dull);
    FaceEmbedder face(b->ps, "face", 128, cfg.seed ^ 0xfacef00dull);
    b->gen = cfg.gen;
    b->sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    archive_into_store(a, b->ps);
    return b;
}

Tensor restore_image(RestorerBundle& b, const Tensor& image_lq, bool overlap_embed) {
    Tensor prompt, z_l;
    if (overlap_embed) {
        // VRE embedding and latent encoding are data-independent
        auto fp = std::async(std::launch::async, [&] { return vre_forward(image_lq, b.vre, b.ps); });
        z_l = b.ae.encode(b.ps, image_lq);
        prompt = fp.get();
    } else {
        prompt = vre_forward(image_lq, b.vre, b.ps);
        z_l = b.ae.encode(b.ps, image_lq);
    }
    ad::Tape tape;
    Binder bind(tape, b.ps);
    RestoreGraph g = one_step_restore_from_latent(bind, bind.input(z_l), prompt, b.unet, b.ae, b.gen, b.sched);
    Tensor out = g.image.val();
    for (auto& v : out.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return out;
}

}  // namespace osd
