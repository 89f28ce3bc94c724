#include "ddvc/codec.hpp"

#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "ddvc/profile.hpp"

namespace ddvc {

DeepModel::DeepModel(const CodecConfig& cfg_, const si::RifeConfig& rcfg, uint32_t seed,
                     bool trainable, std::string metric_)
    : cfg(cfg_),
      rife_cfg(rcfg),
      metric(std::move(metric_)),
      ps(seed, trainable),
      wz(ps, "wz", cfg_),
      intra(ps, "intra", cfg_),
      wz_em(ps, "wz_em", cfg_),
      intra_em(ps, "intra_em", cfg_),
      rife(ps, "rife", rcfg) {
    if (metric != "mse" && metric != "msssim")
        throw std::invalid_argument("metric must be mse or msssim");
}

double DeepModel::lambda() const {
    return metric == "mse" ? kLambdaGridMse[cfg.lambda_id] : kLambdaGridMsssim[cfg.lambda_id];
}

std::string DeepModel::config_json() const {
    nlohmann::json j{{"codec", "deep"},
                     {"n_filters", cfg.n_filters},
                     {"m_latent", cfg.m_latent},
                     {"s_slices", cfg.s_slices},
                     {"lambda_id", cfg.lambda_id},
                     {"metric", metric},
                     {"rife",
                      {{"block_convs", rife_cfg.block_convs},
                       {"block_ch", rife_cfg.block_ch},
                       {"refine_ch", rife_cfg.refine_ch}}}};
    return j.dump();
}

void DeepModel::save_checkpoint(const std::string& path) const {
    ckpt::save(path, ps, config_json());
}

std::unique_ptr<DeepModel> DeepModel::from_checkpoint(const std::string& path, bool trainable) {
    auto j = nlohmann::json::parse(ckpt::peek_config(path));
    if (j.value("codec", "") != "deep")
        throw ckpt::CheckpointError("checkpoint does not hold a deep-codec model");
    CodecConfig cfg;
    cfg.n_filters = j.at("n_filters");
    cfg.m_latent = j.at("m_latent");
    cfg.s_slices = j.at("s_slices");
    cfg.lambda_id = j.at("lambda_id");
    si::RifeConfig rcfg;
    rcfg.block_convs = j.at("rife").at("block_convs");
    rcfg.block_ch = j.at("rife").at("block_ch");
    rcfg.refine_ch = j.at("rife").at("refine_ch");
    auto m = std::make_unique<DeepModel>(cfg, rcfg, 1, trainable,
                                         j.value("metric", std::string("mse")));
    ckpt::load(path, m->ps);
    return m;
}

namespace {

std::vector<rans::CdfTable> prior_tables(const FactorizedPrior& prior) {
    std::vector<rans::CdfTable> t;
    t.reserve(size_t(prior.channels()));
    for (int ch = 0; ch < prior.channels(); ++ch) t.push_back(prior.coding_table(ch));
    return t;
}

}  // namespace

LatentCode encode_latents(const EntropyModel& em, const ag::Var& y) {
    const auto& cfg = em.config();
    LatentCode out;

    auto z = em.hyper_encode(y);
    std::vector<int32_t> zsym(z->val.size());
    for (size_t i = 0; i < zsym.size(); ++i) zsym[i] = int32_t(std::lround(z->val.v[i]));

    auto ztables = prior_tables(em.prior());
    std::vector<const rans::CdfTable*> zctx(zsym.size());
    const size_t plane = size_t(z->val.h) * z->val.w;
    for (size_t i = 0; i < zsym.size(); ++i) zctx[i] = &ztables[i / plane];
    out.substreams.push_back(rans::encode(zsym, zctx));
    out.est_bits += rans::table_bits(zsym, zctx);

    Tensor zq(z->val.c, z->val.h, z->val.w);
    for (size_t i = 0; i < zsym.size(); ++i) zq.v[i] = float(zsym[i]);
    auto feat = em.hyper_decode(ag::constant(std::move(zq)));

    const int sc = cfg.slice_channels();
    std::vector<ag::Var> decoded;
    for (int j = 0; j < cfg.s_slices; ++j) {
        auto y_j = ag::slice_c(y, j * sc, (j + 1) * sc);
        auto p = em.slice_params(feat, decoded, j);
        std::vector<int32_t> sym(y_j->val.size());
        std::vector<const rans::CdfTable*> ctx(sym.size());
        Tensor q(sc, y->val.h, y->val.w);
        for (size_t i = 0; i < sym.size(); ++i) {
            sym[i] = int32_t(std::lround(y_j->val.v[i] - p.mu->val.v[i]));
            ctx[i] = &rans::scale_table(rans::scale_index(double(p.sigma->val.v[i])));
            q.v[i] = float(sym[i]) + p.mu->val.v[i];
        }
        out.substreams.push_back(rans::encode(sym, ctx));
        out.est_bits += rans::table_bits(sym, ctx);
        auto q_j = ag::constant(std::move(q));
        decoded.push_back(ag::add(q_j, em.lrp(feat, decoded, p.mu, q_j, j)));
    }
    return out;
}

ag::Var decode_latents(const EntropyModel& em,
                       const std::vector<std::vector<uint8_t>>& substreams, int latent_h,
                       int latent_w) {
    const auto& cfg = em.config();
    if (int(substreams.size()) != cfg.s_slices + 1)
        throw container::ContainerError("latent substream count mismatch");
    if (latent_h % 4 || latent_w % 4)
        throw container::ContainerError("latent dims must be divisible by 4");

    const int zh = latent_h / 4, zw = latent_w / 4;
    auto ztables = prior_tables(em.prior());
    std::vector<const rans::CdfTable*> zctx(size_t(cfg.n_filters) * zh * zw);
    const size_t plane = size_t(zh) * zw;
    for (size_t i = 0; i < zctx.size(); ++i) zctx[i] = &ztables[i / plane];
    auto zsym = rans::decode(substreams[0], zctx);

    Tensor zq(cfg.n_filters, zh, zw);
    for (size_t i = 0; i < zsym.size(); ++i) zq.v[i] = float(zsym[i]);
    auto feat = em.hyper_decode(ag::constant(std::move(zq)));

    const int sc = cfg.slice_channels();
    std::vector<ag::Var> decoded;
    for (int j = 0; j < cfg.s_slices; ++j) {
        auto p = em.slice_params(feat, decoded, j);
        std::vector<const rans::CdfTable*> ctx(p.mu->val.size());
        for (size_t i = 0; i < ctx.size(); ++i)
            ctx[i] = &rans::scale_table(rans::scale_index(double(p.sigma->val.v[i])));
        auto sym = rans::decode(substreams[size_t(j) + 1], ctx);
        Tensor q(sc, latent_h, latent_w);
        for (size_t i = 0; i < sym.size(); ++i) q.v[i] = float(sym[i]) + p.mu->val.v[i];
        auto q_j = ag::constant(std::move(q));
        decoded.push_back(ag::add(q_j, em.lrp(feat, decoded, p.mu, q_j, j)));
    }
    return ag::concat(decoded);
}

container::Container deep_encode(const DeepModel& m, const VideoSequence& seq, int gop_size,
                                 EncodeStats* stats) {
    if (seq.frames.empty()) throw ParamError("cannot encode an empty sequence");
    prof::StageScope stage(kStageResidual);

    container::Container c;
    c.codec_id = container::kDeep;
    c.width = uint16_t(seq.width);
    c.height = uint16_t(seq.height);
    c.gop_size = uint8_t(gop_size);
    c.lambda_id = uint8_t(m.cfg.lambda_id);
    c.table_version = rans::kScaleTableVersion;

    std::vector<bool> is_key(seq.count(), false);
    for (auto& gop : split_gops(seq, gop_size)) is_key[size_t(gop.key_index) - 1] = true;
    is_key.back() = true;

    EncodeStats local;
    for (size_t i = 0; i < seq.count(); ++i) {
        auto frame = ag::constant(pad_reflect(seq.frames[i].pixels, 64));
        const EntropyModel& em = is_key[i] ? m.intra_em : m.wz_em;
        auto y = is_key[i] ? m.intra.enc(frame) : m.wz.enc(frame);
        auto code = encode_latents(em, y);

        container::FrameStream f;
        f.role = is_key[i] ? container::kKey : container::kWz;
        f.substreams = std::move(code.substreams);
        local.est_bits += code.est_bits;
        local.actual_bits += double(f.payload_bytes()) * 8;
        local.frame_est_bits.push_back(code.est_bits);
        local.frame_actual_bits.push_back(double(f.payload_bytes()) * 8);
        c.frames.push_back(std::move(f));
    }
    if (stats) *stats = local;
    return c;
}

VideoSequence deep_decode(const DeepModel& m, const container::Container& c) {
    if (c.codec_id != container::kDeep)
        throw container::ContainerError("container was not produced by the deep codec");
    if (c.table_version != rans::kScaleTableVersion)
        throw container::ContainerError("unsupported scale-table version");
    const int ph = (c.height + 63) / 64 * 64, pw = (c.width + 63) / 64 * 64;
    const int lh = ph / 16, lw = pw / 16;

    std::vector<ag::Var> rec(c.frames.size());
    std::vector<int> keys;
    {
        prof::StageScope stage(kStageResidual);
        for (size_t i = 0; i < c.frames.size(); ++i) {
            if (c.frames[i].role != container::kKey) continue;
            keys.push_back(int(i));
            auto y_hat = decode_latents(m.intra_em, c.frames[i].substreams, lh, lw);
            rec[i] = m.intra.dec(y_hat);
        }
    }
    if (keys.empty() || keys.back() != int(c.frames.size()) - 1 || keys.front() != 0)
        throw container::ContainerError("stream must start and end with key frames");

    for (size_t k = 0; k + 1 < keys.size(); ++k) {
        for (auto& step : si::gop_schedule(keys[k], keys[k + 1])) {
            if (c.frames[size_t(step.target)].role != container::kWz)
                throw container::ContainerError("unexpected key frame inside GOP");
            auto si_frame =
                m.rife.interpolate(rec[size_t(step.ref0)], rec[size_t(step.ref1)], step.t);
            prof::StageScope stage(kStageResidual);
            auto y_hat = decode_latents(m.wz_em, c.frames[size_t(step.target)].substreams, lh, lw);
            auto y_si = m.wz.si_enc(si_frame);
            rec[size_t(step.target)] = m.wz.dec(ag::concat({y_hat, y_si}));
        }
    }

    VideoSequence out;
    out.width = c.width;
    out.height = c.height;
    for (size_t i = 0; i < rec.size(); ++i) {
        if (!rec[i]) throw container::ContainerError("frame " + std::to_string(i) + " unreachable");
        Frame f;
        f.index = int(i) + 1;
        f.pixels = crop(rec[i]->val, c.height, c.width);
        out.frames.push_back(std::move(f));
    }
    return out;
}

}  // namespace ddvc
