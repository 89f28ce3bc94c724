#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>

#include "ddvc/classic_wz.hpp"
#include "ddvc/codec.hpp"
#include "ddvc/config.hpp"
#include "ddvc/eval.hpp"
#include "ddvc/training.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace ddvc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Cli {
    std::string config_path;
    cfg::Overrides ov;
};

void opt(CLI::App* cmd, Cli& c, const char* flag, const char* key, const char* desc) {
    cmd->add_option_function<std::string>(
        flag, [&c, key](const std::string& v) { c.ov.emplace_back(key, v); }, desc);
}

void flag_opt(CLI::App* cmd, Cli& c, const char* name, const char* key, const char* desc) {
    cmd->add_flag_callback(name, [&c, key] { c.ov.emplace_back(key, "true"); }, desc);
}

void apply_threads(const cfg::RunConfig& rc) {
#ifdef _OPENMP
    omp_set_num_threads(cfg::effective_threads(rc));
#else
    (void)rc;
#endif
}

std::string git_describe() {
    std::string out;
    if (FILE* p = popen("git describe --always --dirty 2>/dev/null", "r")) {
        char buf[256];
        if (fgets(buf, sizeof(buf), p)) out = buf;
        pclose(p);
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

void write_run_info(const std::string& dir, const cfg::RunConfig& rc) {
    fs::create_directories(dir);
    std::ofstream(dir + "/run_config.txt") << cfg::to_text(rc);
    std::ofstream env(dir + "/environment.txt");
    env << "git = " << git_describe() << "\n";
    env << "compiler = " << __VERSION__ << "\n";
    env << "threads = " << cfg::effective_threads(rc) << "\n";
}

VideoSequence read_input(const cfg::RunConfig& rc, const std::string& path) {
    if (path.empty()) throw cfg::ConfigError("missing input path");
    auto fmt = rc.format == "yuv" ? InputFormat::yuv420p : InputFormat::png_dir;
    return read_sequence(path, fmt, rc.width, rc.height, rc.max_frames);
}

std::unique_ptr<DeepModel> load_model(const std::string& ckpt, bool trainable = false) {
    if (ckpt.empty()) throw cfg::ConfigError("deep codec needs --ckpt");
    return DeepModel::from_checkpoint(ckpt, trainable);
}

// deterministic textured clip with slow global translation
VideoSequence synth_clip(int n, int size, uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    struct Wave {
        float fx, fy, phase, amp, vx, vy;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < 8; ++i)
        waves.push_back({u(rng) * 0.4f + 0.04f, u(rng) * 0.4f + 0.04f, u(rng) * 6.2832f,
                         u(rng) * 0.1f + 0.03f, u(rng) * 2.f - 1.f, u(rng) * 2.f - 1.f});
    VideoSequence seq;
    seq.width = seq.height = size;
    for (int f = 0; f < n; ++f) {
        Frame fr;
        fr.index = f + 1;
        fr.pixels = Tensor(3, size, size);
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    float v = 0.5f;
                    for (auto& w : waves)
                        v += w.amp * std::sin(w.fx * (x - w.vx * f) + w.fy * (y - w.vy * f) +
                                              w.phase + 0.7f * ch);
                    fr.pixels.at(ch, y, x) = std::clamp(v, 0.f, 1.f);
                }
        seq.frames.push_back(std::move(fr));
    }
    return seq;
}

container::Container zero_bits_container(const VideoSequence& seq, int gop) {
    container::Container c;
    c.width = uint16_t(seq.width);
    c.height = uint16_t(seq.height);
    c.gop_size = uint8_t(gop);
    for (size_t i = 0; i < seq.count(); ++i) {
        container::FrameStream fsr;
        fsr.role = i % size_t(gop) == 0 || i + 1 == seq.count() ? container::kKey
                                                                : container::kWz;
        c.frames.push_back(std::move(fsr));
    }
    return c;
}

int cmd_make_data(const cfg::RunConfig& rc) {
    if (rc.output.empty()) throw cfg::ConfigError("make-data needs --out");
    auto seq = synth_clip(rc.frames, rc.size, rc.seed);
    write_sequence_png(seq, rc.output);
    write_run_info(rc.output, rc);
    std::printf("{\"frames\": %d, \"size\": %d, \"dir\": \"%s\"}\n", rc.frames, rc.size,
                rc.output.c_str());
    return 0;
}

int cmd_train(const cfg::RunConfig& rc) {
    if (rc.output.empty()) throw cfg::ConfigError("train needs --out");
    std::unique_ptr<DeepModel> m;
    if (!rc.ckpt_init.empty()) {
        m = DeepModel::from_checkpoint(rc.ckpt_init, true);
    } else {
        if (rc.stage == 2) throw cfg::ConfigError("train stage 2 needs --ckpt-init");
        auto cc = rc.model == "full" ? CodecConfig::full() : CodecConfig::toy();
        cc.lambda_id = rc.lambda_id;
        auto rcfg = rc.model == "full" ? si::RifeConfig::full() : si::RifeConfig::toy();
        m = std::make_unique<DeepModel>(cc, rcfg, rc.seed, true, rc.metric);
    }
    auto data = train::make_synthetic_dataset(rc.triplets, rc.crop, rc.motion, rc.seed);
    auto tc = train::TrainConfig::for_stage(rc.stage);
    tc.lambda = m->lambda();
    tc.metric = m->metric;
    tc.batch = rc.batch;
    tc.crop = rc.crop;
    tc.seed = rc.seed;
    tc.zero_si = rc.zero_si;
    if (rc.epochs > 0) tc.max_epochs = rc.epochs;
    fs::create_directories(rc.output);
    tc.checkpoint_path = rc.output + "/model.ckpt";
    tc.loss_csv = rc.output + "/loss.csv";
    auto res = train::train_stage(*m, data, tc);
    write_run_info(rc.output, rc);
    json j{{"epochs", res.train_loss.size()},
           {"best_epoch", res.best_epoch},
           {"best_val_loss", res.best_val},
           {"final_train_loss", res.train_loss.back()},
           {"checkpoint", tc.checkpoint_path}};
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_encode(const cfg::RunConfig& rc) {
    if (rc.output.empty()) throw cfg::ConfigError("encode needs --out");
    auto seq = read_input(rc, rc.input);
    container::Container c;
    json j{{"codec", rc.codec}, {"frames", seq.count()}};
    if (rc.codec == "deep") {
        auto m = load_model(rc.ckpt);
        EncodeStats st;
        c = deep_encode(*m, seq, rc.gop, &st);
        j["est_bits"] = st.est_bits;
        j["actual_bits"] = st.actual_bits;
    } else {
        classic::ClassicStats st;
        c = classic::classic_encode(seq, rc.gop, rc.quality, &st);
        j["wz_syndrome_bits"] = st.wz_syndrome_bits;
    }
    container::write_file(c, rc.output);
    j["bpp"] = c.bpp();
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_decode(const cfg::RunConfig& rc) {
    if (rc.output.empty()) throw cfg::ConfigError("decode needs --out");
    auto c = container::read_file(rc.input.empty() ? throw cfg::ConfigError("decode needs --in")
                                                   : rc.input);
    VideoSequence out;
    if (c.codec_id == container::kDeep) {
        auto m = load_model(rc.ckpt);
        out = deep_decode(*m, c);
    } else {
        out = classic::classic_decode(c).video;
    }
    write_sequence_png(out, rc.output);
    write_run_info(rc.output, rc);
    json j{{"frames", out.count()}, {"width", out.width}, {"height", out.height}};
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_eval(const cfg::RunConfig& rc) {
    auto ref = read_input(rc, rc.ref);
    auto rec = read_input(rc, rc.rec);
    container::Container c = rc.bits.empty() ? zero_bits_container(ref, rc.gop)
                                             : container::read_file(rc.bits);
    auto r = eval::evaluate(ref, rec, c);
    if (!rc.output.empty()) {
        fs::create_directories(rc.output);
        eval::write_json(r, rc.output + "/report.json");
        eval::write_csv(r, rc.output + "/report.csv");
    }
    json j{{"bpp", r.bpp},
           {"avg_psnr", r.avg_psnr},
           {"avg_msssim", r.avg_msssim},
           {"avg_msssim_db", r.avg_msssim_db},
           {"frames", r.frames.size()}};
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_bench(const cfg::RunConfig& rc) {
    auto seq = read_input(rc, rc.input);
    json j{{"codec", rc.codec}};
    if (rc.codec == "deep") {
        auto m = load_model(rc.ckpt);
        auto rep = eval::profile(*m, seq, rc.gop, 5);
        j["encoder"] = {{"flops_by_stage", rep.encoder_flops},
                        {"total_flops", rep.encoder_total},
                        {"si_gen_calls", rep.encoder_si_gen_calls},
                        {"median_ms", rep.encoder_ms}};
        j["decoder"] = {{"flops_by_stage", rep.decoder_flops},
                        {"total_flops", rep.decoder_total},
                        {"si_gen_calls", rep.decoder_si_gen_calls},
                        {"median_ms", rep.decoder_ms}};
    } else {
        std::vector<double> enc_ms, dec_ms;
        classic::ClassicStats st;
        container::Container c;
        for (int i = 0; i < 5; ++i) {
            auto t0 = std::chrono::steady_clock::now();
            c = classic::classic_encode(seq, rc.gop, rc.quality, i == 0 ? &st : nullptr);
            enc_ms.push_back(std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count());
            t0 = std::chrono::steady_clock::now();
            classic::classic_decode(c);
            dec_ms.push_back(std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count());
        }
        std::sort(enc_ms.begin(), enc_ms.end());
        std::sort(dec_ms.begin(), dec_ms.end());
        json transcript = json::array();
        for (auto& f : c.frames)
            transcript.push_back({{"role", f.role == container::kKey ? "key" : "wz"},
                                  {"payload_bytes", f.payload_bytes()}});
        j["encoder"] = {{"median_ms", enc_ms[2]}};
        j["decoder"] = {{"median_ms", dec_ms[2]}};
        j["feedback"] = {{"wz_syndrome_bits", st.wz_syndrome_bits},
                         {"wz_frames", st.wz_frames},
                         {"frames", transcript}};
        j["bpp"] = c.bpp();
    }
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_si_dump(const cfg::RunConfig& rc) {
    if (rc.output.empty()) throw cfg::ConfigError("si-dump needs --out");
    auto seq = read_input(rc, rc.input);
    auto m = load_model(rc.ckpt);
    VideoSequence si;
    si.width = seq.width;
    si.height = seq.height;
    json per_frame = json::array();
    for (auto& g : split_gops(seq, rc.gop)) {
        if (!g.next_key_index) continue;
        for (auto& step : si::gop_schedule(g.key_index, *g.next_key_index)) {
            auto pick = [&](int idx) {
                for (auto& f : si.frames)
                    if (f.index == idx) return f.pixels;
                return seq.frames[size_t(idx - 1)].pixels;
            };
            auto i0 = ag::constant(pad_reflect(pick(step.ref0), 16));
            auto i1 = ag::constant(pad_reflect(pick(step.ref1), 16));
            Frame f;
            f.index = step.target;
            f.pixels = crop(m->rife.interpolate(i0, i1, step.t)->val, seq.height, seq.width);
            per_frame.push_back(
                {{"frame", step.target},
                 {"psnr", eval::psnr(f.pixels, seq.frames[size_t(step.target - 1)].pixels)}});
            si.frames.push_back(std::move(f));
        }
    }
    std::sort(si.frames.begin(), si.frames.end(),
              [](const Frame& a, const Frame& b) { return a.index < b.index; });
    write_sequence_png(si, rc.output);
    std::printf("%s\n", json{{"si_frames", per_frame}}.dump(2).c_str());
    return 0;
}

int cmd_visualize(const cfg::RunConfig& rc) {
    if (rc.output.empty()) throw cfg::ConfigError("visualize needs --out");
    auto seq = read_input(rc, rc.input);
    auto m = load_model(rc.ckpt);
    auto y = m->wz.enc(ag::constant(pad_reflect(seq.frames.at(0).pixels, 64)));
    auto paths = eval::visualize_latents(y->val, rc.output);
    std::printf("%s\n",
                json{{"channels", paths.size()}, {"dir", rc.output}}.dump(2).c_str());
    return 0;
}

int cmd_inspect(const cfg::RunConfig& rc) {
    if (rc.input.empty()) throw cfg::ConfigError("inspect needs --in");
    auto c = container::read_file(rc.input);
    json frames = json::array();
    for (auto& f : c.frames)
        frames.push_back({{"role", f.role == container::kKey ? "key" : "wz"},
                          {"substreams", f.substreams.size()},
                          {"payload_bytes", f.payload_bytes()}});
    json j{{"codec", c.codec_id == container::kDeep ? "deep" : "classic"},
           {"version", c.version},
           {"width", c.width},
           {"height", c.height},
           {"gop", c.gop_size},
           {"lambda_id", c.lambda_id},
           {"table_version", c.table_version},
           {"bpp", c.bpp()},
           {"frames", frames}};
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ddvc: distributed deep video compression toolkit"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* cmd;
        Cli cli;
        int (*run)(const cfg::RunConfig&);
    };
    std::vector<std::unique_ptr<Sub>> subs;
    auto sub = [&](const char* name, const char* desc, int (*run)(const cfg::RunConfig&)) {
        auto s = std::make_unique<Sub>();
        s->cmd = app.add_subcommand(name, desc);
        s->run = run;
        s->cmd->add_option("--config", s->cli.config_path, "flat key = value config file");
        auto* p = subs.emplace_back(std::move(s)).get();
        return p;
    };

    auto* md = sub("make-data", "write a synthetic PNG clip", cmd_make_data);
    opt(md->cmd, md->cli, "--out", "output", "output directory");
    opt(md->cmd, md->cli, "--frames", "frames", "clip length");
    opt(md->cmd, md->cli, "--size", "size", "frame size (square)");
    opt(md->cmd, md->cli, "--seed", "seed", "rng seed");

    auto* tr = sub("train", "train the deep codec on synthetic triplets", cmd_train);
    opt(tr->cmd, tr->cli, "--out", "output", "run directory");
    opt(tr->cmd, tr->cli, "--stage", "stage", "training stage, 1 or 2");
    opt(tr->cmd, tr->cli, "--ckpt-init", "ckpt_init", "initial checkpoint (stage 2)");
    opt(tr->cmd, tr->cli, "--model", "model", "toy or full network sizes");
    opt(tr->cmd, tr->cli, "--metric", "metric", "mse or msssim");
    opt(tr->cmd, tr->cli, "--lambda-id", "lambda_id", "lambda grid index 0..4");
    opt(tr->cmd, tr->cli, "--epochs", "epochs", "override stage default");
    opt(tr->cmd, tr->cli, "--batch", "batch", "batch size");
    opt(tr->cmd, tr->cli, "--triplets", "triplets", "synthetic dataset size");
    opt(tr->cmd, tr->cli, "--crop", "crop", "training crop (multiple of 64)");
    opt(tr->cmd, tr->cli, "--motion", "motion", "translate, rotate or zoom");
    opt(tr->cmd, tr->cli, "--seed", "seed", "rng seed");
    flag_opt(tr->cmd, tr->cli, "--zero-si", "zero_si", "ablation: zero the SI branch");

    auto* en = sub("encode", "encode a sequence into a container", cmd_encode);
    opt(en->cmd, en->cli, "--codec", "codec", "deep or classic");
    opt(en->cmd, en->cli, "--ckpt", "ckpt", "model checkpoint (deep)");
    opt(en->cmd, en->cli, "--in", "input", "input sequence (png dir or yuv file)");
    opt(en->cmd, en->cli, "--out", "output", "output container path");
    opt(en->cmd, en->cli, "--gop", "gop", "GOP size");
    opt(en->cmd, en->cli, "--qi", "quality", "classic quality preset 0..7");
    opt(en->cmd, en->cli, "--format", "format", "png or yuv");
    opt(en->cmd, en->cli, "--width", "width", "frame width (yuv)");
    opt(en->cmd, en->cli, "--height", "height", "frame height (yuv)");
    opt(en->cmd, en->cli, "--max-frames", "max_frames", "frame cap, 0 = all");
    opt(en->cmd, en->cli, "--seed", "seed", "rng seed");
    opt(en->cmd, en->cli, "--threads", "threads", "worker cap");

    auto* de = sub("decode", "decode a container to PNG frames", cmd_decode);
    opt(de->cmd, de->cli, "--in", "input", "container path");
    opt(de->cmd, de->cli, "--out", "output", "output directory");
    opt(de->cmd, de->cli, "--ckpt", "ckpt", "model checkpoint (deep)");
    opt(de->cmd, de->cli, "--threads", "threads", "worker cap");

    auto* ev = sub("eval", "quality metrics against a reference", cmd_eval);
    opt(ev->cmd, ev->cli, "--ref", "ref", "reference sequence");
    opt(ev->cmd, ev->cli, "--rec", "rec", "reconstructed sequence");
    opt(ev->cmd, ev->cli, "--bits", "bits", "container for bpp accounting");
    opt(ev->cmd, ev->cli, "--out", "output", "report directory");
    opt(ev->cmd, ev->cli, "--gop", "gop", "GOP size for role labels without --bits");
    opt(ev->cmd, ev->cli, "--format", "format", "png or yuv");
    opt(ev->cmd, ev->cli, "--width", "width", "frame width (yuv)");
    opt(ev->cmd, ev->cli, "--height", "height", "frame height (yuv)");

    auto* be = sub("bench", "complexity and latency report", cmd_bench);
    opt(be->cmd, be->cli, "--codec", "codec", "deep or classic");
    opt(be->cmd, be->cli, "--ckpt", "ckpt", "model checkpoint (deep)");
    opt(be->cmd, be->cli, "--in", "input", "input sequence");
    opt(be->cmd, be->cli, "--gop", "gop", "GOP size");
    opt(be->cmd, be->cli, "--qi", "quality", "classic quality preset");
    opt(be->cmd, be->cli, "--threads", "threads", "worker cap");

    auto* si = sub("si-dump", "write interpolated side-information frames", cmd_si_dump);
    opt(si->cmd, si->cli, "--in", "input", "input sequence");
    opt(si->cmd, si->cli, "--out", "output", "output directory");
    opt(si->cmd, si->cli, "--ckpt", "ckpt", "model checkpoint");
    opt(si->cmd, si->cli, "--gop", "gop", "GOP size");

    auto* vi = sub("visualize", "latent channel heat maps for the first frame", cmd_visualize);
    opt(vi->cmd, vi->cli, "--in", "input", "input sequence");
    opt(vi->cmd, vi->cli, "--out", "output", "output directory");
    opt(vi->cmd, vi->cli, "--ckpt", "ckpt", "model checkpoint");

    auto* in = sub("inspect", "dump container structure as JSON", cmd_inspect);
    opt(in->cmd, in->cli, "--in", "input", "container path");

    try {
        app.parse(argc, argv);
        for (auto& s : subs)
            if (s->cmd->parsed()) {
                auto rc = cfg::load_config(s->cli.config_path, s->cli.ov);
                apply_threads(rc);
                return s->run(rc);
            }
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const cfg::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
