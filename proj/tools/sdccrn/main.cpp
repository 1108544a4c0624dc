#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdccrn/checkpoint.hpp"
#include "sdccrn/enhance.hpp"
#include "sdccrn/manifest.hpp"
#include "sdccrn/streaming.hpp"
#include "sdccrn/wav.hpp"

namespace {

using namespace sdccrn;
using nlohmann::json;

int cmd_train(const std::string& config_path, const std::string& resume) {
  RunConfig cfg = load_run_config(config_path);
  if (cfg.data.train_manifest.empty())
    throw std::runtime_error("config: data.train_manifest is required for training");
  Manifest train = load_manifest(cfg.data.train_manifest);
  Manifest val =
      cfg.data.val_manifest.empty() ? Manifest{} : load_manifest(cfg.data.val_manifest);
  MixtureDataset data(train, val, cfg.analysis().sample_rate, cfg.data.chunk_seconds,
                      cfg.batch_size, cfg.data.snr_lo, cfg.data.snr_hi, cfg.seed);

  auto model = make_model(cfg);
  Trainer trainer(cfg, *model, data);
  if (!resume.empty()) trainer.resume_from(resume);
  trainer.run(std::cout);
  std::cout << "done: " << trainer.state().global_step << " steps, checkpoints in "
            << cfg.checkpoint_dir << std::endl;
  return 0;
}

int cmd_enhance(const std::string& ckpt, const std::string& in_path, const std::string& out_path,
                bool streaming) {
  RunConfig cfg;
  auto model = load_model_from_checkpoint(ckpt, &cfg);
  const std::vector<float> wave = load_wav_checked(in_path, cfg.analysis().sample_rate);

  std::vector<float> out;
  if (streaming) {
    const SdccrnModel<float>* m = model->sdccrn();
    if (!m) throw std::runtime_error("streaming mode requires an sdccrn checkpoint");
    StreamResult res = enhance_streaming(*m, wave);
    out = std::move(res.wave);
    std::printf("xrt %.3f\n", res.xrt);
  } else {
    out = enhance_offline(*model, wave);
  }
  save_wav(out_path, out, cfg.analysis().sample_rate);
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& pairs_path,
                 const std::string& out_csv) {
  RunConfig cfg;
  auto model = load_model_from_checkpoint(ckpt, &cfg);
  const AnalysisConfig& ana = cfg.analysis();

  std::ifstream pf(pairs_path);
  if (!pf) throw std::runtime_error("cannot open pairs file: " + pairs_path);
  std::ofstream csv(out_csv);
  if (!csv) throw std::runtime_error("cannot write metrics file: " + out_csv);
  csv << "noisy,clean,si_snr_db,si_snri_db,lsd_db,error\n";

  double sum_si = 0, sum_sii = 0, sum_lsd = 0;
  int64_t ok = 0, lineno = 0;
  std::string line;
  while (std::getline(pf, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string npath, cpath;
    try {
      json j = json::parse(line);
      npath = j.at("noisy").get<std::string>();
      cpath = j.at("clean").get<std::string>();
      const std::vector<float> noisy = load_wav_checked(npath, ana.sample_rate);
      const std::vector<float> clean = load_wav_checked(cpath, ana.sample_rate);
      if (noisy.size() != clean.size()) throw std::runtime_error("length mismatch");
      const std::vector<float> est = enhance_offline(*model, noisy);
      const double si = si_snr_db(est, clean);
      const double sii = si - si_snr_db(noisy, clean);
      const double lsd = lsd_db(est, clean, ana);
      char buf[256];
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", si, sii, lsd);
      csv << npath << ',' << cpath << ',' << buf << ",\n";
      sum_si += si;
      sum_sii += sii;
      sum_lsd += lsd;
      ++ok;
    } catch (const std::exception& e) {
      csv << npath << ',' << cpath << ",,,," << e.what() << "\n";
    }
  }
  if (ok > 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", sum_si / ok, sum_sii / ok, sum_lsd / ok);
    csv << "mean,," << buf << ",\n";
    std::printf("files %lld mean_si_snr %.2f dB mean_si_snri %.2f dB mean_lsd %.3f dB\n",
                static_cast<long long>(ok), sum_si / ok, sum_sii / ok, sum_lsd / ok);
  } else {
    std::printf("no files evaluated\n");
  }
  return 0;
}

int cmd_scan(const std::string& dir, const std::string& out, int rate,
             const std::string& noise_substring) {
  Manifest m = scan_directory(dir, rate, noise_substring);
  save_manifest(out, m);
  int64_t speech = 0, noise = 0;
  for (const auto& e : m.entries) (e.kind == "speech" ? speech : noise) += 1;
  std::printf("scanned %zu files: %lld speech, %lld noise -> %s\n", m.entries.size(),
              static_cast<long long>(speech), static_cast<long long>(noise), out.c_str());
  return 0;
}

int cmd_inspect(const std::string& ckpt) {
  RunConfig cfg;
  auto model = load_model_from_checkpoint(ckpt, &cfg);
  const ParamRegistry<float>& reg = model->registry();

  std::printf("kind %s\n", model->kind().c_str());
  std::printf("parameters %lld\n", static_cast<long long>(reg.parameter_count()));

  std::map<std::string, int64_t> by_module;
  for (const auto& [name, p] : reg.params)
    by_module[name.substr(0, name.find('.'))] += p.numel();
  for (const auto& [mod, n] : by_module)
    std::printf("module %s %lld\n", mod.c_str(), static_cast<long long>(n));

  if (const SdccrnModel<float>* m = model->sdccrn()) {
    NoGradGuard guard;
    const NdArray<float> a = m->compression.alpha().val();  // copy: alpha() is a temporary
    const AnalysisConfig& ana = cfg.analysis();
    const double hz_per_bin = static_cast<double>(ana.sample_rate) / ana.fft_size;
    std::printf("alpha_csv bin,frequency_hz,alpha\n");
    for (int64_t k = 0; k < a.numel(); ++k)
      std::printf("%lld,%.1f,%.6f\n", static_cast<long long>(k + 1),
                  (static_cast<double>(k) + 1.0) * hz_per_bin, static_cast<double>(a[k]));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"super-wide-band speech denoiser (sdccrn)"};
  app.require_subcommand(1);

  std::string config_path, resume, ckpt, in_path, out_path, pairs_path, dir, manifest_out,
      noise_substring = "noise";
  bool streaming = false;
  int rate = 32000;

  CLI::App* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--resume", resume, "checkpoint directory to resume from");

  CLI::App* enh = app.add_subcommand("enhance", "denoise a WAV file");
  enh->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  enh->add_option("--in", in_path, "noisy input WAV")->required();
  enh->add_option("--out", out_path, "enhanced output WAV")->required();
  enh->add_flag("--streaming", streaming, "use the streaming engine and report xRT");

  CLI::App* ev = app.add_subcommand("evaluate", "metrics over (noisy, clean) pairs");
  ev->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  ev->add_option("--pairs", pairs_path, "JSON-lines file with {noisy, clean} paths")->required();
  ev->add_option("--out", out_path, "metrics CSV output")->required();

  CLI::App* scan = app.add_subcommand("scan", "build a manifest from a directory tree");
  scan->add_option("--dir", dir, "directory to scan")->required();
  scan->add_option("--out", manifest_out, "manifest JSON-lines output")->required();
  scan->add_option("--rate", rate, "required sample rate");
  scan->add_option("--noise-substring", noise_substring, "paths containing this are noise");

  CLI::App* ins = app.add_subcommand("inspect", "report parameters and the learned alpha curve");
  ins->add_option("--ckpt", ckpt, "checkpoint directory")->required();

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(config_path, resume);
    if (enh->parsed()) return cmd_enhance(ckpt, in_path, out_path, streaming);
    if (ev->parsed()) return cmd_evaluate(ckpt, pairs_path, out_path);
    if (scan->parsed()) return cmd_scan(dir, manifest_out, rate, noise_substring);
    if (ins->parsed()) return cmd_inspect(ckpt);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
