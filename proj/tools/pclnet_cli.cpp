#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "pclnet/pclnet.h"

namespace fs = std::filesystem;

namespace {

enum class Verbosity { error, info, debug };

Verbosity verbosity() {
  const char* v = std::getenv("PCLNET_LOG");
  if (!v) return Verbosity::info;
  const std::string s = v;
  if (s == "error") return Verbosity::error;
  if (s == "debug") return Verbosity::debug;
  return Verbosity::info;
}

void info(const std::string& msg) {
  if (verbosity() != Verbosity::error) std::cerr << "[pclnet] " << msg << '\n';
}

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(pcl_status s, const std::string& context) {
  if (s != PCL_OK) throw Failure(context + ": " + pcl_last_error());
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using Config = std::unique_ptr<pcl_config, Deleter<pcl_config, pcl_config_free>>;
using Scene = std::unique_ptr<pcl_scene, Deleter<pcl_scene, pcl_scene_free>>;
using Labels = std::unique_ptr<pcl_labels, Deleter<pcl_labels, pcl_labels_free>>;
using Cluster = std::unique_ptr<pcl_cluster, Deleter<pcl_cluster, pcl_cluster_free>>;
using Dataset = std::unique_ptr<pcl_dataset, Deleter<pcl_dataset, pcl_dataset_free>>;
using Encoder = std::unique_ptr<pcl_encoder, Deleter<pcl_encoder, pcl_encoder_free>>;
using Classifier = std::unique_ptr<pcl_classifier, Deleter<pcl_classifier, pcl_classifier_free>>;
using Report = std::unique_ptr<pcl_report, Deleter<pcl_report, pcl_report_free>>;

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string out = "out";
  std::string scene, labels, ckpt, classifier, dataset, manifest, prediction, train_samples;
  int shots = 0;
};

std::string require_input(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Failure("missing input: " + flag + " is required");
  return value;
}

std::string out_path(const Options& o, const char* name) { return (fs::path(o.out) / name).string(); }

Config load_config(const Options& o) {
  pcl_config* raw = nullptr;
  if (o.config.empty())
    check(pcl_config_default(&raw), "config");
  else
    check(pcl_config_load(o.config.c_str(), &raw), "config " + o.config);
  Config cfg(raw);
  if (o.seed_set) check(pcl_config_set_seed(cfg.get(), o.seed), "--seed");
  if (o.threads > 0) check(pcl_config_set_threads(cfg.get(), o.threads), "--threads");
  if (o.shots > 0) check(pcl_config_set_shots(cfg.get(), o.shots), "--shots");
  int threads = 1;
  check(pcl_config_threads(cfg.get(), &threads), "config");
  check(pcl_set_threads(threads), "--threads");
  return cfg;
}

void prepare_out(const Options& o, const pcl_config* cfg) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Failure("cannot create output directory " + o.out + ": " + ec.message());
  char* text = nullptr;
  check(pcl_config_format(cfg, &text), "config");
  std::ofstream f(out_path(o, "config.ini"), std::ios::binary);
  f << text;
  pcl_string_free(text);
  if (!f) throw Failure("cannot write " + out_path(o, "config.ini"));
}

Scene load_scene(const Options& o) {
  pcl_scene* s = nullptr;
  check(pcl_scene_load(require_input(o.scene, "--scene").c_str(), &s), "scene");
  return Scene(s);
}

Labels load_labels(const std::string& path, const std::string& flag) {
  pcl_labels* l = nullptr;
  check(pcl_labels_load(require_input(path, flag).c_str(), &l), flag);
  return Labels(l);
}

Encoder load_encoder(const Options& o) {
  if (o.ckpt.empty()) throw Failure("checkpoint not found: --ckpt is required");
  pcl_encoder* e = nullptr;
  check(pcl_encoder_load(o.ckpt.c_str(), &e), "encoder");
  return Encoder(e);
}

void cmd_synth(const Options& o) {
  Config cfg = load_config(o);
  prepare_out(o, cfg.get());
  pcl_scene* s = nullptr;
  pcl_labels* l = nullptr;
  check(pcl_synth(cfg.get(), &s, &l), "synth");
  Scene scene(s);
  Labels labels(l);
  check(pcl_scene_save(scene.get(), out_path(o, "scene.t3b").c_str()), "synth");
  check(pcl_labels_save(labels.get(), out_path(o, "labels.lbl").c_str()), "synth");
  check(pcl_labels_save_png(labels.get(), out_path(o, "labels.png").c_str()), "synth");
  int h = 0, w = 0;
  pcl_scene_shape(scene.get(), &h, &w);
  info("synth: " + std::to_string(h) + "x" + std::to_string(w) + " scene written to " + o.out);
}

void cmd_cluster(const Options& o) {
  Config cfg = load_config(o);
  Scene scene = load_scene(o);
  prepare_out(o, cfg.get());
  pcl_cluster* c = nullptr;
  check(pcl_cluster_run(cfg.get(), scene.get(), &c), "cluster");
  Cluster cluster(c);
  check(pcl_cluster_save_csv(cluster.get(), out_path(o, "clusters.csv").c_str()), "cluster");
  std::size_t n = 0;
  int k = 0, it = 0;
  pcl_cluster_info(cluster.get(), &n, &k, &it);
  info("cluster: " + std::to_string(n) + " candidates, K=" + std::to_string(k) + ", " +
       std::to_string(it) + " iterations");
}

void cmd_collect(const Options& o) {
  Config cfg = load_config(o);
  Scene scene = load_scene(o);
  prepare_out(o, cfg.get());
  pcl_dataset* d = nullptr;
  check(pcl_collect(cfg.get(), scene.get(), &d), "collect");
  Dataset ds(d);
  check(pcl_dataset_save(ds.get(), out_path(o, "dataset.pds").c_str(),
                         out_path(o, "manifest.csv").c_str()),
        "collect");
  std::size_t n = 0;
  pcl_dataset_size(ds.get(), &n);
  info("collect: " + std::to_string(n) + " anchor patches");
}

void progress(int epoch, int step, double loss, double lr, void*) {
  if (verbosity() == Verbosity::debug) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "[pclnet] pretrain epoch %d step %d loss %.6f lr %g", epoch,
                  step, loss, lr);
    std::cerr << buf << '\n';
  }
}

void cmd_pretrain(const Options& o) {
  Config cfg = load_config(o);
  Scene scene = load_scene(o);
  pcl_dataset* d = nullptr;
  const std::string manifest = o.manifest;
  check(pcl_dataset_load(require_input(o.dataset, "--dataset").c_str(),
                         manifest.empty() ? nullptr : manifest.c_str(), &d),
        "dataset");
  Dataset ds(d);
  prepare_out(o, cfg.get());
  pcl_encoder* e = nullptr;
  check(pcl_pretrain(cfg.get(), ds.get(), scene.get(), progress, nullptr, &e), "pretrain");
  Encoder enc(e);
  check(pcl_encoder_save(enc.get(), out_path(o, "encoder.ckpt").c_str()), "pretrain");
  check(pcl_encoder_save_trace(enc.get(), out_path(o, "loss.csv").c_str()), "pretrain");
  info("pretrain: encoder written to " + out_path(o, "encoder.ckpt"));
}

void cmd_finetune(const Options& o) {
  Config cfg = load_config(o);
  Encoder enc = load_encoder(o);
  Scene scene = load_scene(o);
  Labels truth = load_labels(o.labels, "--labels");
  prepare_out(o, cfg.get());
  pcl_classifier* c = nullptr;
  pcl_labels* t = nullptr;
  check(pcl_finetune(cfg.get(), enc.get(), scene.get(), truth.get(), &c, &t), "finetune");
  Classifier clf(c);
  Labels train(t);
  check(pcl_classifier_save(clf.get(), out_path(o, "classifier.ckpt").c_str()), "finetune");
  check(pcl_labels_save(train.get(), out_path(o, "train.lbl").c_str()), "finetune");
  double acc = 0;
  pcl_classifier_validation_accuracy(clf.get(), &acc);
  char buf[96];
  std::snprintf(buf, sizeof buf, "finetune: validation accuracy %.4f", acc);
  info(buf);
}

void cmd_predict(const Options& o) {
  Config cfg = load_config(o);
  Encoder enc = load_encoder(o);
  if (o.classifier.empty()) throw Failure("checkpoint not found: --classifier is required");
  pcl_classifier* c = nullptr;
  check(pcl_classifier_load(o.classifier.c_str(), &c), "classifier");
  Classifier clf(c);
  Scene scene = load_scene(o);
  prepare_out(o, cfg.get());
  pcl_labels* p = nullptr;
  check(pcl_predict(enc.get(), clf.get(), scene.get(), &p), "predict");
  Labels pred(p);
  check(pcl_labels_save(pred.get(), out_path(o, "prediction.lbl").c_str()), "predict");
  check(pcl_labels_save_png(pred.get(), out_path(o, "prediction.png").c_str()), "predict");
  info("predict: map written to " + out_path(o, "prediction.png"));
}

void save_report(const Options& o, const pcl_labels* pred, const pcl_labels* truth,
                 const pcl_labels* exclude, const char* report_name, const char* csv_name) {
  pcl_report* r = nullptr;
  check(pcl_evaluate(pred, truth, exclude, &r), "eval");
  Report report(r);
  check(pcl_report_save(report.get(), out_path(o, report_name).c_str()), "eval");
  check(pcl_report_save_confusion_csv(report.get(), out_path(o, csv_name).c_str()), "eval");
  double oa = 0, aa = 0, kappa = 0;
  pcl_report_metrics(report.get(), &oa, &aa, &kappa);
  char buf[128];
  std::snprintf(buf, sizeof buf, "eval %s: OA %.4f AA %.4f kappa %.4f", report_name, oa, aa, kappa);
  info(buf);
}

void cmd_eval(const Options& o) {
  Config cfg = load_config(o);
  Labels pred = load_labels(o.prediction, "--prediction");
  Labels truth = load_labels(o.labels, "--labels");
  Labels train;
  if (!o.train_samples.empty()) train = load_labels(o.train_samples, "--train-samples");
  prepare_out(o, cfg.get());
  save_report(o, pred.get(), truth.get(), nullptr, "report.txt", "confusion.csv");
  if (train) save_report(o, pred.get(), truth.get(), train.get(), "report_heldout.txt", "confusion_heldout.csv");
}

void cmd_features(const Options& o) {
  Config cfg = load_config(o);
  Encoder enc = load_encoder(o);
  Scene scene = load_scene(o);
  Labels labels = load_labels(o.labels, "--labels");
  prepare_out(o, cfg.get());
  check(pcl_features_csv(enc.get(), scene.get(), labels.get(), out_path(o, "features.csv").c_str()),
        "features");
  info("features: written to " + out_path(o, "features.csv"));
}

void print_line(const char* line, void*) { std::cout << line << '\n'; }

int cmd_selfcheck(const Options& o) {
  Config cfg = load_config(o);
  prepare_out(o, cfg.get());
  int passed = 0;
  check(pcl_selfcheck(print_line, nullptr, &passed), "selfcheck");
  if (!passed) {
    std::cerr << "pclnet: selfcheck failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pclnet: contrastive few-shot PolSAR classification"};
  app.set_version_flag("--version", std::string(pcl_version()));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file");
    sub->add_option("--seed", o.seed, "Run seed")->each([&](const std::string&) { o.seed_set = true; });
    sub->add_option("--threads", o.threads, "Worker threads (1 is bit-reproducible)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Output directory");
  };

  auto* synth = app.add_subcommand("synth", "Synthesize a labeled scene");
  auto* cluster = app.add_subcommand("cluster", "Wishart clustering of candidate samples");
  auto* collect = app.add_subcommand("collect", "Collect the pretraining dataset");
  auto* pretrain = app.add_subcommand("pretrain", "Contrastive pretraining of the encoder");
  auto* finetune = app.add_subcommand("finetune", "Few-shot fine-tuning of the linear head");
  auto* predict = app.add_subcommand("predict", "Classify every pixel of a scene");
  auto* eval = app.add_subcommand("eval", "Evaluate a prediction against labels");
  auto* features = app.add_subcommand("features", "Dump encoder features of labeled pixels");
  auto* selfcheck = app.add_subcommand("selfcheck", "Run gradient checks and oracles");
  for (auto* sub : {synth, cluster, collect, pretrain, finetune, predict, eval, features, selfcheck})
    common(sub);

  for (auto* sub : {cluster, collect, pretrain, finetune, predict, features})
    sub->add_option("--scene", o.scene, "Scene file (.t3b)");
  for (auto* sub : {finetune, eval, features})
    sub->add_option("--labels", o.labels, "Ground-truth labels (.lbl)");
  for (auto* sub : {finetune, predict, features})
    sub->add_option("--ckpt", o.ckpt, "Encoder checkpoint");
  finetune->add_option("--shots", o.shots, "Labeled samples per class")->check(CLI::PositiveNumber);
  pretrain->add_option("--dataset", o.dataset, "Pretraining dataset (.pds)");
  pretrain->add_option("--manifest", o.manifest, "Dataset manifest CSV");
  predict->add_option("--classifier", o.classifier, "Classifier checkpoint");
  eval->add_option("--prediction", o.prediction, "Predicted labels (.lbl)");
  eval->add_option("--train-samples", o.train_samples, "Training pixels to exclude (.lbl)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) cmd_synth(o);
    else if (*cluster) cmd_cluster(o);
    else if (*collect) cmd_collect(o);
    else if (*pretrain) cmd_pretrain(o);
    else if (*finetune) cmd_finetune(o);
    else if (*predict) cmd_predict(o);
    else if (*eval) cmd_eval(o);
    else if (*features) cmd_features(o);
    else if (*selfcheck) return cmd_selfcheck(o);
  } catch (const Failure& e) {
    std::cerr << "pclnet: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
