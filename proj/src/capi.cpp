#include "pclnet/pclnet.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "pclnet/error.hpp"
#include "pclnet/io.hpp"
#include "pclnet/parallel.hpp"
#include "pclnet/pipeline.hpp"
#include "pclnet/selfcheck.hpp"

using namespace pclnet;

struct pcl_config {
  RunConfig v;
};
struct pcl_scene {
  PolSARScene v;
};
struct pcl_labels {
  LabelMap v;
};
struct pcl_cluster {
  pipeline::ClusterStage v;
};
struct pcl_dataset {
  PretrainDataset v;
};
struct pcl_encoder {
  FrozenEncoder v;
  std::vector<TraceRow> trace;
};
struct pcl_classifier {
  LinearClassifier v;
  double validation_accuracy = 0;
};
struct pcl_report {
  EvalReport v;
};

namespace {

thread_local std::string g_last_error;

pcl_status code_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return PCL_ERR_INVALID_ARGUMENT;
    case ErrorKind::io: return PCL_ERR_IO;
    case ErrorKind::format: return PCL_ERR_FORMAT;
    case ErrorKind::numeric: return PCL_ERR_NUMERIC;
    case ErrorKind::state: return PCL_ERR_STATE;
  }
  return PCL_ERR_INTERNAL;
}

template <class F>
pcl_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return PCL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return PCL_ERR_INTERNAL;
}

template <class T>
T& deref(T* p, const char* what) {
  if (!p) fail(ErrorKind::invalid_argument, std::string(what) + " is null");
  return *p;
}

template <class T>
const T& deref(const T* p, const char* what) {
  if (!p) fail(ErrorKind::invalid_argument, std::string(what) + " is null");
  return *p;
}

template <class T>
void set_out(T** out, T* value) {
  *out = value;
}

void check_out(const void* out) {
  if (!out) fail(ErrorKind::invalid_argument, "output pointer is null");
}

const char* path_arg(const char* p) {
  if (!p || !*p) fail(ErrorKind::invalid_argument, "path is empty");
  return p;
}

template <class W>
void write_stream(const char* path, W&& writer) {
  std::ostringstream ss;
  writer(ss);
  io::write_text(path_arg(path), ss.str());
}

}  // namespace

extern "C" {

const char* pcl_last_error(void) { return g_last_error.c_str(); }

const char* pcl_version(void) { return "0.1.0"; }

pcl_status pcl_set_threads(int threads) {
  return guarded([&] {
    require(threads >= 1, "threads must be >= 1");
    set_thread_count(threads);
  });
}

void pcl_string_free(char* s) { std::free(s); }

pcl_status pcl_config_default(pcl_config** out) {
  return guarded([&] {
    check_out(out);
    set_out(out, new pcl_config{});
  });
}

pcl_status pcl_config_parse(const char* text, pcl_config** out) {
  return guarded([&] {
    check_out(out);
    if (!text) fail(ErrorKind::invalid_argument, "config text is null");
    RunConfig cfg = parse_config(text);
    set_out(out, new pcl_config{std::move(cfg)});
  });
}

pcl_status pcl_config_load(const char* path, pcl_config** out) {
  return guarded([&] {
    check_out(out);
    RunConfig cfg = load_config(path_arg(path));
    set_out(out, new pcl_config{std::move(cfg)});
  });
}

pcl_status pcl_config_format(const pcl_config* config, char** out_text) {
  return guarded([&] {
    check_out(out_text);
    const std::string s = format_config(deref(config, "config").v);
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out_text = buf;
  });
}

pcl_status pcl_config_set_seed(pcl_config* config, uint64_t seed) {
  return guarded([&] { deref(config, "config").v.seed = seed; });
}

pcl_status pcl_config_set_shots(pcl_config* config, int shots_per_class) {
  return guarded([&] {
    require(shots_per_class >= 1, "shots_per_class must be >= 1");
    deref(config, "config").v.finetune.shots_per_class = shots_per_class;
  });
}

pcl_status pcl_config_set_threads(pcl_config* config, int threads) {
  return guarded([&] {
    require(threads >= 1, "threads must be >= 1");
    deref(config, "config").v.threads = threads;
  });
}

pcl_status pcl_config_threads(const pcl_config* config, int* threads) {
  return guarded([&] {
    check_out(threads);
    *threads = deref(config, "config").v.threads;
  });
}

void pcl_config_free(pcl_config* config) { delete config; }

pcl_status pcl_synth(const pcl_config* config, pcl_scene** scene, pcl_labels** labels) {
  return guarded([&] {
    check_out(scene);
    check_out(labels);
    const RunConfig& cfg = deref(config, "config").v;
    cfg.validate();
    SyntheticScene s = synth_scene(cfg.synth_spec());
    auto* sc = new pcl_scene{std::move(s.scene)};
    *labels = new pcl_labels{std::move(s.labels)};
    *scene = sc;
  });
}

pcl_status pcl_scene_load(const char* path, pcl_scene** out) {
  return guarded([&] {
    check_out(out);
    PolSARScene s = io::read_scene(path_arg(path));
    set_out(out, new pcl_scene{std::move(s)});
  });
}

pcl_status pcl_scene_save(const pcl_scene* scene, const char* path) {
  return guarded([&] { io::write_scene(path_arg(path), deref(scene, "scene").v); });
}

pcl_status pcl_scene_shape(const pcl_scene* scene, int* height, int* width) {
  return guarded([&] {
    const auto& s = deref(scene, "scene").v;
    if (height) *height = s.height();
    if (width) *width = s.width();
  });
}

void pcl_scene_free(pcl_scene* scene) { delete scene; }

pcl_status pcl_labels_load(const char* path, pcl_labels** out) {
  return guarded([&] {
    check_out(out);
    LabelMap m = io::read_labels(path_arg(path));
    set_out(out, new pcl_labels{std::move(m)});
  });
}

pcl_status pcl_labels_save(const pcl_labels* labels, const char* path) {
  return guarded([&] { io::write_labels(path_arg(path), deref(labels, "labels").v); });
}

pcl_status pcl_labels_save_png(const pcl_labels* labels, const char* path) {
  return guarded([&] { io::write_label_png(path_arg(path), deref(labels, "labels").v); });
}

pcl_status pcl_labels_shape(const pcl_labels* labels, int* height, int* width, int* num_classes) {
  return guarded([&] {
    const auto& m = deref(labels, "labels").v;
    if (height) *height = m.height();
    if (width) *width = m.width();
    if (num_classes) *num_classes = m.num_classes();
  });
}

void pcl_labels_free(pcl_labels* labels) { delete labels; }

pcl_status pcl_cluster_run(const pcl_config* config, const pcl_scene* scene, pcl_cluster** out) {
  return guarded([&] {
    check_out(out);
    auto stage = pipeline::run_cluster(deref(scene, "scene").v, deref(config, "config").v);
    set_out(out, new pcl_cluster{std::move(stage)});
  });
}

pcl_status pcl_cluster_save_csv(const pcl_cluster* cluster, const char* path) {
  return guarded([&] {
    const auto& c = deref(cluster, "cluster").v;
    write_stream(path, [&](std::ostream& os) { write_cluster_csv(os, c.model); });
  });
}

pcl_status pcl_cluster_info(const pcl_cluster* cluster, size_t* samples, int* num_clusters,
                            int* iterations) {
  return guarded([&] {
    const auto& m = deref(cluster, "cluster").v.model;
    if (samples) *samples = m.assignments.size();
    if (num_clusters) *num_clusters = m.num_clusters;
    if (iterations) *iterations = m.iterations_run;
  });
}

void pcl_cluster_free(pcl_cluster* cluster) { delete cluster; }

pcl_status pcl_collect(const pcl_config* config, const pcl_scene* scene, pcl_dataset** out) {
  return guarded([&] {
    check_out(out);
    auto ds = pipeline::run_collect(deref(scene, "scene").v, deref(config, "config").v);
    set_out(out, new pcl_dataset{std::move(ds)});
  });
}

pcl_status pcl_dataset_save(const pcl_dataset* dataset, const char* pds_path,
                            const char* manifest_path) {
  return guarded([&] {
    const auto& ds = deref(dataset, "dataset").v;
    io::write_patches(path_arg(pds_path), ds);
    if (manifest_path)
      write_stream(manifest_path, [&](std::ostream& os) { write_manifest_csv(os, ds); });
  });
}

pcl_status pcl_dataset_load(const char* pds_path, const char* manifest_path, pcl_dataset** out) {
  return guarded([&] {
    check_out(out);
    PretrainDataset ds = io::read_patches(path_arg(pds_path));
    if (manifest_path) io::read_manifest(manifest_path, ds);
    set_out(out, new pcl_dataset{std::move(ds)});
  });
}

pcl_status pcl_dataset_size(const pcl_dataset* dataset, size_t* size) {
  return guarded([&] {
    check_out(size);
    *size = deref(dataset, "dataset").v.size();
  });
}

void pcl_dataset_free(pcl_dataset* dataset) { delete dataset; }

pcl_status pcl_pretrain(const pcl_config* config, const pcl_dataset* dataset,
                        const pcl_scene* scene, pcl_progress_fn progress, void* user,
                        pcl_encoder** out) {
  return guarded([&] {
    check_out(out);
    const ChannelStats stats = ChannelStats::of_scene(deref(scene, "scene").v);
    PretrainProgress cb;
    if (progress)
      cb = [&](const TraceRow& r) { progress(r.epoch, r.step, r.loss, r.learning_rate, user); };
    auto stage = pipeline::run_pretrain(deref(dataset, "dataset").v, stats,
                                        deref(config, "config").v, cb);
    set_out(out, new pcl_encoder{std::move(stage.encoder), std::move(stage.trace)});
  });
}

pcl_status pcl_encoder_random(const pcl_config* config, const pcl_scene* scene, pcl_encoder** out) {
  return guarded([&] {
    check_out(out);
    const ChannelStats stats = ChannelStats::of_scene(deref(scene, "scene").v);
    set_out(out, new pcl_encoder{pipeline::random_encoder(stats, deref(config, "config").v), {}});
  });
}

pcl_status pcl_encoder_save(const pcl_encoder* encoder, const char* path) {
  return guarded([&] { io::write_encoder(path_arg(path), deref(encoder, "encoder").v); });
}

pcl_status pcl_encoder_save_trace(const pcl_encoder* encoder, const char* path) {
  return guarded([&] {
    const auto& e = deref(encoder, "encoder");
    write_stream(path, [&](std::ostream& os) { write_trace_csv(os, e.trace); });
  });
}

pcl_status pcl_encoder_load(const char* path, pcl_encoder** out) {
  return guarded([&] {
    check_out(out);
    FrozenEncoder e = io::read_encoder(path_arg(path));
    set_out(out, new pcl_encoder{std::move(e), {}});
  });
}

void pcl_encoder_free(pcl_encoder* encoder) { delete encoder; }

pcl_status pcl_finetune(const pcl_config* config, const pcl_encoder* encoder,
                        const pcl_scene* scene, const pcl_labels* truth, pcl_classifier** out,
                        pcl_labels** train_map) {
  return guarded([&] {
    check_out(out);
    const auto& t = deref(truth, "truth").v;
    auto stage = pipeline::run_finetune(deref(encoder, "encoder").v, deref(scene, "scene").v, t,
                                        deref(config, "config").v);
    auto* clf = new pcl_classifier{std::move(stage.classifier), stage.validation_accuracy};
    if (train_map) {
      try {
        *train_map = new pcl_labels{samples_to_map(stage.train, t.height(), t.width(), t.num_classes())};
      } catch (...) {
        delete clf;
        throw;
      }
    }
    *out = clf;
  });
}

pcl_status pcl_classifier_validation_accuracy(const pcl_classifier* classifier, double* accuracy) {
  return guarded([&] {
    check_out(accuracy);
    *accuracy = deref(classifier, "classifier").validation_accuracy;
  });
}

pcl_status pcl_classifier_save(const pcl_classifier* classifier, const char* path) {
  return guarded([&] { io::write_classifier(path_arg(path), deref(classifier, "classifier").v); });
}

pcl_status pcl_classifier_load(const char* path, pcl_classifier** out) {
  return guarded([&] {
    check_out(out);
    LinearClassifier c = io::read_classifier(path_arg(path));
    set_out(out, new pcl_classifier{std::move(c), 0.0});
  });
}

void pcl_classifier_free(pcl_classifier* classifier) { delete classifier; }

pcl_status pcl_predict(const pcl_encoder* encoder, const pcl_classifier* classifier,
                       const pcl_scene* scene, pcl_labels** out) {
  return guarded([&] {
    check_out(out);
    LabelMap m = predict_map(deref(scene, "scene").v, deref(encoder, "encoder").v,
                             deref(classifier, "classifier").v);
    set_out(out, new pcl_labels{std::move(m)});
  });
}

pcl_status pcl_evaluate(const pcl_labels* prediction, const pcl_labels* truth,
                        const pcl_labels* exclude, pcl_report** out) {
  return guarded([&] {
    check_out(out);
    EvalReport r = evaluate(deref(prediction, "prediction").v, deref(truth, "truth").v,
                            exclude ? &exclude->v : nullptr);
    set_out(out, new pcl_report{std::move(r)});
  });
}

pcl_status pcl_report_metrics(const pcl_report* report, double* oa, double* aa, double* kappa) {
  return guarded([&] {
    const auto& r = deref(report, "report").v;
    if (oa) *oa = r.overall_accuracy;
    if (aa) *aa = r.average_accuracy;
    if (kappa) *kappa = r.kappa;
  });
}

pcl_status pcl_report_save(const pcl_report* report, const char* path) {
  return guarded([&] {
    const auto& r = deref(report, "report").v;
    write_stream(path, [&](std::ostream& os) { write_report_text(os, r); });
  });
}

pcl_status pcl_report_save_confusion_csv(const pcl_report* report, const char* path) {
  return guarded([&] {
    const auto& r = deref(report, "report").v;
    write_stream(path, [&](std::ostream& os) { write_confusion_csv(os, r); });
  });
}

void pcl_report_free(pcl_report* report) { delete report; }

pcl_status pcl_features_csv(const pcl_encoder* encoder, const pcl_scene* scene,
                            const pcl_labels* labels, const char* path) {
  return guarded([&] {
    const auto& e = deref(encoder, "encoder").v;
    const auto& s = deref(scene, "scene").v;
    const auto& l = deref(labels, "labels").v;
    write_stream(path, [&](std::ostream& os) { pipeline::write_features_csv(os, e, s, l); });
  });
}

pcl_status pcl_selfcheck(pcl_line_fn log, void* user, int* passed) {
  return guarded([&] {
    check_out(passed);
    const bool ok = run_selfcheck([&](const std::string& line) {
      if (log) log(line.c_str(), user);
    });
    *passed = ok ? 1 : 0;
  });
}

}  // extern "C"
