#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "pclnet/pclnet.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expectation failed: %s (last error: %s)\n", __FILE__, __LINE__, \
              #cond, pcl_last_error());                                \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

#define REQUIRE_OK(call)                                               \
  do {                                                                 \
    pcl_status s_ = (call);                                            \
    if (s_ != PCL_OK) {                                                \
      fprintf(stderr, "%s:%d: %s returned %d: %s\n", __FILE__, __LINE__, #call, (int)s_, \
              pcl_last_error());                                       \
      return 1;                                                        \
    }                                                                  \
  } while (0)

static const char* kConfig =
    "seed = 3\n"
    "[synth]\nheight = 24\nwidth = 48\n"
    "[cluster]\nnum_clusters = 4\n"
    "[collect]\nsamples_per_cluster = 20\n"
    "[pretrain]\nepochs = 2\nbatch_size = 16\nbank_size = 32\n"
    "[finetune]\nepochs = 20\nshots_per_class = 5\nvalidation_per_class = 20\n";

static int steps_seen = 0;
static void on_step(int epoch, int step, double loss, double lr, void* user) {
  (void)epoch;
  (void)step;
  (void)loss;
  (void)lr;
  ++*(int*)user;
}

static int lines_seen = 0;
static void on_line(const char* line, void* user) {
  (void)line;
  (void)user;
  ++lines_seen;
}

static int errors(void) {
  pcl_config* cfg = NULL;
  EXPECT(pcl_config_parse("[pretrain]\ntemperature = -1\n", &cfg) == PCL_ERR_INVALID_ARGUMENT);
  EXPECT(cfg == NULL);
  EXPECT(strstr(pcl_last_error(), "temperature must be > 0") != NULL);
  EXPECT(pcl_config_load("/nonexistent/pclnet.ini", &cfg) == PCL_ERR_IO);
  EXPECT(pcl_config_parse(NULL, &cfg) == PCL_ERR_INVALID_ARGUMENT);
  EXPECT(pcl_config_default(NULL) == PCL_ERR_INVALID_ARGUMENT);
  EXPECT(pcl_set_threads(0) == PCL_ERR_INVALID_ARGUMENT);

  pcl_encoder* enc = NULL;
  EXPECT(pcl_encoder_load("/nonexistent/encoder.ckpt", &enc) != PCL_OK);
  EXPECT(strstr(pcl_last_error(), "checkpoint not found") != NULL);

  pcl_scene* scene = NULL;
  FILE* f = fopen("capi_garbage.t3b", "wb");
  fputs("not a scene", f);
  fclose(f);
  EXPECT(pcl_scene_load("capi_garbage.t3b", &scene) == PCL_ERR_FORMAT);
  remove("capi_garbage.t3b");

  REQUIRE_OK(pcl_config_default(&cfg));
  EXPECT(strlen(pcl_last_error()) == 0);
  EXPECT(pcl_cluster_run(cfg, NULL, NULL) == PCL_ERR_INVALID_ARGUMENT);
  pcl_config_free(cfg);
  pcl_config_free(NULL);
  return 0;
}

static int pipeline(void) {
  pcl_config* cfg = NULL;
  REQUIRE_OK(pcl_config_parse(kConfig, &cfg));
  char* text = NULL;
  REQUIRE_OK(pcl_config_format(cfg, &text));
  EXPECT(strstr(text, "num_clusters = 4") != NULL);
  pcl_string_free(text);
  int threads = 0;
  REQUIRE_OK(pcl_config_threads(cfg, &threads));
  EXPECT(threads == 1);

  pcl_scene* scene = NULL;
  pcl_labels* truth = NULL;
  REQUIRE_OK(pcl_synth(cfg, &scene, &truth));
  int h = 0, w = 0, c = 0;
  REQUIRE_OK(pcl_scene_shape(scene, &h, &w));
  EXPECT(h == 24 && w == 48);
  REQUIRE_OK(pcl_labels_shape(truth, &h, &w, &c));
  EXPECT(c == 3);

  REQUIRE_OK(pcl_scene_save(scene, "capi_scene.t3b"));
  pcl_scene* loaded = NULL;
  REQUIRE_OK(pcl_scene_load("capi_scene.t3b", &loaded));
  pcl_scene_free(loaded);
  remove("capi_scene.t3b");

  pcl_cluster* cl = NULL;
  REQUIRE_OK(pcl_cluster_run(cfg, scene, &cl));
  size_t samples = 0;
  int k = 0, iters = 0;
  REQUIRE_OK(pcl_cluster_info(cl, &samples, &k, &iters));
  EXPECT(samples > 0);
  EXPECT(k == 4);
  EXPECT(iters >= 1);
  pcl_cluster_free(cl);

  pcl_dataset* ds = NULL;
  REQUIRE_OK(pcl_collect(cfg, scene, &ds));
  size_t n = 0;
  REQUIRE_OK(pcl_dataset_size(ds, &n));
  EXPECT(n > 0 && n <= samples);

  pcl_encoder* enc = NULL;
  int steps = 0;
  REQUIRE_OK(pcl_pretrain(cfg, ds, scene, on_step, &steps, &enc));
  EXPECT(steps == (int)(2 * ((n + 15) / 16)));
  steps_seen = steps;

  pcl_classifier* clf = NULL;
  pcl_labels* train = NULL;
  REQUIRE_OK(pcl_finetune(cfg, enc, scene, truth, &clf, &train));
  double val = -1;
  REQUIRE_OK(pcl_classifier_validation_accuracy(clf, &val));
  EXPECT(val >= 0 && val <= 1);

  pcl_labels* pred = NULL;
  REQUIRE_OK(pcl_predict(enc, clf, scene, &pred));
  pcl_report* all = NULL;
  pcl_report* held = NULL;
  REQUIRE_OK(pcl_evaluate(pred, truth, NULL, &all));
  REQUIRE_OK(pcl_evaluate(pred, truth, train, &held));
  double oa = 0, aa = 0, kappa = 0;
  REQUIRE_OK(pcl_report_metrics(all, &oa, &aa, &kappa));
  EXPECT(oa >= 0 && oa <= 1 && kappa <= oa);

  EXPECT(pcl_evaluate(pred, truth, NULL, NULL) == PCL_ERR_INVALID_ARGUMENT);

  pcl_report_free(all);
  pcl_report_free(held);
  pcl_labels_free(pred);
  pcl_labels_free(train);
  pcl_classifier_free(clf);
  pcl_encoder_free(enc);
  pcl_dataset_free(ds);
  pcl_labels_free(truth);
  pcl_scene_free(scene);
  pcl_config_free(cfg);
  return 0;
}

int main(void) {
  EXPECT(strlen(pcl_version()) > 0);
  if (errors() != 0) return 1;
  if (pipeline() != 0) return 1;
  int passed = 0;
  REQUIRE_OK(pcl_selfcheck(on_line, NULL, &passed));
  EXPECT(passed == 1);
  EXPECT(lines_seen > 0);
  if (failures) {
    fprintf(stderr, "%d expectation(s) failed\n", failures);
    return 1;
  }
  printf("C API: all checks passed (%d pretraining steps, %d selfcheck lines)\n", steps_seen, lines_seen);
  return 0;
}
