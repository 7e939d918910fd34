#ifndef PCLNET_H
#define PCLNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef PCLNET_BUILDING_LIBRARY
#    define PCL_API __declspec(dllexport)
#  else
#    define PCL_API __declspec(dllimport)
#  endif
#else
#  define PCL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pcl_status {
  PCL_OK = 0,
  PCL_ERR_INVALID_ARGUMENT = 1,
  PCL_ERR_IO = 2,
  PCL_ERR_FORMAT = 3,
  PCL_ERR_NUMERIC = 4,
  PCL_ERR_STATE = 5,
  PCL_ERR_INTERNAL = 6
} pcl_status;

typedef struct pcl_config pcl_config;
typedef struct pcl_scene pcl_scene;
typedef struct pcl_labels pcl_labels;
typedef struct pcl_cluster pcl_cluster;
typedef struct pcl_dataset pcl_dataset;
typedef struct pcl_encoder pcl_encoder;
typedef struct pcl_classifier pcl_classifier;
typedef struct pcl_report pcl_report;

typedef void (*pcl_line_fn)(const char* line, void* user);
typedef void (*pcl_progress_fn)(int epoch, int step, double loss, double learning_rate,
                                void* user);

/* Message of the last failed call on this thread; "" if none. */
PCL_API const char* pcl_last_error(void);
PCL_API const char* pcl_version(void);
PCL_API pcl_status pcl_set_threads(int threads);
/* Frees strings returned through char** out-parameters. */
PCL_API void pcl_string_free(char* s);

/* Configuration */
PCL_API pcl_status pcl_config_default(pcl_config** out);
PCL_API pcl_status pcl_config_parse(const char* text, pcl_config** out);
PCL_API pcl_status pcl_config_load(const char* path, pcl_config** out);
PCL_API pcl_status pcl_config_format(const pcl_config* config, char** out_text);
PCL_API pcl_status pcl_config_set_seed(pcl_config* config, uint64_t seed);
PCL_API pcl_status pcl_config_set_shots(pcl_config* config, int shots_per_class);
PCL_API pcl_status pcl_config_set_threads(pcl_config* config, int threads);
PCL_API pcl_status pcl_config_threads(const pcl_config* config, int* threads);
PCL_API void pcl_config_free(pcl_config* config);

/* Scenes and label maps */
PCL_API pcl_status pcl_synth(const pcl_config* config, pcl_scene** scene, pcl_labels** labels);
PCL_API pcl_status pcl_scene_load(const char* path, pcl_scene** out);
PCL_API pcl_status pcl_scene_save(const pcl_scene* scene, const char* path);
PCL_API pcl_status pcl_scene_shape(const pcl_scene* scene, int* height, int* width);
PCL_API void pcl_scene_free(pcl_scene* scene);

PCL_API pcl_status pcl_labels_load(const char* path, pcl_labels** out);
PCL_API pcl_status pcl_labels_save(const pcl_labels* labels, const char* path);
PCL_API pcl_status pcl_labels_save_png(const pcl_labels* labels, const char* path);
PCL_API pcl_status pcl_labels_shape(const pcl_labels* labels, int* height, int* width,
                                    int* num_classes);
PCL_API void pcl_labels_free(pcl_labels* labels);

/* Wishart clustering of the candidate grid */
PCL_API pcl_status pcl_cluster_run(const pcl_config* config, const pcl_scene* scene,
                                   pcl_cluster** out);
PCL_API pcl_status pcl_cluster_save_csv(const pcl_cluster* cluster, const char* path);
PCL_API pcl_status pcl_cluster_info(const pcl_cluster* cluster, size_t* samples,
                                    int* num_clusters, int* iterations);
PCL_API void pcl_cluster_free(pcl_cluster* cluster);

/* Pretraining dataset collection */
PCL_API pcl_status pcl_collect(const pcl_config* config, const pcl_scene* scene,
                               pcl_dataset** out);
/* manifest_path may be NULL. */
PCL_API pcl_status pcl_dataset_save(const pcl_dataset* dataset, const char* pds_path,
                                    const char* manifest_path);
/* manifest_path may be NULL; provenance is then left empty. */
PCL_API pcl_status pcl_dataset_load(const char* pds_path, const char* manifest_path,
                                    pcl_dataset** out);
PCL_API pcl_status pcl_dataset_size(const pcl_dataset* dataset, size_t* size);
PCL_API void pcl_dataset_free(pcl_dataset* dataset);

/* Encoders. Standardization statistics are taken from `scene`. */
PCL_API pcl_status pcl_pretrain(const pcl_config* config, const pcl_dataset* dataset,
                                const pcl_scene* scene, pcl_progress_fn progress, void* user,
                                pcl_encoder** out);
PCL_API pcl_status pcl_encoder_random(const pcl_config* config, const pcl_scene* scene,
                                      pcl_encoder** out);
PCL_API pcl_status pcl_encoder_save(const pcl_encoder* encoder, const char* path);
/* Loss trace of pretraining (empty for loaded or random encoders). */
PCL_API pcl_status pcl_encoder_save_trace(const pcl_encoder* encoder, const char* path);
PCL_API pcl_status pcl_encoder_load(const char* path, pcl_encoder** out);
PCL_API void pcl_encoder_free(pcl_encoder* encoder);

/* Few-shot fine-tuning of the linear head; train_map receives the labeled
   training pixels and may be NULL. */
PCL_API pcl_status pcl_finetune(const pcl_config* config, const pcl_encoder* encoder,
                                const pcl_scene* scene, const pcl_labels* truth,
                                pcl_classifier** out, pcl_labels** train_map);
PCL_API pcl_status pcl_classifier_validation_accuracy(const pcl_classifier* classifier,
                                                      double* accuracy);
PCL_API pcl_status pcl_classifier_save(const pcl_classifier* classifier, const char* path);
PCL_API pcl_status pcl_classifier_load(const char* path, pcl_classifier** out);
PCL_API void pcl_classifier_free(pcl_classifier* classifier);

PCL_API pcl_status pcl_predict(const pcl_encoder* encoder, const pcl_classifier* classifier,
                               const pcl_scene* scene, pcl_labels** out);

/* exclude may be NULL; its labeled pixels are left out of the evaluation. */
PCL_API pcl_status pcl_evaluate(const pcl_labels* prediction, const pcl_labels* truth,
                                const pcl_labels* exclude, pcl_report** out);
PCL_API pcl_status pcl_report_metrics(const pcl_report* report, double* oa, double* aa,
                                      double* kappa);
PCL_API pcl_status pcl_report_save(const pcl_report* report, const char* path);
PCL_API pcl_status pcl_report_save_confusion_csv(const pcl_report* report, const char* path);
PCL_API void pcl_report_free(pcl_report* report);

PCL_API pcl_status pcl_features_csv(const pcl_encoder* encoder, const pcl_scene* scene,
                                    const pcl_labels* labels, const char* path);

/* Gradient-check and oracle suites; *passed is 1 when every check passes. */
PCL_API pcl_status pcl_selfcheck(pcl_line_fn log, void* user, int* passed);

#ifdef __cplusplus
}
#endif

#endif
