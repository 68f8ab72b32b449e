// Copyright 2026 The capsyolo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAPSYOLO_CAPSYOLO_H_
#define CAPSYOLO_CAPSYOLO_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CY_API __declspec(dllexport)
#else
#define CY_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cy_status {
    CY_OK = 0,
    CY_ERR_DIMENSION = 1,
    CY_ERR_CONTRACT = 2,
    CY_ERR_CONFIG = 3,
    CY_ERR_IO = 4,
    CY_ERR_VALIDATION = 5,
    CY_ERR_BAD_INPUT = 6,
    CY_ERR_NUMERIC = 7,
    CY_ERR_INTERNAL = 99
} cy_status;

CY_API const char* cy_version(void);
CY_API const char* cy_status_name(cy_status status);

/* Message of the last failed call on this thread; "" if none. */
CY_API const char* cy_last_error(void);
/* Machine-readable reason of the last CY_ERR_BAD_INPUT, e.g. "undecodable_image". */
CY_API const char* cy_last_error_reason(void);

/* Every char** output is heap memory owned by the caller. */
CY_API void cy_string_free(char* s);

/* ---- dataset forge ---- */

/* sources: comma-separated roots. manifest_path may be NULL.
   report_json receives per-class counts, skipped files and the split summary. */
CY_API cy_status cy_forge_build(const char* sources, const char* targets_path, const char* out_path,
                                const char* manifest_path, uint64_t seed, double train_fraction,
                                size_t image_size, char** report_json);

/* ok is set to 1 when no class is empty and the max/min ratio is within ratio_bound
   (ratio_bound <= 0 disables the ratio check). */
CY_API cy_status cy_container_validate(const char* path, double ratio_bound, char** report_json, int* ok);

/* Class-distribution bar chart as an SVG document. */
CY_API cy_status cy_container_stats_svg(const char* path, char** svg);

/* ---- training and evaluation ---- */

typedef struct cy_epoch_record {
    size_t epoch;
    double train_loss;
    double val_loss; /* NaN without a validation split */
    double train_acc;
    double val_acc;
} cy_epoch_record;

typedef void (*cy_epoch_callback)(const cy_epoch_record* record, void* user);

/* config_path (train.*, loss.*, model.* keys) and history_path may be NULL. */
CY_API cy_status cy_train(const char* data_path, const char* config_path, const char* model_out,
                          const char* history_path, cy_epoch_callback on_epoch, void* user, char** summary_json);

/* split: "train", "test" or "all". cm_csv may be NULL. */
CY_API cy_status cy_evaluate(const char* data_path, const char* model_path, const char* split, char** metrics_json,
                             char** cm_csv);

CY_API cy_status cy_plot_history(const char* history_csv_path, char** svg);

typedef struct cy_model cy_model;

CY_API cy_status cy_model_load(const char* path, cy_model** out);
/* {"version", "classes", "image_size", "parameters", "config"} */
CY_API cy_status cy_model_info(const cy_model* model, char** info_json);
CY_API void cy_model_free(cy_model* model);

/* ---- diagnosis service ---- */

typedef struct cy_service_options {
    const char* model_path;
    const char* recommendations_path;
    double confidence_threshold;
    double detection_threshold;
    double nms_iou;
    size_t max_upload_bytes;
    int strict_classes;
} cy_service_options;

CY_API void cy_service_options_default(cy_service_options* options);

typedef struct cy_diagnoser cy_diagnoser;

CY_API cy_status cy_diagnoser_create(const cy_service_options* options, cy_diagnoser** out);

/* Settings from a key=value file (may be NULL), then CAPSYOLO_* environment
   variables, then `overrides` (key=value lines, may be NULL). */
CY_API cy_status cy_diagnoser_open(const char* config_path, const char* overrides, cy_diagnoser** out);

/* Listen address and upload limit from the resolved settings. */
CY_API cy_status cy_diagnoser_listen(const cy_diagnoser* d, char** host, int* port, size_t* max_upload_bytes);

/* Thread-safe. Fails with CY_ERR_BAD_INPUT for oversized or undecodable uploads. */
CY_API cy_status cy_diagnoser_diagnose(const cy_diagnoser* d, const uint8_t* bytes, size_t len, char** report_json);
CY_API cy_status cy_diagnoser_health(const cy_diagnoser* d, char** health_json);
CY_API void cy_diagnoser_free(cy_diagnoser* d);

#ifdef __cplusplus
}
#endif

#endif /* CAPSYOLO_CAPSYOLO_H_ */
