// Copyright 2026 The natts Authors
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


/* C interface to natts: corpus generation, training, synthesis, robustness
 * evaluation and the verification suites.
 *
 * Objects are opaque handles created by natts_*_new / _load / _generate and
 * released by the matching _free. Every fallible call returns a natts_status;
 * on failure natts_last_error() describes the problem. The message is stored
 * per thread and stays valid until the next failing call on that thread.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with natts_free_string(). */

#ifndef NATTS_NATTS_H_
#define NATTS_NATTS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NATTS_API __declspec(dllexport)
#else
#define NATTS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum natts_status {
  NATTS_OK = 0,
  NATTS_INVALID_ARGUMENT = 1, /* null handle or out-parameter */
  NATTS_ERROR = 2,            /* bad configuration, data or file */
  NATTS_DIVERGED = 3,         /* non-finite loss or gradient during training */
  NATTS_CHECK_FAILED = 4,     /* a verification check failed */
  NATTS_OUT_OF_MEMORY = 5,
  NATTS_INTERNAL = 6
} natts_status;

typedef struct natts_config natts_config;
typedef struct natts_dataset natts_dataset;
typedef struct natts_model natts_model;

/* Receives one line of progress output (JSON for training, text for verify). */
typedef void (*natts_log_fn)(const char* line, void* user);

NATTS_API const char* natts_version(void);
NATTS_API const char* natts_status_name(natts_status status);
NATTS_API const char* natts_last_error(void);
NATTS_API void natts_free_string(char* s);

/* ---- configuration ---------------------------------------------------- */

typedef struct natts_key_info {
  const char* name;
  const char* default_value;
  const char* section; /* corpus, model, train, synth, eval */
  const char* doc;
  const char* kind;    /* int, double, bool, string, choice */
  const char* choices; /* "a|b|c" for choice keys, otherwise "" */
} natts_key_info;

NATTS_API size_t natts_config_key_count(void);
/* Pointers in *info stay valid for the life of the process. */
NATTS_API natts_status natts_config_key_info(size_t index, natts_key_info* info);

NATTS_API natts_status natts_config_new(natts_config** out);
NATTS_API void natts_config_free(natts_config* config);
/* Unknown keys and malformed values are rejected. */
NATTS_API natts_status natts_config_set(natts_config* config, const char* key,
                                        const char* value);
/* "key = value" lines; '#' starts a comment. Later values win. */
NATTS_API natts_status natts_config_load_file(natts_config* config,
                                              const char* path);
/* *value stays valid until the key is next modified. */
NATTS_API natts_status natts_config_get(const natts_config* config,
                                        const char* key, const char** value);
NATTS_API natts_status natts_config_dump(const natts_config* config,
                                         int documented, char** text);

/* ---- datasets ---------------------------------------------------------- */

/* Vocabulary and corpus from the corpus keys and the seed. Labels are
 * withheld from whole speakers when labeled_fraction < 1. */
NATTS_API natts_status natts_dataset_generate(const natts_config* config,
                                              natts_dataset** out);
NATTS_API natts_status natts_dataset_load(const char* dir, natts_dataset** out);
NATTS_API natts_status natts_dataset_save(const natts_dataset* dataset,
                                          const char* dir);
NATTS_API size_t natts_dataset_size(const natts_dataset* dataset);
NATTS_API size_t natts_dataset_labeled(const natts_dataset* dataset);
NATTS_API void natts_dataset_free(natts_dataset* dataset);

/* ---- training ---------------------------------------------------------- */

typedef struct natts_train_options {
  const char* checkpoint_path; /* required */
  const char* metrics_path;    /* JSON lines; NULL disables */
  const char* resume_path;     /* continue from this checkpoint; NULL starts fresh */
  const char* loss_svg_path;   /* loss curve written at the end; NULL disables */
  const natts_dataset* validation; /* duration MAE is logged when set */
  natts_log_fn log;
  void* user;
} natts_train_options;

/* Trains until the configured number of steps. The vocabulary size, speaker
 * count, frame width and hop are taken from the dataset. When resuming, the
 * checkpoint's configuration is used except for `steps`, which may extend
 * the run. */
NATTS_API natts_status natts_train(const natts_config* config,
                                   const natts_dataset* dataset,
                                   const natts_train_options* options);

NATTS_API natts_status natts_model_load(const char* checkpoint_path,
                                        natts_model** out);
NATTS_API void natts_model_free(natts_model* model);
NATTS_API size_t natts_model_step(const natts_model* model);
NATTS_API natts_status natts_model_config(const natts_model* model,
                                          char** text);
/* Mean absolute duration error (seconds) over the labeled utterances. */
NATTS_API natts_status natts_model_duration_mae(const natts_model* model,
                                                const natts_dataset* dataset,
                                                double* mae);

/* ---- synthesis --------------------------------------------------------- */

/* Synthesizes the token sequences of `input` (every utterance, or only
 * `utterance_id` when it is not NULL) using the synth keys of `config`.
 * When out_dir is not NULL it receives a dataset directory of the outputs,
 * alignment.jsonl with the duration plan of each utterance, and SVG plots
 * when write_svg is set. *out, when not NULL, receives the outputs. */
NATTS_API natts_status natts_synthesize(const natts_model* model,
                                        const natts_config* config,
                                        const natts_dataset* input,
                                        const char* utterance_id,
                                        const char* out_dir,
                                        natts_dataset** out);

/* ---- evaluation -------------------------------------------------------- */

/* Robustness report over a directory of outputs: UDR, WER with its
 * deletion / insertion / substitution split, per-utterance rows. Either path
 * may be NULL; *report_json, when not NULL, receives the JSON report. */
NATTS_API natts_status natts_evaluate(const natts_config* config,
                                      const natts_dataset* outputs,
                                      const char* json_path,
                                      const char* csv_path,
                                      char** report_json);

/* ---- verification ------------------------------------------------------ */

NATTS_API size_t natts_verify_suite_count(void);
NATTS_API const char* natts_verify_suite_name(size_t index);
/* Runs the named suites (comma-separated; NULL or "" runs all). Returns
 * NATTS_CHECK_FAILED when any check fails. */
NATTS_API natts_status natts_verify(const char* only, uint64_t seed,
                                    natts_log_fn log, void* user);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* NATTS_NATTS_H_ */
