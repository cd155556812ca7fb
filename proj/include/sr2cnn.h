/* C interface to the sr2cnn shared library: opaque handles + status codes.
 * Every function returns SR2_OK (0) or a nonzero status; sr2_last_error()
 * describes the most recent failure on the calling thread. Strings returned
 * through char** out-parameters are heap-allocated; release them with
 * sr2_string_free(). */
#ifndef SR2CNN_H
#define SR2CNN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SR2_OK 0
#define SR2_E_USAGE 2    /* bad arguments or configuration */
#define SR2_E_DATA 3     /* file format error or checkpoint/dataset mismatch */
#define SR2_E_NUMERIC 4  /* numerical failure (non-finite loss or gradient) */
#define SR2_E_INTERNAL 5

/* SNR value meaning "no noise" in channel configs and SIGDS records. */
#define SR2_SNR_CLEAN 32767
/* min_snr value that disables the SNR sieve. */
#define SR2_SNR_NO_SIEVE (-32768)

typedef struct sr2_corpus sr2_corpus;
typedef struct sr2_model sr2_model;

const char* sr2_version(void);
const char* sr2_last_error(void);
void sr2_string_free(char* s);

/* ---------- corpus ---------- */

typedef struct sr2_channel_opts {
    int awgn;         /* nonzero: AWGN at each record's SNR */
    int rayleigh;     /* nonzero: per-frame random complex tap gains */
    int multipath;    /* nonzero: 3-tap FIR channel (delays 0/1/2) */
    double clock_ppm; /* sample-clock offset bound in ppm, 0 disables */
    double cfo_max;   /* carrier-frequency-offset bound (cycles/sample), 0 disables */
} sr2_channel_opts;
void sr2_channel_opts_init(sr2_channel_opts* opts);

/* classes_csv: "all" or a comma list from
 * BPSK,QPSK,8PSK,16QAM,64QAM,PAM4,GFSK,CPFSK,B-FM,AM-DSB,AM-SSB.
 * snr_grid: "lo:hi:step" or a comma list of integer dB values;
 * frames_per_class must divide evenly across the grid. */
int sr2_corpus_generate(const char* classes_csv, int frames_per_class, const char* snr_grid,
                        uint64_t seed, const sr2_channel_opts* channel, sr2_corpus** out);
int sr2_corpus_read(const char* path, sr2_corpus** out);
int sr2_corpus_write(const sr2_corpus* corpus, const char* path);
int sr2_corpus_sieve(const sr2_corpus* corpus, int min_snr_db, sr2_corpus** out);
int sr2_corpus_info(const sr2_corpus* corpus, uint32_t* frame_count, uint16_t* num_classes,
                    uint16_t* channels, uint16_t* frame_len);
void sr2_corpus_free(sr2_corpus* corpus);

/* ---------- training ---------- */

typedef struct sr2_train_opts {
    const char* unknown_csv; /* withheld class names, "" or NULL for none */
    int min_snr;             /* SNR sieve threshold; SR2_SNR_NO_SIEVE disables */
    int batch;
    double lr;
    double center_alpha;
    double lambda_ct;
    double lambda_r;
    int ce_on, ct_on, r_on;  /* ablation switches */
    int max_epochs;
    int patience;
    int semantic_dim;
    uint64_t seed;
    uint64_t split_seed;
} sr2_train_opts;
void sr2_train_opts_init(sr2_train_opts* opts);

/* Trains on the known classes of the split; the returned model is the
 * best-validation checkpoint. When history_csv_path is non-NULL the
 * per-epoch history (epoch,ce,ct,r,total,val_softmax_acc) is written there. */
int sr2_train(const sr2_corpus* corpus, const sr2_train_opts* opts,
              const char* history_csv_path, sr2_model** out);

int sr2_model_save(const sr2_model* model, const char* path);
int sr2_model_load(const char* path, sr2_model** out);
int sr2_model_info(const sr2_model* model, int* num_known, int* semantic_dim);
void sr2_model_free(sr2_model* model);

/* ---------- evaluation / zero-shot discrimination ---------- */

typedef struct sr2_disc_opts {
    const char* unknown_csv;
    int min_snr;
    uint64_t split_seed;
    uint64_t order_seed; /* presentation order of the mixed test stream */
    double lambda1;
    double lambda2;
    const char* metric; /* mahalanobis | euclidean | diagonal | scaled_identity */
    int update_known;
    int fit_unknown_cov;
    double shrinkage;
} sr2_disc_opts;
void sr2_disc_opts_init(sr2_disc_opts* opts);

/* Softmax + cluster accuracy report (JSON) on the known test split. */
int sr2_evaluate(const sr2_model* model, const sr2_corpus* corpus, const sr2_disc_opts* opts,
                 char** json_out);

/* Full zero-shot run; returns the report and the unknown-registry snapshot. */
int sr2_discriminate(const sr2_model* model, const sr2_corpus* corpus,
                     const sr2_disc_opts* opts, char** report_json_out,
                     char** registry_json_out);

/* One report row per lambda1 (CSV, header included) plus a JSON summary with
 * the discrimination interval. */
int sr2_sweep(const sr2_model* model, const sr2_corpus* corpus, const sr2_disc_opts* opts,
              const double* lambdas, int n_lambdas, char** csv_out, char** summary_json_out);

/* FNV-1a 64 of a file's bytes (manifest bookkeeping). */
int sr2_hash_file(const char* path, uint64_t* out);

#ifdef __cplusplus
}
#endif

#endif /* SR2CNN_H */
