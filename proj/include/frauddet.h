/*
 * frauddet — hybrid payment-fraud decision engine.
 *
 * C interface over the engine: opaque handles, integer status codes, JSON
 * strings for structured data. Every function that produces a string
 * allocates it with malloc; release it with fd_string_free. On any non-zero
 * status, fd_last_error() returns a thread-local description.
 */

#ifndef FRAUDDET_H
#define FRAUDDET_H

#ifdef __cplusplus
extern "C" {
#endif

#ifndef FD_API
#define FD_API __attribute__((visibility("default")))
#endif

typedef struct fd_engine fd_engine;

enum fd_status {
    FD_OK = 0,
    FD_EINVAL = 1,     /* bad argument or configuration */
    FD_ENOTFOUND = 2,  /* unknown user or trace */
    FD_EWARMUP = 3,    /* profile not warmed; response body still returned */
    FD_EDATA = 4,      /* malformed or inconsistent data */
    FD_EINTEGRITY = 5, /* stored state fails its invariants */
    FD_EASSERT = 6,    /* reference replay diverged */
    FD_EINTERNAL = 7
};

FD_API const char* fd_version(void);

/* Thread-local message describing the most recent failure on this thread. */
FD_API const char* fd_last_error(void);

FD_API void fd_string_free(char* s);

/*
 * Engine lifecycle. config_json may be NULL or "{}" for defaults; see the
 * README for the schema (thresholds, score, hmm, detector, data_dir).
 */
FD_API int fd_engine_new(const char* config_json, fd_engine** out_engine);
FD_API void fd_engine_free(fd_engine* engine);

/*
 * Ingest one batch of newline-delimited event-log lines:
 *   {"user":...,"day":...,"kind":...,"count":...,"transfer":...}
 * All lines must carry the same transfer id. Idempotent per transfer id.
 * Returns {"transfer":...,"accepted":...}.
 */
FD_API int fd_engine_ingest_events(fd_engine* engine, const char* ndjson, char** out_ack_json);

/*
 * Decide a payment request {"txn","user","amount","location","day"}.
 * Warmed profiles get {"txn","verdict","case","score","delta","trace"} and
 * FD_OK; unwarmed profiles get a warm-up response body and FD_EWARMUP.
 */
FD_API int fd_engine_handle_payment(fd_engine* engine, const char* request_json,
                                    char** out_response_json);

FD_API int fd_engine_profile(fd_engine* engine, const char* user, char** out_profile_json);
FD_API int fd_engine_trace(fd_engine* engine, const char* trace_id, char** out_trace_json);

/*
 * Fit spending profiles offline from newline-delimited transaction records
 * {"user","amount"[,"day"]}. Returns a per-user summary array.
 */
FD_API int fd_engine_train(fd_engine* engine, const char* txns_ndjson, char** out_summary_json);

/*
 * HTTP service over the engine (POST /payment, POST /events,
 * GET /profile/{user}, GET /trace/{id}). start binds (port 0 picks a free
 * port, reported via out_port) and serves on a background thread.
 */
FD_API int fd_engine_serve_start(fd_engine* engine, const char* host, int port, int* out_port);
FD_API int fd_engine_serve_wait(fd_engine* engine);
FD_API int fd_engine_serve_stop(fd_engine* engine);

/*
 * One-shot authentication score from an event log: the log's final day is
 * scored against the window of the days before it.
 * user may be NULL when the log covers a single user.
 */
FD_API int fd_score_events(const char* config_json, const char* ndjson, const char* user,
                           char** out_score_json);

/*
 * Run a simulation scenario (see README for the scenario schema). Returns
 * the metrics report and, when out_csv is non-NULL, the per-day decision
 * trajectory as CSV.
 */
FD_API int fd_run_scenario(const char* scenario_json, char** out_metrics_json, char** out_csv);

/* Hybrid vs mobile-only vs hmm-only false-positive comparison. */
FD_API int fd_compare_detectors(const char* scenario_json, char** out_report_json);

/*
 * Reproduce the recorded one-week worked example (two parameters, theft the
 * next day). Returns the trace; FD_EASSERT when any quantity diverges.
 */
FD_API int fd_replay_example(char** out_trace_json);

#ifdef __cplusplus
}
#endif

#endif /* FRAUDDET_H */
