#include <math.h>
#include <stdio.h>
#include <string.h>

#include "plausible.h"

#define CHECK(cond)                                                        \
  do {                                                                     \
    if (!(cond)) {                                                         \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,      \
              pl_last_error_message());                                    \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(int argc, char **argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: smoke STORE_TSV\n");
    return 2;
  }

  PlStore *store = NULL;
  CHECK(pl_store_load(argv[1], &store) == PL_STATUS_OK);
  CHECK(pl_store_unique_len(store) == 3);
  CHECK(pl_store_total(store) == 10);

  uint64_t n = 0;
  CHECK(pl_store_count(store, "dog", "chase", "cat", &n) == PL_STATUS_OK);
  CHECK(n == 5);
  CHECK(pl_store_count(store, "dog", "chase", "42", &n) ==
        PL_STATUS_INVALID_ARGUMENT);
  CHECK(strlen(pl_last_error_message()) > 0);

  PlSampler *sampler = NULL;
  CHECK(pl_sampler_new(store, 100, 7, &sampler) == PL_STATUS_OK);
  for (int i = 0; i < 20; i++) {
    char *triple = NULL;
    bool collision = true;
    CHECK(pl_sampler_sample(sampler, &triple, &collision) == PL_STATUS_OK);
    CHECK(strchr(triple, '\t') != NULL);
    pl_string_free(triple);
  }
  pl_sampler_free(sampler);
  pl_store_free(store);

  PlStore *missing = NULL;
  CHECK(pl_store_load("/nonexistent/store.tsv", &missing) == PL_STATUS_IO);
  CHECK(pl_store_load(NULL, &missing) == PL_STATUS_NULL_POINTER);

  uint8_t predictions[4] = {1, 0, 1, 0};
  uint8_t labels[4] = {1, 0, 0, 0};
  PlReport report;
  CHECK(pl_report_compute(predictions, labels, 4, &report) == PL_STATUS_OK);
  CHECK(report.tp == 1 && report.fp == 1 && report.tn == 2 && report.fn_ == 0);
  CHECK(fabs(report.accuracy - 0.75) < 1e-12);
  CHECK(report.fp_share == 1.0);

  printf("ok %s\n", pl_version());
  return 0;
}
