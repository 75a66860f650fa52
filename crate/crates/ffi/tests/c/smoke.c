#include <stdio.h>
#include <string.h>

#include "redrisk.h"

static int check(enum RrStatus s, const char *what) {
  if (s != RR_STATUS_OK) {
    const char *e = rr_last_error();
    fprintf(stderr, "%s failed with %d: %s\n", what, (int)s, e ? e : "(none)");
    return 1;
  }
  return 0;
}

int main(int argc, char **argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: smoke <cohort path>\n");
    return 2;
  }
  int8_t labels[] = {1, 1, -1, -1};
  double scores[] = {0.9, 0.4, 0.6, 0.1};
  double auc = 0, lo = 0, hi = 0;
  if (check(rr_auc(labels, scores, 4, &auc, &lo, &hi), "rr_auc")) return 1;
  if (auc != 0.75) return 1;

  RrCohort *c = NULL;
  if (check(rr_cohort_generate("n_patients = 25\n", 7, &c), "rr_cohort_generate")) return 1;
  if (check(rr_cohort_save(c, argv[1], NULL), "rr_cohort_save")) return 1;
  size_t patients = 0, assessments = 0;
  if (check(rr_cohort_counts(c, &patients, &assessments), "rr_cohort_counts")) return 1;
  rr_cohort_free(c);

  if (rr_cohort_generate("signal_strength = 3.0\n", 0, &c) != RR_STATUS_CONFIG_ERROR) return 1;
  if (strstr(rr_last_error(), "signal_strength") == NULL) return 1;

  printf("%s %zu %zu\n", rr_version(), patients, assessments);
  return 0;
}
