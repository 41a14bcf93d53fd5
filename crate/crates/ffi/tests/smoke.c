#include <math.h>
#include <stdio.h>
#include "eldp.h"

int main(void) {
    EldpProblem *problem = NULL;
    if (eldp_problem_bundled("case1", &problem) != ELDP_STATUS_OK) {
        fprintf(stderr, "load: %s\n", eldp_last_error());
        return 1;
    }
    EldpOptions opts;
    eldp_options_default(&opts);
    opts.method = ELDP_METHOD_TANGENT;
    EldpReport *report = NULL;
    if (eldp_solve(problem, &opts, &report) != ELDP_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", eldp_last_error());
        return 1;
    }
    double p[3];
    size_t n = eldp_report_dispatch(report, p, 3);
    printf("%zu %.3f %.3f %.3f %.2f\n", n, p[0], p[1], p[2], eldp_report_total_cost(report));
    eldp_report_free(report);

    if (eldp_problem_bundled("nope", &problem) == ELDP_STATUS_OK || problem != NULL) {
        return 1;
    }
    eldp_problem_free(problem);
    return 0;
}
