/* Minimal consumer of the mwchart C ABI: compute a statistic, design limits,
 * evaluate the in-control ARL, and run a two-sample chart. */
#include <stdio.h>
#include <stdlib.h>

#include "mwchart.h"

static int fail(const char *where) {
    const char *msg = mw_last_error_message();
    fprintf(stderr, "%s: %s\n", where, msg ? msg : "(no message)");
    return 1;
}

int main(void) {
    printf("mwchart %s\n", mw_version());

    const double x[] = {1.0, 3.0, 5.0};
    const double y[] = {2.0, 4.0};
    double stat = 0.0;
    if (mw_statistic(x, 3, y, 2, true, &stat) != MwStatus_Ok) {
        return fail("mw_statistic");
    }
    printf("statistic = %.1f\n", stat);

    MwLimits *limits = NULL;
    if (mw_limits_new(50, 5, 217, false, 500.0, &limits) != MwStatus_Ok) {
        return fail("mw_limits_new");
    }
    printf("limits: ucl=%lld lcl=%lld\n", (long long)mw_limits_ucl(limits),
           (long long)mw_limits_lcl(limits));

    double arl = 0.0, smc = 0.0;
    if (mw_arl0(limits, MwArlMethod_FixedReference, 1, 0, &arl, &smc) != MwStatus_Ok) {
        return fail("mw_arl0");
    }
    printf("fixed-reference ARL0 = %.2f\n", arl);

    /* deliberately exceed the exact engine's budget to see the status code */
    MwLimits *big = NULL;
    if (mw_limits_new(2000, 25, 40000, false, 500.0, &big) != MwStatus_Ok) {
        return fail("mw_limits_new(big)");
    }
    MwStatus status = mw_arl0(big, MwArlMethod_Exact, 1, 10, &arl, NULL);
    if (status != MwStatus_CapacityExceeded) {
        fprintf(stderr, "expected capacity status, got %d\n", (int)status);
        return 1;
    }
    printf("capacity guard: %s\n", mw_last_error_message());
    mw_limits_free(big);

    double reference[20];
    for (int i = 0; i < 20; i++) {
        reference[i] = (double)(i + 1);
    }
    const double tests[10] = {5.0, 9.0, 11.0, 15.0, 3.0, 25.0, 30.0, 31.0, 32.0, 40.0};
    double stats[2];
    uint8_t signals[2];
    MwLimits *small = NULL;
    if (mw_limits_new(20, 5, 85, false, 100.0, &small) != MwStatus_Ok) {
        return fail("mw_limits_new(small)");
    }
    if (mw_run_chart(small, reference, 20, tests, 2, true, stats, signals) != MwStatus_Ok) {
        return fail("mw_run_chart");
    }
    printf("chart: %.1f (%s), %.1f (%s)\n", stats[0], signals[0] ? "OUT" : "ok", stats[1],
           signals[1] ? "OUT" : "ok");
    mw_limits_free(small);
    mw_limits_free(limits);

    puts("demo ok");
    return 0;
}
