#include <stdio.h>
#include <string.h>

#include "calibra.h"

/* Binary procedure against a fixed rain/dry pattern; prints the final scores. */
int main(void) {
    CalibraEngine *engine = NULL;
    if (calibra_engine_new("{\"kind\":\"binary\",\"n\":10}", NULL, 3, &engine) != CALIBRA_STATUS_OK) {
        fprintf(stderr, "new: %s\n", calibra_last_error_message());
        return 1;
    }
    if (calibra_engine_dimension(engine) != 1) return 2;

    double c = 0.0;
    for (int t = 0; t < 1000; t++) {
        if (calibra_engine_next_forecast(engine, &c, 1) != CALIBRA_STATUS_OK) return 3;
        double a = (t % 3 == 0) ? 1.0 : 0.0;
        if (calibra_engine_observe(engine, &a, 1) != CALIBRA_STATUS_OK) return 4;
    }
    double a = 1.0;
    if (calibra_engine_observe(engine, &a, 1) != CALIBRA_STATUS_INVALID_STATE) return 5;
    if (strstr(calibra_last_error_message(), "pending") == NULL) return 6;

    CalibraScores s;
    if (calibra_engine_scores(engine, &s) != CALIBRA_STATUS_OK) return 7;
    CalibraDiagnostics d;
    if (calibra_engine_last_diagnostics(engine, &d) != CALIBRA_STATUS_OK || !d.satisfied) return 8;
    printf("%llu %.17g %.17g %s\n", (unsigned long long)s.t, s.k_classic, s.k_binned, calibra_version());
    calibra_engine_free(engine);
    calibra_engine_free(NULL);
    return 0;
}
