#include <stdio.h>
#include <stdlib.h>
#include "lipcert.h"

static const char *SCENARIO =
    "name = \"c_smoke\"\n"
    "[domain]\nkind = \"disc\"\ncenter = [0.0, 0.0]\nradius = 1.0\nh = 0.125\n"
    "[lagrangian]\nname = \"quadratic\"\n"
    "[g]\nkind = \"constant\"\nvalue = 1.0\n"
    "[phi]\nkind = \"affine\"\na = [0.0, 0.0]\nb = 0.0\n"
    "[schedule]\nk = [4, 16]\n";

int main(void) {
    LcScenario *s = NULL;
    if (lc_scenario_from_toml(SCENARIO, &s) != LC_STATUS_OK) {
        char msg[256];
        lc_last_error(msg, sizeof msg);
        fprintf(stderr, "scenario: %s\n", msg);
        return 1;
    }
    LcRun *r = NULL;
    if (lc_run(s, LC_STAGE_SOLVE, &r) != LC_STATUS_OK) {
        return 2;
    }
    size_t n = lc_run_vertex_count(r), got = 0;
    double *u = malloc(n * sizeof *u);
    if (lc_run_solution(r, u, n, &got) != LC_STATUS_OK || got != n) {
        return 3;
    }
    double lo = 0.0;
    for (size_t i = 0; i < n; i++) {
        if (u[i] < lo) lo = u[i];
    }
    printf("version %s vertices %zu exit %d min %.4f\n", lc_version(), n, lc_run_exit_code(r), lo);
    free(u);
    lc_run_free(r);
    lc_scenario_free(s);
    return 0;
}
