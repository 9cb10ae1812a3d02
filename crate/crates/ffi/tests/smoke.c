#include <math.h>
#include <stdio.h>

#include "torus_energy.h"

int main(void) {
    TeLattice *e8 = NULL;
    if (te_lattice_named("E8", &e8) != TE_STATUS_OK) {
        fprintf(stderr, "%s\n", te_last_error());
        return 1;
    }
    double cov = 0.0, min = 0.0;
    te_lattice_info(e8, &cov, &min);
    te_lattice_free(e8);
    if (fabs(cov - 1.0) > 1e-12 || fabs(min - 2.0) > 1e-12) return 2;

    TeLattice *bad = NULL;
    if (te_lattice_named("nope", &bad) != TE_STATUS_INVALID_ARGUMENT || te_last_error() == NULL) return 3;

    TeLattice *z2 = NULL;
    double zeta = 0.0, err = 0.0;
    te_lattice_named("Z2", &z2);
    if (te_epstein_zeta(z2, 4.0, NULL, 0, &zeta, &err) != TE_STATUS_OK) return 4;
    te_lattice_free(z2);
    if (fabs(zeta - 6.0268120322) > 1e-7) return 5;
    printf("ok %s\n", te_version());
    return 0;
}
