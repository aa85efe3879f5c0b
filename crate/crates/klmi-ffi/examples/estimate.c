/* Minimal C caller: estimate mutual information for four labelled
 * points on a line, then sweep h over [1, 2].
 *
 * Build (from the workspace root, after `cargo build --release`):
 *   cc crates/klmi-ffi/examples/estimate.c \
 *      -Icrates/klmi-ffi/include -Ltarget/release -lklmi_ffi -lm -o estimate
 *   LD_LIBRARY_PATH=target/release ./estimate
 */

#include <stdio.h>

#include "klmi.h"

int main(void) {
    const uint32_t labels[4] = {0, 0, 1, 1};
    const double features[4] = {0.0, 0.1, 10.0, 10.1};

    KlmiDataset *ds = NULL;
    KlmiStatus status =
        klmi_dataset_from_points(labels, features, 4, 1, "euclidean", &ds);
    if (status != KlmiOk) {
        fprintf(stderr, "dataset: %s\n", klmi_last_error_message());
        return 1;
    }

    KlmiEstimate est;
    status = klmi_estimate(ds, 2, &est);
    if (status != KlmiOk) {
        fprintf(stderr, "estimate: %s\n", klmi_last_error_message());
        klmi_dataset_free(ds);
        return 1;
    }
    printf("h=%u  i0=%.6f  ib=%.6f  ie=%.6f bits\n", est.h, est.i0_bits,
           est.ib_bits, est.ie_bits);

    KlmiEstimate sweep[2];
    uint32_t selected = 0;
    status = klmi_sweep(ds, 1, 2, sweep, &selected);
    if (status != KlmiOk) {
        fprintf(stderr, "sweep: %s\n", klmi_last_error_message());
        klmi_dataset_free(ds);
        return 1;
    }
    printf("sweep selected h=%u (ie=%.6f bits)\n", selected,
           sweep[selected - 1].ie_bits);

    klmi_dataset_free(ds);
    return 0;
}
