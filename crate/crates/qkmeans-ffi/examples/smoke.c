/* Minimal consumer of the C ABI.
 *
 * Build (from the workspace root):
 *   cargo build -p qkmeans-ffi --release
 *   cc crates/qkmeans-ffi/examples/smoke.c -Icrates/qkmeans-ffi/include \
 *      target/release/libqkmeans_ffi.a -lpthread -ldl -lm -o smoke
 */
#include <assert.h>
#include <math.h>
#include <stdio.h>

#include "qkmeans.h"

int main(void) {
    printf("qkmeans %s\n", qkm_version());

    QkmDataset *ds = NULL;
    QkmStatus st =
        qkm_dataset_generate(2000, 3, 2, 1.0, 0.15, 0.05, 2.0, 10.0, 0.1, 42, &ds);
    assert(st == QkmStatus_Ok);
    printf("generated n=%zu d=%zu k=%zu outliers=%zu\n", qkm_dataset_len(ds),
           qkm_dataset_dim(ds), qkm_dataset_k(ds), qkm_dataset_outlier_count(ds));

    char *report = NULL;
    st = qkm_run(ds, QkmAlgorithm_Outlier, 0.2, 0.2, 0.0, -1.0, QkmScale_Desk, 7,
                 &report);
    assert(st == QkmStatus_Ok);
    printf("report: %s\n", report);
    qkm_string_free(report);

    double total = 0.0;
    st = qkm_bounds_thm_qkmwol(1.0, 3, 0.2, 0.2, 0.15, NULL, NULL, &total);
    assert(st == QkmStatus_Ok);
    printf("two-phase query bound: %.1f\n", total);

    qkm_dataset_free(ds);
    return 0;
}
