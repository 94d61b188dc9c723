/* Minimal consumer of the C interface. Build from the workspace root with:
 *
 *   cargo build -p bnmr-ffi
 *   gcc -I crates/bnmr-ffi/include crates/bnmr-ffi/examples/audit_demo.c \
 *       -L target/debug -lbnmr_ffi -lm -o audit_demo
 *   LD_LIBRARY_PATH=target/debug ./audit_demo
 */
#include <assert.h>
#include <stdio.h>
#include <string.h>
#include "bnmr.h"

static const char *SPEC =
    "target = Y\nnodes = A B\nparents.B = A\ncpt.A = 0.5\ncpt.B = 0.3 0.7\n"
    "label.bias = -0.5\nlabel.coefs = 1.2 0.4\nlabel.noise_scale = 1.0\n"
    "feature.dim = 3\nfeature.sigma = 0.5\n"
    "feature.shift.A = 1.0 0.0 0.3\nfeature.shift.B = 0.0 1.0 -0.3\n";

int main(void) {
    BnmrDataset *ds = NULL;
    assert(bnmr_dataset_generate(SPEC, 300, 7, &ds) == BNMR_STATUS_OK);
    assert(bnmr_dataset_len(ds) == 300);

    BnmrNetwork *net = NULL;
    assert(bnmr_network_learn(ds, &net) == BNMR_STATUS_OK);
    double z = 0.0;
    assert(bnmr_network_calibrator_z(net, "A", 1, &z) == BNMR_STATUS_OK);
    assert(z == 1.0);
    assert(bnmr_network_calibrator_z(net, "missing", 1, &z) == BNMR_STATUS_INVALID);
    assert(strlen(bnmr_last_error_message()) > 0);

    unsigned char predictions[300];
    for (int i = 0; i < 300; i++) predictions[i] = (unsigned char)(i % 2);
    char *report = NULL;
    assert(bnmr_audit_predictions(ds, predictions, 300, &report) == BNMR_STATUS_OK);
    assert(strstr(report, "mean_tprd=") != NULL);
    bnmr_string_free(report);

    bnmr_network_free(net);
    bnmr_dataset_free(ds);
    puts("ffi smoke test ok");
    return 0;
}
