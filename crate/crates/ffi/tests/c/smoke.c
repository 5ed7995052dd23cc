#include <stdio.h>
#include <string.h>

#include "assocpipe.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        ApStatus st_ = (call);                                             \
        if (st_ != AP_STATUS_OK) {                                         \
            fprintf(stderr, "%s failed: %d %s\n", #call, st_, ap_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(int argc, char **argv) {
    const char *rows[] = {"p1", "p1", "p2"};
    const char *cols[] = {"ip.src", "ip.dst", "ip.src"};
    const char *vals[] = {"1.1.1.1", "2.2.2.2", "1.1.1.1"};
    ApArray *a = NULL, *e = NULL, *et = NULL, *deg = NULL;
    ApStore *store = NULL;
    size_t nnz = 0, packets = 0;
    double v = 0;
    bool found = false;
    char *text = NULL;

    if (argc < 2) {
        fprintf(stderr, "usage: smoke STORE_DIR\n");
        return 2;
    }
    CHECK(ap_array_from_string_triples(rows, cols, vals, 3, &a));
    CHECK(ap_array_val2col(a, "|", &e));
    CHECK(ap_array_nnz(e, &nnz));
    if (nnz != 3) return 3;

    CHECK(ap_array_transpose(e, &et));
    CHECK(ap_array_matmul(et, e, AP_SEMIRING_PLUS_TIMES, &deg));
    CHECK(ap_array_get(deg, "ip.src|1.1.1.1", "ip.src|1.1.1.1", &v, &found));
    if (!found || v != 2.0) return 4;

    if (ap_array_val2col(NULL, "|", &e) != AP_STATUS_NULL_ARGUMENT) return 5;
    if (strlen(ap_last_error()) == 0) return 6;
    if (ap_array_matmul(a, a, AP_SEMIRING_PLUS_TIMES, &deg) != AP_STATUS_TYPE) return 7;

    CHECK(ap_store_open(argv[1], &store));
    CHECK(ap_store_put_array(store, "Tedge", e, "1"));
    CHECK(ap_store_put_array(store, "TedgeT", et, "1"));
    CHECK(ap_connections_to(store, "1.1.1.1", &text, &packets));
    if (packets != 2) return 8;
    printf("%s", text);
    ap_string_free(text);
    CHECK(ap_store_close(store));

    ap_array_free(a);
    ap_array_free(e);
    ap_array_free(et);
    ap_array_free(deg);
    return 0;
}
