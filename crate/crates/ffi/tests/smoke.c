#include <stdio.h>
#include <string.h>
#include "berthsim.h"

int main(void) {
    const char *src =
        "model tiny {\n"
        "  resource R servers=1\n"
        "  create c count=2\n"
        "  capture get R:1\n"
        "  task work dur=const(3)\n"
        "  release put R:1\n"
        "  destroy d\n"
        "  link c -> get\n  link get -> work\n  link work -> put\n  link put -> d\n"
        "}\n";
    BsModel *m = NULL;
    if (bs_model_parse(src, &m) != BS_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", bs_last_error());
        return 1;
    }
    char *json = NULL;
    uint64_t seed = 7;
    if (bs_replicate_json(m, NULL, NULL, 3, &seed, &json) != BS_STATUS_OK) {
        fprintf(stderr, "replicate: %s\n", bs_last_error());
        return 1;
    }
    if (strstr(json, "\"mean_days\": 6.0") == NULL) {
        fprintf(stderr, "unexpected report: %s\n", json);
        return 1;
    }
    bs_string_free(json);
    if (bs_model_parse("model {", &m) != BS_STATUS_PARSE || bs_last_error() == NULL) {
        return 1;
    }
    bs_model_free(m);
    printf("ok %s\n", bs_version());
    return 0;
}
