#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "cosal.h"

#define W 48
#define H 40

static void fill(uint8_t *rgb, double *depth, uint8_t *map, int shift) {
    for (int y = 0; y < H; y++) {
        for (int x = 0; x < W; x++) {
            int i = y * W + x;
            int inside = x >= 10 + shift && x < 26 + shift && y >= 12 && y < 28;
            rgb[3 * i + 0] = inside ? 220 : (uint8_t)(60 + (x % 4) * 5);
            rgb[3 * i + 1] = inside ? 60 : 90;
            rgb[3 * i + 2] = inside ? 40 : (uint8_t)(70 + (y % 4) * 5);
            depth[i] = inside ? 0.9 : 0.1 + 0.3 * y / (double)H;
            map[i] = inside ? 230 : 20;
        }
    }
}

int main(void) {
    static uint8_t rgb[W * H * 3], map[W * H], out[W * H];
    static double depth[W * H];
    CosalGroup *group = cosal_group_new();
    for (int k = 0; k < 2; k++) {
        uint32_t index = 0;
        fill(rgb, depth, map, 4 * k);
        if (cosal_group_add_image(group, rgb, W, H, depth, &index) != COSAL_STATUS_OK) return 1;
        if (cosal_group_add_saliency(group, index, "m", map) != COSAL_STATUS_OK) return 2;
    }
    if (cosal_group_add_saliency(group, 7, "m", map) != COSAL_STATUS_OUT_OF_RANGE) return 3;
    if (cosal_last_error() == NULL) return 4;

    CosalConfig config = cosal_config_default();
    config.n_superpixels = 40;
    CosalResult *result = NULL;
    if (cosal_run(group, &config, &result) != COSAL_STATUS_OK) {
        fprintf(stderr, "%s\n", cosal_last_error());
        return 5;
    }
    if (cosal_result_len(result) != 2) return 6;
    if (cosal_result_copy_map(result, 0, out, sizeof out) != COSAL_STATUS_OK) return 7;
    if (cosal_result_copy_map(result, 0, out, 10) != COSAL_STATUS_BUFFER_TOO_SMALL) return 8;
    if (out[20 * W + 18] <= out[2 * W + 2]) return 9;
    uint32_t iters = 99;
    if (cosal_result_iterations(result, 1, &iters) != COSAL_STATUS_OK || iters > config.i_max) return 10;
    cosal_result_free(result);
    cosal_group_free(group);

    double f = cosal_f_measure(0.8, 0.5, 0.3);
    if (f < 0.7026 || f > 0.7028) return 11;
    double auc = 0.0;
    if (cosal_auc(map, map, W, H, &auc) != COSAL_STATUS_OK || auc != 1.0) return 12;
    printf("ok %s\n", cosal_version());
    return 0;
}
