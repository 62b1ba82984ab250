#include <stdio.h>
#include "qforest.h"

int main(void) {
    double x[24];
    uint32_t y[12], pred[12];
    for (int i = 0; i < 12; i++) {
        double t = 0.01 * i;
        int odd = i % 2;
        x[2 * i] = odd ? 2.7 - t : 0.2 + t;
        x[2 * i + 1] = odd ? 2.8 - t : 0.3 + t;
        y[i] = (uint32_t)odd;
    }
    QfForestParams p;
    if (qf_forest_params_default(&p) != QF_STATUS_OK) return 1;
    p.n_trees = 3;
    p.max_depth = 2;
    p.landmarks = 6;
    p.shots = 0;
    QfModel *m = NULL;
    if (qf_forest_train(x, 12, 2, y, 2, &p, &m) != QF_STATUS_OK) {
        fprintf(stderr, "%s\n", qf_last_error_message());
        return 2;
    }
    if (qf_model_predict(m, x, 12, 2, pred) != QF_STATUS_OK) return 3;
    int correct = 0;
    for (int i = 0; i < 12; i++) correct += pred[i] == y[i];
    QfStatus st = qf_model_predict(m, NULL, 12, 2, pred);
    qf_model_free(m);
    if (st != QF_STATUS_NULL_POINTER || qf_last_error_message() == NULL) return 4;
    printf("%d/12\n", correct);
    return correct == 12 ? 0 : 5;
}
