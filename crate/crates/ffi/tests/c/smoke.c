#include <stdio.h>
#include <string.h>

#include "egots.h"

#define CHECK(call)                                                       \
    do {                                                                  \
        EgotsStatus s_ = (call);                                          \
        if (s_ != EGOTS_STATUS_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, egots_last_error()); \
            return 1;                                                     \
        }                                                                 \
    } while (0)

int main(void) {
    double x[200];
    for (int i = 0; i < 200; i++) {
        x[i] = (i % 40 < 20) ? (double)(i % 20) : (double)(20 - i % 20) * 0.5;
    }
    EgotsSeries *series = NULL;
    CHECK(egots_series_new(x, 1, 200, &series));
    EgotsGraph *graph = NULL;
    CHECK(egots_graph_self(series, 10, 3, 1, &graph));
    if (egots_graph_n_rows(graph) != 191 || egots_graph_k(graph) != 3 || !egots_graph_is_self(graph)) {
        return 2;
    }
    size_t row[3];
    CHECK(egots_graph_row(graph, 0, row, 3));
    for (int j = 0; j < 3; j++) {
        if (row[j] < 5) {
            return 3;
        }
    }

    size_t labels[191];
    for (int i = 0; i < 191; i++) {
        labels[i] = (i / 20) % 2 + 1;
    }
    EgotsLabels *train = NULL;
    CHECK(egots_labels_new(labels, 191, 3, &train));
    EgotsLabels *pred = NULL;
    CHECK(egots_knn_predict(graph, train, 1, &pred));
    EgotsLabels *smoothed = NULL;
    CHECK(egots_smooth(pred, 5, &smoothed));
    EgotsScores scores;
    CHECK(egots_onset_f1(train, train, 0, &scores));
    if (scores.f1 != 1.0) {
        return 4;
    }

    if (egots_graph_row(graph, 1000, row, 3) != EGOTS_STATUS_INVALID_ARGUMENT || egots_last_error() == NULL) {
        return 5;
    }
    if (egots_series_new(NULL, 1, 10, &series) != EGOTS_STATUS_NULL_POINTER) {
        return 6;
    }

    printf("ok %s f1=%.4f\n", egots_version(), scores.f1);
    egots_labels_free(smoothed);
    egots_labels_free(pred);
    egots_labels_free(train);
    egots_graph_free(graph);
    egots_series_free(series);
    return 0;
}
