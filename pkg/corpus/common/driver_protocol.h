/*
 * Driver stdout protocol shared by all task drivers.
 *
 * Per test case:   CASE <index> PASS   or   CASE <index> FAIL
 * At program end:  TOTAL <passed>/<total>
 * Exit code 0 iff every case passed.
 */
#ifndef DRIVER_PROTOCOL_H
#define DRIVER_PROTOCOL_H

#include <stdio.h>

static int dp_passed_count = 0;
static int dp_total_count = 0;

static void dp_case(int index, int passed) {
    printf("CASE %d %s\n", index, passed ? "PASS" : "FAIL");
    dp_total_count += 1;
    if (passed) {
        dp_passed_count += 1;
    }
}

static int dp_finish(void) {
    printf("TOTAL %d/%d\n", dp_passed_count, dp_total_count);
    return (dp_total_count > 0 && dp_passed_count == dp_total_count) ? 0 : 1;
}

#endif /* DRIVER_PROTOCOL_H */
