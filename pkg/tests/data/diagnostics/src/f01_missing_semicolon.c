#include <stdio.h>

static int add(int a, int b) {
    return a + b;
}

int total(void) {
    int x = add(1, 2)
    return x;
}
